#include <doctest.h>

#include <cmath>

#include "oracles.hpp"
#include "ruleflow/error.hpp"
#include "ruleflow/mlp.hpp"
#include "ruleflow/random.hpp"

using namespace ruleflow;

namespace {

using Model = MlpModel<double>;

Model zero_net(Eigen::Index in, std::vector<Eigen::Index> hidden) {
  Model m = init_mlp<double>(in, hidden, 0);
  for (auto& w : m.weights) w.setZero();
  for (auto& b : m.biases) b.setZero();
  return m;
}

double loss_of(const Model& m, const Eigen::MatrixXd& x, const Eigen::VectorXd& y) {
  double s = 0.0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    const double r = forward(m, Eigen::VectorXd(x.row(i).transpose())) - y(i);
    s += r * r;
  }
  return s / static_cast<double>(x.rows());
}

// Smallest |pre-activation| over the batch; finite differences are only
// meaningful away from the rectifier kink.
double kink_distance(const Model& m, const Eigen::MatrixXd& x) {
  double best = std::numeric_limits<double>::infinity();
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    Eigen::VectorXd a = x.row(i).transpose();
    for (std::size_t l = 0; l + 1 < m.n_layers(); ++l) {
      Eigen::VectorXd z = m.weights[l] * a + m.biases[l];
      best = std::min(best, z.cwiseAbs().minCoeff());
      a = z.cwiseMax(0.0);
    }
  }
  return best;
}

}  // namespace

TEST_CASE("init_mlp shapes and seeding") {
  const Model m = init_mlp<double>(10, {64, 32}, 5);
  CHECK(m.layer_dims == std::vector<Eigen::Index>{10, 64, 32, 1});
  CHECK(m.weights[0].rows() == 64);
  CHECK(m.weights[0].cols() == 10);
  CHECK(m.biases[2].size() == 1);
  CHECK(m.biases[0].isZero());
  const double limit = std::sqrt(6.0 / 74.0);
  CHECK(m.weights[0].cwiseAbs().maxCoeff() <= limit);

  const Model same = init_mlp<double>(10, {64, 32}, 5);
  const Model other = init_mlp<double>(10, {64, 32}, 6);
  for (std::size_t l = 0; l < m.n_layers(); ++l) CHECK(m.weights[l] == same.weights[l]);
  CHECK(m.weights[0] != other.weights[0]);
  CHECK_THROWS_AS(init_mlp<double>(0, {4}, 1), Error);
  CHECK_THROWS_AS(init_mlp<double>(3, {0}, 1), Error);
}

TEST_CASE("forward pass by hand") {
  const Model z = zero_net(3, {4});
  CHECK(forward(z, Eigen::Vector3d(1, -2, 3)) == 0.0);

  Model lin = init_mlp<double>(1, {}, 0);
  lin.weights[0](0, 0) = 2.0;
  lin.biases[0](0) = 1.0;
  CHECK(forward(lin, Eigen::VectorXd::Constant(1, 3.0)) == 7.0);

  // 2-2-1: h = relu(W1 x + b1), out = W2 h + b2.
  Model m = init_mlp<double>(2, {2}, 0);
  m.weights[0] << 1.0, -1.0, 0.5, 2.0;
  m.biases[0] << 0.0, -1.0;
  m.weights[1] << 3.0, -2.0;
  m.biases[1] << 0.25;
  // x = (1, 2): z1 = (1 - 2, 0.5 + 4 - 1) = (-1, 3.5); h = (0, 3.5); out = -7 + 0.25.
  CHECK(forward(m, Eigen::Vector2d(1, 2)) == -6.75);
  // x = (3, 1): z1 = (2, 1.5 + 2 - 1) = (2, 2.5); out = 6 - 5 + 0.25.
  CHECK(forward(m, Eigen::Vector2d(3, 1)) == 1.25);
  CHECK_THROWS_AS(forward(m, Eigen::Vector3d(1, 2, 3)), Error);
}

TEST_CASE("loss and gradients at simple points") {
  const Model z = zero_net(3, {4, 2});
  const auto g = loss_and_gradients(z, Eigen::MatrixXd::Random(5, 3), Eigen::VectorXd::Zero(5));
  CHECK(g.loss == 0.0);
  for (const auto& w : g.weights) CHECK(w.isZero());
  for (const auto& b : g.biases) CHECK(b.isZero());

  Model lin = init_mlp<double>(1, {}, 0);
  lin.weights[0](0, 0) = 1.5;
  const auto gl = loss_and_gradients(lin, Eigen::MatrixXd::Ones(1, 1), Eigen::VectorXd::Zero(1));
  CHECK(gl.loss == 2.25);
  CHECK(gl.weights[0](0, 0) == 3.0);
}

TEST_CASE("analytic gradients match central differences") {
  const double h = 1e-5;
  int checked = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    CAPTURE(seed);
    Model m = init_mlp<double>(5, {8}, seed);
    Rng rng(seed + 1000);
    for (auto& b : m.biases) {
      for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = rng.uniform(-0.5, 0.5);
    }
    Eigen::MatrixXd x(4, 5);
    Eigen::VectorXd y(4);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
    for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.normal();
    if (kink_distance(m, x) < 1e-4) continue;
    ++checked;

    const auto g = loss_and_gradients(m, x, y);
    CHECK(std::abs(g.loss - loss_of(m, x, y)) < 1e-12);
    double worst = 0.0;
    auto probe = [&](double& param, double analytic) {
      const double saved = param;
      param = saved + h;
      const double up = loss_of(m, x, y);
      param = saved - h;
      const double down = loss_of(m, x, y);
      param = saved;
      const double numeric = (up - down) / (2 * h);
      worst = std::max(worst, std::abs(analytic - numeric) /
                                  std::max(1e-8, std::abs(analytic) + std::abs(numeric)));
    };
    for (std::size_t l = 0; l < m.n_layers(); ++l) {
      for (Eigen::Index i = 0; i < m.weights[l].size(); ++i) {
        probe(m.weights[l].data()[i], g.weights[l].data()[i]);
      }
      for (Eigen::Index i = 0; i < m.biases[l].size(); ++i) {
        probe(m.biases[l].data()[i], g.biases[l].data()[i]);
      }
    }
    CHECK(worst < 1e-5);
  }
  CHECK(checked >= 15);
}

TEST_CASE("dense and sparse inputs give the same gradients") {
  const Model m = init_mlp<double>(6, {7, 3}, 4);
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(9, 6);
  x(0, 1) = 1;
  x(2, 5) = -2;
  x(3, 0) = 0.5;
  x(8, 2) = 3;
  const Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(9, -1, 1);
  const auto dense = loss_and_gradients(m, x, y);
  const Eigen::SparseMatrix<double> sx = x.sparseView();
  const auto sparse = loss_and_gradients(m, sx, y);
  CHECK(dense.loss == sparse.loss);
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    CHECK(dense.weights[l] == sparse.weights[l]);
    CHECK(dense.biases[l] == sparse.biases[l]);
  }
}

TEST_CASE("training recovers a linear function") {
  Rng rng(8);
  Eigen::MatrixXd x(400, 1);
  Eigen::VectorXd y(400);
  for (Eigen::Index i = 0; i < 400; ++i) {
    x(i, 0) = rng.uniform(-1.0, 1.0);
    y(i) = 2.0 * x(i, 0) + 1.0;
  }
  TrainConfig cfg;
  cfg.epochs = 500;
  cfg.batch_size = 32;
  cfg.learning_rate = 3e-3;
  cfg.seed = 2;
  cfg.early_stop_patience.reset();
  const auto [model, history] = train(init_mlp<double>(1, {8}, 2), x, y, cfg);
  CHECK(history.train_loss.size() == 500);
  CHECK(history.train_loss.back() < history.initial_train_loss);

  Eigen::MatrixXd held(50, 1);
  for (Eigen::Index i = 0; i < 50; ++i) held(i, 0) = -0.95 + 1.9 * double(i) / 49.0;
  const Eigen::VectorXd pred = predict_batch(model, held);
  const Eigen::VectorXd truth = (2.0 * held.col(0).array() + 1.0).matrix();
  CHECK((pred - truth).cwiseAbs().mean() < 0.05);
}

TEST_CASE("training is deterministic and lr 0 is a no-op") {
  Rng rng(9);
  Eigen::MatrixXd x(120, 3);
  Eigen::VectorXd y(120);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = std::abs(x(i, 0)) + x(i, 1);
  TrainConfig cfg;
  cfg.epochs = 15;
  cfg.batch_size = 16;
  cfg.seed = 11;
  const Model init = init_mlp<double>(3, {5, 4}, 11);
  const auto a = train(init, x, y, cfg);
  const auto b = train(init, x, y, cfg);
  CHECK(a.second.train_loss == b.second.train_loss);
  for (std::size_t l = 0; l < init.n_layers(); ++l) CHECK(a.first.weights[l] == b.first.weights[l]);

  cfg.learning_rate = 0.0;
  cfg.early_stop_patience.reset();
  const auto frozen = train(init, x, y, cfg);
  for (std::size_t l = 0; l < init.n_layers(); ++l) {
    CHECK(frozen.first.weights[l] == init.weights[l]);
    CHECK(frozen.first.biases[l] == init.biases[l]);
  }
  for (double loss : frozen.second.train_loss) {
    CHECK(loss == doctest::Approx(frozen.second.initial_train_loss).epsilon(1e-12));
  }
}

TEST_CASE("early stopping restores the best validation epoch") {
  Rng rng(10);
  Eigen::MatrixXd x(200, 2);
  Eigen::VectorXd y(200);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.normal();
  for (Eigen::Index i = 0; i < y.size(); ++i) y(i) = rng.normal();  // pure noise: overfits
  TrainConfig cfg;
  cfg.epochs = 300;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.early_stop_patience = 5;
  const auto [model, history] = train(init_mlp<double>(2, {32}, 3), x, y, cfg);
  REQUIRE(history.best_epoch >= 0);
  CHECK(history.validation_loss.size() <= 300);
  CHECK(history.validation_loss.size() == history.train_loss.size());
  const double best = history.validation_loss[static_cast<std::size_t>(history.best_epoch)];
  for (double v : history.validation_loss) CHECK(best <= v);
}

TEST_CASE("predict_batch") {
  const Model m = init_mlp<double>(4, {6}, 12);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(11, 4);
  const Eigen::VectorXd batch = predict_batch(m, x);
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    CHECK(batch(i) == predict_one(m, Eigen::VectorXd(x.row(i).transpose())));
  }
  CHECK(predict_batch(m, Eigen::MatrixXd(0, 4)).size() == 0);
  CHECK_THROWS_AS(predict_batch(m, Eigen::MatrixXd::Zero(2, 3)), Error);

  Model z = zero_net(4, {6});
  z.target_standardized = true;
  z.target_mean = 123.5;
  z.target_sd = 17.0;
  CHECK((predict_batch(z, x).array() == 123.5).all());
}

TEST_CASE("checkpoint round-trip is exact") {
  Model m = init_mlp<double>(3, {5, 2}, 13);
  m.target_standardized = true;
  m.target_mean = 1234.56789;
  m.target_sd = 0.1;
  const Model back = mlp_from_json<double>(mlp_to_json(m));
  CHECK(back.layer_dims == m.layer_dims);
  for (std::size_t l = 0; l < m.n_layers(); ++l) {
    CHECK(back.weights[l] == m.weights[l]);
    CHECK(back.biases[l] == m.biases[l]);
  }
  CHECK(back.target_mean == m.target_mean);
  CHECK(back.target_sd == m.target_sd);
  CHECK(mlp_to_json(back) == mlp_to_json(m));
  CHECK_THROWS_AS(mlp_from_json<double>("{}"), Error);
}

TEST_CASE("config validation") {
  TrainConfig cfg;
  CHECK_NOTHROW(validate(cfg));
  cfg.epochs = 0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = {};
  cfg.beta1 = 1.0;
  CHECK_THROWS_AS(validate(cfg), Error);
  cfg = {};
  cfg.batch_size = 0;
  CHECK_THROWS_AS(validate(cfg), Error);
}
