#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/SparseCore>
#include <json.hpp>

#include "ruleflow/error.hpp"
#include "ruleflow/random.hpp"

namespace ruleflow {

/// Feed-forward regressor: rectifier hidden layers, one identity output.
/// Weight l has shape layer_dims[l+1] x layer_dims[l].
template <typename Scalar>
struct MlpModel {
  using MatrixType = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  using VectorType = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  std::vector<Eigen::Index> layer_dims;
  std::vector<MatrixType> weights;
  std::vector<VectorType> biases;

  // Affine map from network output to target units (identity by default).
  bool target_standardized = false;
  Scalar target_mean = 0;
  Scalar target_sd = 1;

  Eigen::Index input_dim() const { return layer_dims.front(); }
  std::size_t n_layers() const { return weights.size(); }
};

template <typename Scalar>
struct MlpGradients {
  Scalar loss = 0;
  std::vector<typename MlpModel<Scalar>::MatrixType> weights;
  std::vector<typename MlpModel<Scalar>::VectorType> biases;
};

struct TrainConfig {
  int epochs = 200;
  Eigen::Index batch_size = 256;
  double learning_rate = 1e-3;
  std::uint64_t seed = 0;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::optional<int> early_stop_patience = 20;
  double validation_fraction = 0.1;  // only used with early stopping
  bool target_standardize = true;
};

struct TrainHistory {
  double initial_train_loss = 0.0;
  std::vector<double> train_loss;       // mean batch loss per epoch
  std::vector<double> validation_loss;  // empty without a holdout
  int best_epoch = -1;                  // restored epoch under early stopping
};

void validate(const TrainConfig& cfg);

/// Glorot-uniform weights, zero biases, deterministic in `seed`.
template <typename Scalar = double>
MlpModel<Scalar> init_mlp(Eigen::Index input_dim,
                          const std::vector<Eigen::Index>& hidden_dims,
                          std::uint64_t seed) {
  if (input_dim < 1) throw ValidationError("network input width must be >= 1");
  MlpModel<Scalar> model;
  model.layer_dims.push_back(input_dim);
  for (auto h : hidden_dims) {
    if (h < 1) throw ValidationError("hidden layer width must be >= 1");
    model.layer_dims.push_back(h);
  }
  model.layer_dims.push_back(1);

  Rng rng(seed);
  for (std::size_t l = 0; l + 1 < model.layer_dims.size(); ++l) {
    const auto fan_in = model.layer_dims[l];
    const auto fan_out = model.layer_dims[l + 1];
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    typename MlpModel<Scalar>::MatrixType w(fan_out, fan_in);
    for (Eigen::Index j = 0; j < fan_in; ++j) {
      for (Eigen::Index i = 0; i < fan_out; ++i) {
        w(i, j) = static_cast<Scalar>(rng.uniform(-limit, limit));
      }
    }
    model.weights.push_back(std::move(w));
    model.biases.push_back(MlpModel<Scalar>::VectorType::Zero(fan_out));
  }
  return model;
}

/// Raw network output for one row (before any target inverse transform).
/// Zero inputs are skipped in the first layer, so a sparse rule encoding
/// costs only its active entries.
template <typename Scalar, typename Derived>
Scalar forward(const MlpModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  if (x.size() != model.input_dim()) {
    throw ValidationError("input has width " + std::to_string(x.size()) +
                          ", network expects " + std::to_string(model.input_dim()));
  }
  typename MlpModel<Scalar>::VectorType a = model.biases[0];
  for (Eigen::Index c = 0; c < x.size(); ++c) {
    const Scalar v = x(c);
    if (v != Scalar(0)) a.noalias() += v * model.weights[0].col(c);
  }
  for (std::size_t l = 1; l < model.n_layers(); ++l) {
    a = a.cwiseMax(Scalar(0));
    typename MlpModel<Scalar>::VectorType z = model.biases[l];
    z.noalias() += model.weights[l] * a;
    a = std::move(z);
  }
  return a(0);
}

/// Target-unit prediction for one row.
template <typename Scalar, typename Derived>
Scalar predict_one(const MlpModel<Scalar>& model, const Eigen::MatrixBase<Derived>& x) {
  const Scalar out = forward(model, x);
  return model.target_standardized ? out * model.target_sd + model.target_mean : out;
}

/// Row-wise predict_one over a dense batch.
template <typename Scalar, typename Derived>
Eigen::Matrix<Scalar, Eigen::Dynamic, 1> predict_batch(
    const MlpModel<Scalar>& model, const Eigen::MatrixBase<Derived>& rows) {
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> out(rows.rows());
  if (rows.rows() > 0 && rows.cols() != model.input_dim()) {
    throw ValidationError("batch has width " + std::to_string(rows.cols()) +
                          ", network expects " + std::to_string(model.input_dim()));
  }
  Eigen::Matrix<Scalar, Eigen::Dynamic, 1> row(rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i) {
    row = rows.row(i).transpose();
    out(i) = predict_one(model, row);
  }
  return out;
}

namespace mlp_detail {

// Inputs are held row-major sparse: rule indicators are mostly zero, and the
// first layer only touches the active entries of each row.
template <typename Scalar>
using SparseRows = Eigen::SparseMatrix<Scalar, Eigen::RowMajor>;

template <typename Scalar, typename Derived>
SparseRows<Scalar> gather_rows(const Eigen::MatrixBase<Derived>& x,
                               const std::vector<Eigen::Index>& rows) {
  std::vector<Eigen::Triplet<Scalar>> triplets;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    for (Eigen::Index c = 0; c < x.cols(); ++c) {
      const Scalar v = static_cast<Scalar>(x(rows[k], c));
      if (v != Scalar(0)) triplets.emplace_back(static_cast<Eigen::Index>(k), c, v);
    }
  }
  SparseRows<Scalar> out(static_cast<Eigen::Index>(rows.size()), x.cols());
  out.setFromTriplets(triplets.begin(), triplets.end());
  return out;
}

/// Scratch buffers reused across batches. Activations are feature-major:
/// pre[l] is layer_dims[l+1] x batch.
template <typename Scalar>
struct Workspace {
  using MatrixType = typename MlpModel<Scalar>::MatrixType;
  std::vector<MatrixType> pre, acts;
  MatrixType delta, back;
  MlpGradients<Scalar> grad;
};

/// Mean squared error of the rows `rows` of `x` against `y` (indexed like
/// `x`), plus gradients into ws.grad when `with_grad` is set.
template <typename Scalar>
Scalar batch_loss(const MlpModel<Scalar>& model, const SparseRows<Scalar>& x,
                  std::span<const Eigen::Index> rows,
                  const typename MlpModel<Scalar>::VectorType& y, Workspace<Scalar>& ws,
                  bool with_grad) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  const std::size_t L = model.n_layers();
  ws.pre.resize(L);
  ws.acts.resize(L);

  const auto& w0 = model.weights[0];
  ws.pre[0].resize(w0.rows(), n);
  for (Eigen::Index k = 0; k < n; ++k) {
    auto col = ws.pre[0].col(k);
    col = model.biases[0];
    for (typename SparseRows<Scalar>::InnerIterator it(x, rows[static_cast<std::size_t>(k)]);
         it; ++it) {
      col.noalias() += it.value() * w0.col(it.col());
    }
  }
  for (std::size_t l = 1; l < L; ++l) {
    ws.acts[l] = ws.pre[l - 1].cwiseMax(Scalar(0));
    ws.pre[l].noalias() = model.weights[l] * ws.acts[l];
    ws.pre[l].colwise() += model.biases[l];
  }
  auto out = ws.pre[L - 1].row(0);
  if (!out.allFinite()) throw NumericError("non-finite network output");

  ws.delta.resize(1, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    ws.delta(0, k) = out(k) - y(rows[static_cast<std::size_t>(k)]);
  }
  const Scalar loss = ws.delta.squaredNorm() / static_cast<Scalar>(n);
  if (!with_grad) return loss;

  auto& g = ws.grad;
  g.loss = loss;
  g.weights.resize(L);
  g.biases.resize(L);
  ws.delta *= Scalar(2) / static_cast<Scalar>(n);
  for (std::size_t l = L; l-- > 1;) {
    g.weights[l].noalias() = ws.delta * ws.acts[l].transpose();
    g.biases[l] = ws.delta.rowwise().sum();
    ws.back.noalias() = model.weights[l].transpose() * ws.delta;
    ws.delta = ws.back.cwiseProduct(
        (ws.pre[l - 1].array() > Scalar(0)).template cast<Scalar>().matrix());
  }
  g.weights[0].setZero(w0.rows(), w0.cols());
  for (Eigen::Index k = 0; k < n; ++k) {
    for (typename SparseRows<Scalar>::InnerIterator it(x, rows[static_cast<std::size_t>(k)]);
         it; ++it) {
      g.weights[0].col(it.col()).noalias() += it.value() * ws.delta.col(k);
    }
  }
  g.biases[0] = ws.delta.rowwise().sum();
  return loss;
}

template <typename Scalar>
struct AdamState {
  std::vector<typename MlpModel<Scalar>::MatrixType> mw, vw;
  std::vector<typename MlpModel<Scalar>::VectorType> mb, vb;
  long step = 0;

  explicit AdamState(const MlpModel<Scalar>& model) {
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
      mw.push_back(model.weights[l].Zero(model.weights[l].rows(), model.weights[l].cols()));
      vw.push_back(mw.back());
      mb.push_back(model.biases[l].Zero(model.biases[l].size()));
      vb.push_back(mb.back());
    }
  }

  void apply(MlpModel<Scalar>& model, const MlpGradients<Scalar>& g,
             const TrainConfig& cfg) {
    ++step;
    const Scalar b1 = static_cast<Scalar>(cfg.beta1);
    const Scalar b2 = static_cast<Scalar>(cfg.beta2);
    const Scalar eps = static_cast<Scalar>(cfg.epsilon);
    const Scalar c1 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta1, step));
    const Scalar c2 = Scalar(1) - static_cast<Scalar>(std::pow(cfg.beta2, step));
    const Scalar lr = static_cast<Scalar>(cfg.learning_rate);
    auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
      m = b1 * m + (Scalar(1) - b1) * grad;
      v = b2 * v + (Scalar(1) - b2) * grad.cwiseAbs2();
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t l = 0; l < model.n_layers(); ++l) {
      update(model.weights[l], mw[l], vw[l], g.weights[l]);
      update(model.biases[l], mb[l], vb[l], g.biases[l]);
    }
  }
};

template <typename Scalar>
MlpGradients<Scalar> all_rows_gradients(const MlpModel<Scalar>& model,
                                        const SparseRows<Scalar>& x,
                                        const typename MlpModel<Scalar>::VectorType& y) {
  const Eigen::Index n = x.rows();
  if (n == 0) throw ValidationError("empty batch");
  if (y.size() != n || x.cols() != model.input_dim()) {
    throw ValidationError("batch shape does not match the network");
  }
  Workspace<Scalar> ws;
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(n));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  batch_loss(model, x, std::span<const Eigen::Index>(rows), y, ws, true);
  return std::move(ws.grad);
}

}  // namespace mlp_detail

/// Mean squared error over the batch and its reverse-mode gradients.
/// Rows are samples; `targets` are in network-output units.
template <typename Scalar, typename XDerived, typename YDerived>
MlpGradients<Scalar> loss_and_gradients(const MlpModel<Scalar>& model,
                                        const Eigen::MatrixBase<XDerived>& inputs,
                                        const Eigen::MatrixBase<YDerived>& targets) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(inputs.rows()));
  std::iota(rows.begin(), rows.end(), Eigen::Index{0});
  return mlp_detail::all_rows_gradients<Scalar>(
      model, mlp_detail::gather_rows<Scalar>(inputs, rows),
      targets.template cast<Scalar>());
}

template <typename Scalar, typename XDerived, typename YDerived>
MlpGradients<Scalar> loss_and_gradients(const MlpModel<Scalar>& model,
                                        const Eigen::SparseMatrixBase<XDerived>& inputs,
                                        const Eigen::MatrixBase<YDerived>& targets) {
  return mlp_detail::all_rows_gradients<Scalar>(
      model, mlp_detail::SparseRows<Scalar>(inputs.template cast<Scalar>()),
      targets.template cast<Scalar>());
}

/// Mini-batch Adam on mean squared error. Batches come from a seeded
/// shuffle each epoch. With early stopping a validation slice is carved
/// from `features`, and the best-validation parameters are restored.
template <typename Scalar, typename XDerived, typename YDerived>
std::pair<MlpModel<Scalar>, TrainHistory> train(
    MlpModel<Scalar> model, const Eigen::MatrixBase<XDerived>& features,
    const Eigen::MatrixBase<YDerived>& targets, const TrainConfig& cfg) {
  using VectorType = typename MlpModel<Scalar>::VectorType;
  validate(cfg);
  const Eigen::Index n = features.rows();
  if (n == 0) throw ValidationError("cannot train on an empty dataset");
  if (features.cols() != model.input_dim()) {
    throw ValidationError("dataset width " + std::to_string(features.cols()) +
                          " does not match network input " +
                          std::to_string(model.input_dim()));
  }
  if (targets.size() != n) throw ValidationError("target length mismatch");
  if (!features.allFinite() || !targets.allFinite()) {
    throw ValidationError("training data contains non-finite values");
  }

  Rng rng(hash_combine(cfg.seed, 0x7472616eULL));
  std::vector<Eigen::Index> fit_rows(static_cast<std::size_t>(n));
  std::iota(fit_rows.begin(), fit_rows.end(), Eigen::Index{0});
  std::vector<Eigen::Index> val_rows;
  if (cfg.early_stop_patience && cfg.validation_fraction > 0.0) {
    const auto n_val = static_cast<std::size_t>(
        std::floor(cfg.validation_fraction * static_cast<double>(n)));
    if (n_val >= 1 && n_val < fit_rows.size()) {
      rng.shuffle(std::span<Eigen::Index>(fit_rows));
      val_rows.assign(fit_rows.end() - static_cast<std::ptrdiff_t>(n_val),
                      fit_rows.end());
      fit_rows.resize(fit_rows.size() - n_val);
      std::sort(fit_rows.begin(), fit_rows.end());
      std::sort(val_rows.begin(), val_rows.end());
    }
  }

  VectorType y(n);
  for (Eigen::Index i = 0; i < n; ++i) y(i) = static_cast<Scalar>(targets(i));
  model.target_standardized = cfg.target_standardize;
  model.target_mean = 0;
  model.target_sd = 1;
  if (cfg.target_standardize) {
    double sum = 0.0;
    for (auto r : fit_rows) sum += static_cast<double>(y(r));
    const double mean = sum / static_cast<double>(fit_rows.size());
    double ss = 0.0;
    for (auto r : fit_rows) {
      const double d = static_cast<double>(y(r)) - mean;
      ss += d * d;
    }
    const double sd = std::sqrt(ss / static_cast<double>(fit_rows.size()));
    model.target_mean = static_cast<Scalar>(mean);
    model.target_sd = static_cast<Scalar>(sd > 0.0 ? sd : 1.0);
  }
  const VectorType y_net = ((y.array() - model.target_mean) / model.target_sd).matrix();

  std::vector<Eigen::Index> all_rows(static_cast<std::size_t>(n));
  std::iota(all_rows.begin(), all_rows.end(), Eigen::Index{0});
  const auto x = mlp_detail::gather_rows<Scalar>(features, all_rows);
  mlp_detail::Workspace<Scalar> ws;
  auto loss_over = [&](const std::vector<Eigen::Index>& rows) {
    return static_cast<double>(mlp_detail::batch_loss(
        model, x, std::span<const Eigen::Index>(rows), y_net, ws, false));
  };

  TrainHistory history;
  history.initial_train_loss = loss_over(fit_rows);

  mlp_detail::AdamState<Scalar> adam(model);
  MlpModel<Scalar> best = model;
  double best_val = std::numeric_limits<double>::infinity();
  int since_best = 0;

  std::vector<Eigen::Index> order = fit_rows;
  const auto batch = static_cast<std::size_t>(cfg.batch_size);
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.shuffle(std::span<Eigen::Index>(order));
    double weighted = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch) {
      const std::size_t end = std::min(order.size(), start + batch);
      const std::span<const Eigen::Index> rows(order.data() + start, end - start);
      const Scalar loss = mlp_detail::batch_loss(model, x, rows, y_net, ws, true);
      if (!std::isfinite(static_cast<double>(loss))) {
        throw NumericError("training diverged: non-finite loss at epoch " +
                           std::to_string(epoch + 1));
      }
      weighted += static_cast<double>(loss) * static_cast<double>(end - start);
      adam.apply(model, ws.grad, cfg);
    }
    const double epoch_loss = weighted / static_cast<double>(order.size());
    if (!std::isfinite(epoch_loss)) {
      throw NumericError("training diverged at epoch " + std::to_string(epoch + 1));
    }
    history.train_loss.push_back(epoch_loss);

    if (!val_rows.empty()) {
      const double val = loss_over(val_rows);
      if (!std::isfinite(val)) {
        throw NumericError("validation loss non-finite at epoch " +
                           std::to_string(epoch + 1));
      }
      history.validation_loss.push_back(val);
      if (val < best_val) {
        best_val = val;
        best = model;
        history.best_epoch = epoch;
        since_best = 0;
      } else if (++since_best >= *cfg.early_stop_patience) {
        break;
      }
    }
  }
  if (!val_rows.empty()) model = std::move(best);
  return {std::move(model), std::move(history)};
}

inline void validate(const TrainConfig& cfg) {
  if (cfg.epochs < 1) throw ValidationError("epochs must be >= 1");
  if (cfg.batch_size < 1) throw ValidationError("batch_size must be >= 1");
  if (!(cfg.learning_rate >= 0.0) || !std::isfinite(cfg.learning_rate)) {
    throw ValidationError("learning_rate must be finite and >= 0");
  }
  if (!(cfg.beta1 > 0.0 && cfg.beta1 < 1.0) || !(cfg.beta2 > 0.0 && cfg.beta2 < 1.0)) {
    throw ValidationError("moment decays must lie in (0, 1)");
  }
  if (cfg.early_stop_patience && *cfg.early_stop_patience < 1) {
    throw ValidationError("early_stop_patience must be >= 1");
  }
  if (!(cfg.validation_fraction >= 0.0 && cfg.validation_fraction < 1.0)) {
    throw ValidationError("validation_fraction must lie in [0, 1)");
  }
}

template <typename Scalar>
std::string mlp_to_json(const MlpModel<Scalar>& model) {
  using nlohmann::json;
  json layers = json::array();
  for (std::size_t l = 0; l < model.n_layers(); ++l) {
    const auto& w = model.weights[l];
    std::vector<Scalar> flat;  // row-major
    flat.reserve(static_cast<std::size_t>(w.size()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) flat.push_back(w(i, j));
    }
    std::vector<Scalar> bias(model.biases[l].data(),
                             model.biases[l].data() + model.biases[l].size());
    layers.push_back({{"weights", flat}, {"biases", bias}});
  }
  json doc{{"layer_dims", model.layer_dims},
           {"hidden_activation", "relu"},
           {"output_activation", "identity"},
           {"target_standardized", model.target_standardized},
           {"target_mean", model.target_mean},
           {"target_sd", model.target_sd},
           {"layers", layers}};
  return doc.dump() + "\n";
}

template <typename Scalar = double>
MlpModel<Scalar> mlp_from_json(std::string_view text) {
  using nlohmann::json;
  try {
    const json doc = json::parse(text);
    MlpModel<Scalar> model;
    model.layer_dims = doc.at("layer_dims").get<std::vector<Eigen::Index>>();
    model.target_standardized = doc.at("target_standardized").get<bool>();
    model.target_mean = doc.at("target_mean").get<Scalar>();
    model.target_sd = doc.at("target_sd").get<Scalar>();
    const auto& layers = doc.at("layers");
    if (model.layer_dims.size() < 2 || model.layer_dims.back() != 1 ||
        layers.size() + 1 != model.layer_dims.size()) {
      throw ValidationError("checkpoint layer structure is inconsistent");
    }
    for (std::size_t l = 0; l < layers.size(); ++l) {
      const auto rows = model.layer_dims[l + 1];
      const auto cols = model.layer_dims[l];
      const auto flat = layers[l].at("weights").get<std::vector<Scalar>>();
      const auto bias = layers[l].at("biases").get<std::vector<Scalar>>();
      if (static_cast<Eigen::Index>(flat.size()) != rows * cols ||
          static_cast<Eigen::Index>(bias.size()) != rows) {
        throw ValidationError("checkpoint layer " + std::to_string(l) +
                              " has the wrong parameter count");
      }
      typename MlpModel<Scalar>::MatrixType w(rows, cols);
      for (Eigen::Index i = 0; i < rows; ++i) {
        for (Eigen::Index j = 0; j < cols; ++j) {
          w(i, j) = flat[static_cast<std::size_t>(i * cols + j)];
        }
      }
      model.weights.push_back(std::move(w));
      model.biases.push_back(
          Eigen::Map<const typename MlpModel<Scalar>::VectorType>(bias.data(), rows));
    }
    return model;
  } catch (const json::exception& e) {
    throw ValidationError(std::string("malformed model checkpoint: ") + e.what());
  }
}

}  // namespace ruleflow
