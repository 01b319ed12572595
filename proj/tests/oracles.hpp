#pragma once
// Independent reference computations for tests. Nothing here calls into the
// library's numerical routines.

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

namespace oracle {

using Table = std::vector<std::vector<double>>;  // column-major: table[col][row]

/// Solves A x = b by Gauss-Jordan elimination with partial pivoting.
inline std::vector<double> solve(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t c = 0; c < n; ++c) {
    std::size_t piv = c;
    for (std::size_t r = c + 1; r < n; ++r) {
      if (std::abs(a[r][c]) > std::abs(a[piv][c])) piv = r;
    }
    std::swap(a[c], a[piv]);
    std::swap(b[c], b[piv]);
    for (std::size_t r = 0; r < n; ++r) {
      if (r == c) continue;
      const double f = a[r][c] / a[c][c];
      for (std::size_t k = c; k < n; ++k) a[r][k] -= f * a[c][k];
      b[r] -= f * b[c];
    }
  }
  for (std::size_t c = 0; c < n; ++c) b[c] /= a[c][c];
  return b;
}

/// VIF through normal equations of the intercept regression.
inline std::vector<double> vif(const Table& cols) {
  const std::size_t p = cols.size();
  const std::size_t n = cols[0].size();
  std::vector<double> out;
  for (std::size_t j = 0; j < p; ++j) {
    std::vector<std::vector<double>> x;  // design columns
    x.emplace_back(n, 1.0);
    for (std::size_t k = 0; k < p; ++k) {
      if (k != j) x.push_back(cols[k]);
    }
    const std::size_t q = x.size();
    std::vector<std::vector<double>> xtx(q, std::vector<double>(q, 0.0));
    std::vector<double> xty(q, 0.0);
    for (std::size_t a = 0; a < q; ++a) {
      for (std::size_t b = 0; b < q; ++b) {
        for (std::size_t i = 0; i < n; ++i) xtx[a][b] += x[a][i] * x[b][i];
      }
      for (std::size_t i = 0; i < n; ++i) xty[a] += x[a][i] * cols[j][i];
    }
    const auto beta = solve(xtx, xty);
    double mean = 0.0;
    for (double v : cols[j]) mean += v;
    mean /= static_cast<double>(n);
    double ss_tot = 0.0, ss_res = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double fit = 0.0;
      for (std::size_t a = 0; a < q; ++a) fit += beta[a] * x[a][i];
      ss_res += (cols[j][i] - fit) * (cols[j][i] - fit);
      ss_tot += (cols[j][i] - mean) * (cols[j][i] - mean);
    }
    out.push_back(1.0 / (1.0 - (1.0 - ss_res / ss_tot)));
  }
  return out;
}

/// Brute-force best single split on one feature: every midpoint threshold,
/// SSE computed from scratch on each side.
struct Split {
  double threshold;
  double reduction;
};

inline double sse(const std::vector<double>& y) {
  if (y.empty()) return 0.0;
  double m = 0.0;
  for (double v : y) m += v;
  m /= static_cast<double>(y.size());
  double s = 0.0;
  for (double v : y) s += (v - m) * (v - m);
  return s;
}

inline Split best_split(const std::vector<double>& x, const std::vector<double>& y) {
  std::vector<double> sorted = x;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
  Split best{0.0, -1.0};
  for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
    const double t = (sorted[k] + sorted[k + 1]) / 2.0;
    std::vector<double> l, r;
    for (std::size_t i = 0; i < x.size(); ++i) (x[i] <= t ? l : r).push_back(y[i]);
    const double red = sse(y) - sse(l) - sse(r);
    if (red > best.reduction) best = {t, red};
  }
  return best;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / ("ruleflow_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::filesystem::path write_file(const std::filesystem::path& path,
                                        const std::string& text) {
  std::ofstream(path, std::ios::binary) << text;
  return path;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), {});
}

}  // namespace oracle
