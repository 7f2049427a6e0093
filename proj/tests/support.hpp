#pragma once

// Random instance generators and independent reference computations shared
// by the unit and acceptance tests. Nothing here calls into the code paths
// it is used to check.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "shiftcp/auxiliary.hpp"
#include "shiftcp/empirical.hpp"

namespace shiftcp::testing {

inline std::filesystem::path fixture_dir() { return SHIFTCP_FIXTURE_DIR; }
inline std::filesystem::path schema_dir() { return SHIFTCP_SCHEMA_DIR; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() /
            ("shiftcp-" + std::to_string(rd()) + "-" + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

inline std::vector<double> uniform_scores(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<double> s(n);
  for (double& v : s) v = u(rng);
  return s;
}

// Scores on a coarse lattice so ties and shared atoms are common.
inline std::vector<double> lattice_scores(std::mt19937_64& rng, std::size_t n, int levels = 20) {
  std::uniform_int_distribution<int> pick(0, levels);
  std::vector<double> s(n);
  for (double& v : s) v = static_cast<double>(pick(rng)) / levels;
  return s;
}

inline double beta_draw(std::mt19937_64& rng, double a, double b) {
  std::gamma_distribution<double> ga(a, 1.0);
  std::gamma_distribution<double> gb(b, 1.0);
  const double x = ga(rng);
  const double y = gb(rng);
  return x / (x + y);
}

inline std::vector<double> beta_scores(std::mt19937_64& rng, std::size_t n, double a, double b) {
  std::vector<double> s(n);
  for (double& v : s) v = beta_draw(rng, a, b);
  return s;
}

inline std::vector<double> positive_weights(std::mt19937_64& rng, std::size_t n) {
  std::uniform_real_distribution<double> u(0.05, 1.0);
  std::vector<double> w(n);
  for (double& v : w) v = u(rng);
  return w;
}

inline std::size_t draw_size(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

// Rows of model probabilities drawn from a symmetric Dirichlet; scores are
// one minus probability. Labels are drawn from the row probabilities.
struct LabeledMatrix {
  ScoreMatrix scores;
  std::vector<int> labels;
};

inline LabeledMatrix random_labeled_matrix(std::mt19937_64& rng, std::size_t rows,
                                           std::size_t cols, double concentration = 0.5) {
  std::gamma_distribution<double> g(concentration, 1.0);
  std::vector<double> probs(rows * cols);
  std::vector<double> scores(rows * cols);
  std::vector<int> labels(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] = g(rng) + 1e-12;
      total += probs[r * cols + c];
    }
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] /= total;
      scores[r * cols + c] = 1.0 - probs[r * cols + c];
    }
    std::discrete_distribution<int> pick(probs.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                         probs.begin() + static_cast<std::ptrdiff_t>((r + 1) * cols));
    labels[r] = pick(rng);
  }
  return {ScoreMatrix(rows, cols, std::move(scores), std::move(probs)), std::move(labels)};
}

// Exact optimal matching for equal-size uniform samples: co-sort and pair.
inline double matched_w1(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  double total = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) total += std::abs(a[i] - b[i]);
  return total / static_cast<double>(a.size());
}

// Quadratic-time CDF from raw (score, weight) lists; weights need not be
// normalized.
inline double naive_cdf(const std::vector<double>& s, const std::vector<double>& w, double t) {
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    den += w[i];
    if (s[i] <= t) num += w[i];
  }
  return num / den;
}

// Integral of |F_a - F_b| by summing over the gaps between all atoms, each
// CDF recomputed from scratch at every gap.
inline double naive_w1(const std::vector<double>& sa, const std::vector<double>& wa,
                       const std::vector<double>& sb, const std::vector<double>& wb) {
  std::vector<double> pts(sa);
  pts.insert(pts.end(), sb.begin(), sb.end());
  std::sort(pts.begin(), pts.end());
  double total = 0.0;
  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double width = pts[i + 1] - pts[i];
    if (width <= 0.0) continue;
    total += width * std::abs(naive_cdf(sa, wa, pts[i]) - naive_cdf(sb, wb, pts[i]));
  }
  return total;
}

inline double normal_pdf(double x, double h) {
  return std::exp(-0.5 * (x / h) * (x / h)) / (h * std::sqrt(2.0 * M_PI));
}

// Two-sample Kolmogorov-Smirnov statistic.
inline double ks_statistic(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0;
  std::size_t j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double t = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= t) ++i;
    while (j < b.size() && b[j] <= t) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / a.size() - static_cast<double>(j) / b.size()));
  }
  return d;
}

}  // namespace shiftcp::testing
