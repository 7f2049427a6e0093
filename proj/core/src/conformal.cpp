#include "shiftcp/conformal.hpp"

#include <algorithm>
#include <cmath>

#include "shiftcp/bounds.hpp"
#include "shiftcp/error.hpp"

namespace shiftcp {

double threshold(const WeightedEmpirical& cal, double alpha, QuantileConvention convention) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  return quantile(cal, 1.0 - alpha, convention);
}

PredictionSet predict_set(std::span<const double> row_scores, double threshold) {
  PredictionSet set;
  set.threshold = threshold;
  for (std::size_t y = 0; y < row_scores.size(); ++y) {
    if (row_scores[y] <= threshold) set.classes.push_back(y);
  }
  return set;
}

CoverageReport evaluate_thresholds(const ScoreMatrix& test, std::span<const int> labels,
                                   std::span<const double> alpha_grid,
                                   std::span<const double> thresholds, std::string method) {
  if (alpha_grid.empty()) throw ValidationError("alpha grid is empty");
  if (thresholds.size() != alpha_grid.size()) {
    throw ValidationError("need one threshold per alpha");
  }
  if (test.rows() == 0) throw ValidationError("no test rows to evaluate");
  const auto true_scores = true_label_scores(test, labels);

  CoverageReport report;
  report.method = std::move(method);
  report.alpha_grid.assign(alpha_grid.begin(), alpha_grid.end());
  const auto rows = static_cast<double>(test.rows());
  double gap = 0.0;
  for (std::size_t a = 0; a < alpha_grid.size(); ++a) {
    const double alpha = alpha_grid[a];
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    const double t = thresholds[a];
    std::size_t covered = 0;
    std::size_t total_size = 0;
    for (std::size_t r = 0; r < test.rows(); ++r) {
      if (true_scores[r] <= t) ++covered;
      const auto row = test.row(r);
      total_size += static_cast<std::size_t>(
          std::count_if(row.begin(), row.end(), [&](double s) { return s <= t; }));
    }
    AlphaMetrics metrics;
    metrics.alpha = alpha;
    metrics.threshold = t;
    metrics.coverage = static_cast<double>(covered) / rows;
    metrics.mean_size = static_cast<double>(total_size) / rows;
    gap += std::abs((1.0 - alpha) - metrics.coverage);
    report.per_alpha.push_back(metrics);
  }
  report.total_gap = gap / static_cast<double>(alpha_grid.size());
  return report;
}

CoverageReport evaluate(const WeightedEmpirical& cal, const ScoreMatrix& test,
                        std::span<const int> labels, std::span<const double> alpha_grid,
                        QuantileConvention convention, std::string method) {
  std::vector<double> thresholds;
  thresholds.reserve(alpha_grid.size());
  for (double alpha : alpha_grid) thresholds.push_back(threshold(cal, alpha, convention));
  CoverageReport report =
      evaluate_thresholds(test, labels, alpha_grid, thresholds, std::move(method));
  report.convention = effective_convention(cal, convention);
  return report;
}

}  // namespace shiftcp
