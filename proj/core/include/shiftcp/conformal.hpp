#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "shiftcp/auxiliary.hpp"
#include "shiftcp/empirical.hpp"

namespace shiftcp {

struct PredictionSet {
  std::vector<std::size_t> classes;  // ascending
  double threshold = 0.0;
};

// The 1 - alpha quantile of the calibration scores. alpha in (0, 1).
double threshold(const WeightedEmpirical& cal, double alpha,
                 QuantileConvention convention = QuantileConvention::kConformal);

// Every class whose score is <= threshold. May be empty.
PredictionSet predict_set(std::span<const double> row_scores, double threshold);

struct AlphaMetrics {
  double alpha = 0.0;
  double threshold = 0.0;
  double coverage = 0.0;
  double mean_size = 0.0;
};

struct CoverageReport {
  std::vector<AlphaMetrics> per_alpha;
  double total_gap = 0.0;
  std::vector<double> alpha_grid;
  std::string method;
  QuantileConvention convention = QuantileConvention::kConformal;
};

// Coverage and mean set size on labeled test rows at each alpha, with
// thresholds from cal. Throws ValidationError on a label outside [0, K) or a
// labels/rows length mismatch.
CoverageReport evaluate(const WeightedEmpirical& cal, const ScoreMatrix& test,
                        std::span<const int> labels, std::span<const double> alpha_grid,
                        QuantileConvention convention = QuantileConvention::kConformal,
                        std::string method = "uncorrected");

// Same bookkeeping for externally chosen thresholds, one per alpha. The
// total gap is the mean of |(1 - alpha) - coverage|.
CoverageReport evaluate_thresholds(const ScoreMatrix& test, std::span<const int> labels,
                                   std::span<const double> alpha_grid,
                                   std::span<const double> thresholds, std::string method);

}  // namespace shiftcp
