#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "shiftcp/auxiliary.hpp"
#include "shiftcp/bounds.hpp"
#include "shiftcp/empirical.hpp"

namespace shiftcp {

// Overflow-safe softmax (max subtraction).
std::vector<double> softmax(std::span<const double> logits);

// Calibration weights parameterized by unconstrained log-weights; the
// simplex weights are their softmax.
class SimplexWeights {
 public:
  static SimplexWeights uniform(std::size_t n);
  explicit SimplexWeights(std::vector<double> log_weights);

  std::span<const double> log_weights() const noexcept { return log_weights_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return weights_.size(); }

 private:
  std::vector<double> log_weights_;
  std::vector<double> weights_;
};

struct OptimizerConfig {
  std::size_t steps = 1000;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon_adam = 1e-8;
  Flavor flavor = Flavor::kWeightedCdf;
  Estimator estimator = Estimator::kGrid;
  std::size_t grid_size = kDefaultGridSize;
  // Fixed KDE bandwidth. When empty, Silverman's rule at uniform weights.
  std::optional<double> bandwidth;
  // Recompute the Silverman bandwidth from the current weights on every
  // evaluation. The gradient then ignores the bandwidth's dependence on the
  // weights.
  bool refit_bandwidth = false;
  std::uint64_t seed = 42;
  bool record_trace = true;

  // Throws ValidationError for steps == 0, learning_rate <= 0, betas
  // outside (0, 1), epsilon_adam <= 0 or grid_size < 2.
  void validate() const;
  BoundOptions bound_options() const { return {flavor, estimator, grid_size}; }
};

// The unlabeled coverage-gap bound as a function of calibration weights,
// with everything that does not depend on the weights precomputed: the
// sorted score order, the step-function segments, and the KDE kernel matrix
// on the grid.
class BoundObjective {
 public:
  BoundObjective(std::span<const double> cal_scores, AuxiliaryPair pair,
                 const OptimizerConfig& config);

  std::size_t size() const noexcept { return scores_.size(); }
  double bandwidth() const noexcept { return bandwidth_; }
  const AuxiliaryPair& pair() const noexcept { return pair_; }

  double value(const SimplexWeights& w) const;
  // Returns the value and writes the gradient with respect to the
  // log-weights. Subgradient conventions: sign(0) = 0 for CDF ties and the
  // first grid argmax for the maximum density.
  double value_and_gradient(const SimplexWeights& w, std::vector<double>& gradient) const;

  // The weighted calibration distribution under w.
  WeightedEmpirical distribution(const SimplexWeights& w) const;

 private:
  struct Segment {
    double length;
    double upper_cdf;
    double lower_cdf;
    std::size_t cal_count;  // calibration atoms <= segment interior
    std::size_t cell;       // grid cell containing the segment
  };

  double evaluate(const SimplexWeights& w, std::vector<double>* gradient) const;
  std::vector<double> kernel_matrix(double bandwidth) const;

  std::vector<double> scores_;
  AuxiliaryPair pair_;
  OptimizerConfig config_;
  double bandwidth_ = 0.0;
  std::vector<std::size_t> order_;           // indices sorting scores_
  std::vector<Segment> segments_;
  std::vector<std::size_t> first_segment_;   // per score: first segment at or right of it
  std::vector<std::size_t> cal_lower_rank_;  // per score: sorted atoms strictly below it
  std::vector<std::size_t> cal_upper_rank_;  // per score: sorted atoms <= it
  std::vector<double> upper_at_score_;
  std::vector<double> lower_at_score_;
  std::vector<double> kernel_;               // grid_size x n, row-major
};

// Free-function forms; each builds a BoundObjective.
double objective(const SimplexWeights& w, std::span<const double> cal_scores,
                 const AuxiliaryPair& pair, const OptimizerConfig& config);
std::vector<double> gradient(const SimplexWeights& w, std::span<const double> cal_scores,
                             const AuxiliaryPair& pair, const OptimizerConfig& config);

struct LearnResult {
  SimplexWeights weights;
  // Objective before each Adam step (empty unless record_trace).
  std::vector<double> trace;
  double bandwidth = 0.0;
};

// Adam on the log-weights from the uniform start, full batch, for
// config.steps iterations.
LearnResult learn_weights(std::span<const double> cal_scores, const AuxiliaryPair& pair,
                          const OptimizerConfig& config);
// Same, from a given starting point.
LearnResult learn_weights(std::span<const double> cal_scores, const AuxiliaryPair& pair,
                          const OptimizerConfig& config, SimplexWeights initial);

}  // namespace shiftcp
