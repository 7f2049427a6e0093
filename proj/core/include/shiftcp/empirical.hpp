#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace shiftcp {

// A finite distribution over nonconformity scores in [0, 1].
//
// Atoms are stored sorted by score with co-sorted probability weights.
// Duplicate scores stay separate atoms; CDF arithmetic does not care and the
// reweighting code relies on a one-to-one mapping between atoms and samples.
class WeightedEmpirical {
 public:
  // Builds the distribution from raw scores. Missing weights mean uniform
  // 1/n; supplied weights are renormalized to sum to one. Throws
  // ValidationError on empty input, a score outside [0, 1], a negative or
  // non-finite weight, a length mismatch or an all-zero weight vector.
  static WeightedEmpirical from_scores(
      std::span<const double> scores,
      std::optional<std::span<const double>> weights = std::nullopt);

  std::span<const double> support() const noexcept { return support_; }
  std::span<const double> weights() const noexcept { return weights_; }
  // Running sums of weights; the last entry is exactly 1.
  std::span<const double> cumulative() const noexcept { return cumulative_; }
  std::size_t size() const noexcept { return support_.size(); }

  // True when every atom carries the same weight.
  bool is_uniform() const noexcept { return uniform_; }

  double min() const noexcept { return support_.front(); }
  double max() const noexcept { return support_.back(); }

 private:
  WeightedEmpirical() = default;

  std::vector<double> support_;
  std::vector<double> weights_;
  std::vector<double> cumulative_;
  bool uniform_ = true;
};

enum class QuantileConvention {
  kPlain,      // inf{s : F(s) >= level}
  kConformal,  // ceil((n + 1) * level)-th order statistic, uniform weights only
};

// Right-continuous CDF: sum of weights of atoms <= t.
double cdf_at(const WeightedEmpirical& dist, double t);

// The convention quantile() will actually apply. Weighted distributions
// always fall back to kPlain.
QuantileConvention effective_convention(const WeightedEmpirical& dist,
                                        QuantileConvention requested);

// Throws ValidationError when level is outside [0, 1].
double quantile(const WeightedEmpirical& dist, double level,
                QuantileConvention convention);

// Exact 1-Wasserstein distance, the integral of |F_p - F_q|.
double w1(const WeightedEmpirical& p, const WeightedEmpirical& q);

inline constexpr double kDefaultDominanceTolerance = 1e-9;

// First-order stochastic dominance a >= b, i.e. F_a(t) <= F_b(t) + tol for
// every t. Both CDFs are step functions, so checking the merged support is
// exhaustive.
bool dominates(const WeightedEmpirical& a, const WeightedEmpirical& b,
               double tol = kDefaultDominanceTolerance);

double mean(const WeightedEmpirical& dist);

// Half-width of the DKW band that holds with probability 1 - d:
// sqrt(log(2 / d) / (2 n)).
double dkw_epsilon(double n_effective, double d);

struct DkwBand {
  double epsilon = 0.0;
  double confidence = 0.0;  // 1 - d
  double n_effective = 0.0;

  static DkwBand make(double n_effective, double d);
};

// Kish effective sample size 1 / sum(w_i^2) for weights on the simplex.
double effective_sample_size(std::span<const double> weights);

// k i.i.d. draws from the atoms of dist, deterministic given seed.
std::vector<double> resample(const WeightedEmpirical& dist, std::size_t k,
                             std::uint64_t seed);

}  // namespace shiftcp
