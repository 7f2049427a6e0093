#pragma once

#include <array>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "shiftcp/auxiliary.hpp"
#include "shiftcp/empirical.hpp"

namespace shiftcp {

// Methods that can be named on the command line.
enum class Method { kUncorrected, kOptimal, kTrueLr, kEcp, kOtMinMax, kOtFu };

std::string_view to_string(Method method);
// Accepts "uncorrected", "optimal", "true-lr", "ecp", "ot-minmax", "ot-fu".
std::optional<Method> parse_method(std::string_view name);
std::span<const Method> all_methods();

// Standard split CP: uniform weights on the calibration scores.
WeightedEmpirical uncorrected(std::span<const double> cal_scores);

// Calibrate on held-out labeled test-distribution scores.
WeightedEmpirical oracle(std::span<const double> test_labeled_scores);

// Exponential tilt of the synthetic regression task; exp(tilt . x) is the
// likelihood ratio dQ/dP there.
inline constexpr std::array<double, 4> kDefaultTilt = {-1.0, 0.5, -0.25, -0.1};

// Simplex-normalized exp(tilt . x_i) over the calibration inputs.
std::vector<double> true_lr_weights(std::span<const std::array<double, 4>> cal_inputs,
                                    const std::array<double, 4>& tilt = kDefaultTilt);

// Shannon entropy (natural log) of a probability vector; 0 log 0 = 0.
double entropy(std::span<const double> probabilities);

// Entropy-scaled CP threshold: the calibration threshold divided by
// max(1, u), u the 1 - alpha quantile of the test rows' prediction entropies.
// Requires model probabilities on the test matrix.
double ecp_threshold(const WeightedEmpirical& cal, const ScoreMatrix& test_probs, double alpha,
                     QuantileConvention convention = QuantileConvention::kConformal);

}  // namespace shiftcp
