#include "shiftcp/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "shiftcp/conformal.hpp"
#include "shiftcp/error.hpp"

namespace shiftcp {
namespace {

constexpr std::array<Method, 6> kMethods = {Method::kUncorrected, Method::kOptimal,
                                            Method::kTrueLr,      Method::kEcp,
                                            Method::kOtMinMax,    Method::kOtFu};

}  // namespace

std::string_view to_string(Method method) {
  switch (method) {
    case Method::kUncorrected: return "uncorrected";
    case Method::kOptimal: return "optimal";
    case Method::kTrueLr: return "true-lr";
    case Method::kEcp: return "ecp";
    case Method::kOtMinMax: return "ot-minmax";
    case Method::kOtFu: return "ot-fu";
  }
  return "unknown";
}

std::optional<Method> parse_method(std::string_view name) {
  for (Method m : kMethods) {
    if (to_string(m) == name) return m;
  }
  return std::nullopt;
}

std::span<const Method> all_methods() { return kMethods; }

WeightedEmpirical uncorrected(std::span<const double> cal_scores) {
  return WeightedEmpirical::from_scores(cal_scores);
}

WeightedEmpirical oracle(std::span<const double> test_labeled_scores) {
  if (test_labeled_scores.empty()) {
    throw ValidationError("the optimal baseline needs labeled test-distribution scores");
  }
  return WeightedEmpirical::from_scores(test_labeled_scores);
}

std::vector<double> true_lr_weights(std::span<const std::array<double, 4>> cal_inputs,
                                    const std::array<double, 4>& tilt) {
  if (cal_inputs.empty()) throw ValidationError("no calibration inputs");
  std::vector<double> log_ratio(cal_inputs.size());
  for (std::size_t i = 0; i < cal_inputs.size(); ++i) {
    double z = 0.0;
    for (std::size_t d = 0; d < 4; ++d) z += tilt[d] * cal_inputs[i][d];
    log_ratio[i] = z;
  }
  const double top = *std::max_element(log_ratio.begin(), log_ratio.end());
  double total = 0.0;
  for (double& v : log_ratio) {
    v = std::exp(v - top);
    total += v;
  }
  for (double& v : log_ratio) v /= total;
  return log_ratio;
}

double entropy(std::span<const double> probabilities) {
  double h = 0.0;
  for (double p : probabilities) {
    if (p > 0.0) h -= p * std::log(p);
  }
  return h;
}

double ecp_threshold(const WeightedEmpirical& cal, const ScoreMatrix& test_probs, double alpha,
                     QuantileConvention convention) {
  if (!test_probs.has_probabilities()) {
    throw ValidationError("ECP needs model probabilities for the test rows");
  }
  if (test_probs.rows() == 0) throw ValidationError("ECP needs at least one test row");
  const double base = threshold(cal, alpha, convention);
  std::vector<double> entropies(test_probs.rows());
  for (std::size_t r = 0; r < test_probs.rows(); ++r) {
    entropies[r] = entropy(test_probs.probability_row(r));
  }
  // Entropies can exceed 1 (up to log K) and WeightedEmpirical only holds
  // [0, 1] scores, so the order statistic is taken directly.
  std::sort(entropies.begin(), entropies.end());
  const auto n = entropies.size();
  std::size_t k;
  if (convention == QuantileConvention::kConformal) {
    k = static_cast<std::size_t>(std::ceil(static_cast<double>(n + 1) * (1.0 - alpha) - 1e-9));
  } else {
    k = static_cast<std::size_t>(std::ceil(static_cast<double>(n) * (1.0 - alpha) - 1e-9));
  }
  k = std::clamp<std::size_t>(k, 1, n);
  const double u = entropies[k - 1];
  return base / std::max(1.0, u);
}

}  // namespace shiftcp
