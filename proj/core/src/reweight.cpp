#include "shiftcp/reweight.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "shiftcp/density.hpp"
#include "shiftcp/error.hpp"

namespace shiftcp {
namespace {

// CDF differences this small count as ties (zero subgradient).
constexpr double kTieTolerance = 1e-12;

double tie_sign(double x) {
  if (x > kTieTolerance) return 1.0;
  if (x < -kTieTolerance) return -1.0;
  return 0.0;
}

}  // namespace

std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    total += out[i];
  }
  for (double& v : out) v /= total;
  return out;
}

SimplexWeights SimplexWeights::uniform(std::size_t n) {
  return SimplexWeights(std::vector<double>(n, 0.0));
}

SimplexWeights::SimplexWeights(std::vector<double> log_weights)
    : log_weights_(std::move(log_weights)), weights_(softmax(log_weights_)) {
  for (double v : log_weights_) {
    if (!std::isfinite(v)) throw ValidationError("log-weights must be finite");
  }
}

void OptimizerConfig::validate() const {
  if (steps == 0) throw ValidationError("optimizer needs at least one step");
  if (!(learning_rate > 0.0)) throw ValidationError("learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0) || !(beta2 > 0.0 && beta2 < 1.0)) {
    throw ValidationError("Adam betas must lie in (0, 1)");
  }
  if (!(epsilon_adam > 0.0)) throw ValidationError("Adam epsilon must be positive");
  if (grid_size < 2) throw ValidationError("grid size must be at least 2");
  if (bandwidth && !(*bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
}

BoundObjective::BoundObjective(std::span<const double> cal_scores, AuxiliaryPair pair,
                               const OptimizerConfig& config)
    : scores_(cal_scores.begin(), cal_scores.end()),
      pair_(std::move(pair)),
      config_(config) {
  config_.validate();
  if (scores_.empty()) throw ValidationError("objective needs calibration scores");
  for (double s : scores_) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("calibration scores must lie in [0, 1]");
  }
  const std::size_t n = scores_.size();
  const std::vector<double> uniform(n, 1.0 / static_cast<double>(n));
  bandwidth_ = config_.bandwidth ? *config_.bandwidth : silverman_bandwidth(scores_, uniform);

  order_.resize(n);
  std::iota(order_.begin(), order_.end(), std::size_t{0});
  std::stable_sort(order_.begin(), order_.end(),
                   [&](std::size_t a, std::size_t b) { return scores_[a] < scores_[b]; });
  std::vector<double> sorted(n);
  for (std::size_t t = 0; t < n; ++t) sorted[t] = scores_[order_[t]];

  const std::size_t grid_size = config_.grid_size;
  const double step = 1.0 / static_cast<double>(grid_size - 1);
  std::vector<double> breaks = {0.0, 1.0};
  breaks.insert(breaks.end(), scores_.begin(), scores_.end());
  breaks.insert(breaks.end(), pair_.upper.support().begin(), pair_.upper.support().end());
  breaks.insert(breaks.end(), pair_.lower.support().begin(), pair_.lower.support().end());
  if (config_.flavor == Flavor::kWeightedCdf && config_.estimator == Estimator::kGrid) {
    for (std::size_t k = 0; k + 1 < grid_size; ++k) {
      breaks.push_back((static_cast<double>(k) + 0.5) * step);
    }
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  segments_.reserve(breaks.size() - 1);
  for (std::size_t r = 0; r + 1 < breaks.size(); ++r) {
    const double mid = 0.5 * (breaks[r] + breaks[r + 1]);
    Segment seg;
    seg.length = breaks[r + 1] - breaks[r];
    seg.upper_cdf = cdf_at(pair_.upper, mid);
    seg.lower_cdf = cdf_at(pair_.lower, mid);
    seg.cal_count = static_cast<std::size_t>(
        std::upper_bound(sorted.begin(), sorted.end(), mid) - sorted.begin());
    seg.cell = std::min<std::size_t>(static_cast<std::size_t>(std::floor(mid / step + 0.5)),
                                     grid_size - 1);
    segments_.push_back(seg);
  }

  first_segment_.resize(n);
  cal_lower_rank_.resize(n);
  cal_upper_rank_.resize(n);
  upper_at_score_.resize(n);
  lower_at_score_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double s = scores_[i];
    first_segment_[i] = static_cast<std::size_t>(
        std::lower_bound(breaks.begin(), breaks.end(), s) - breaks.begin());
    cal_lower_rank_[i] = static_cast<std::size_t>(
        std::lower_bound(sorted.begin(), sorted.end(), s) - sorted.begin());
    cal_upper_rank_[i] = static_cast<std::size_t>(
        std::upper_bound(sorted.begin(), sorted.end(), s) - sorted.begin());
    upper_at_score_[i] = cdf_at(pair_.upper, s);
    lower_at_score_[i] = cdf_at(pair_.lower, s);
  }

  const bool needs_density =
      config_.flavor == Flavor::kW1 || config_.estimator == Estimator::kGrid;
  if (needs_density && !config_.refit_bandwidth) kernel_ = kernel_matrix(bandwidth_);
}

std::vector<double> BoundObjective::kernel_matrix(double bandwidth) const {
  const auto grid = uniform_grid(config_.grid_size);
  const std::size_t n = scores_.size();
  std::vector<double> kernel(grid.size() * n);
  for (std::size_t k = 0; k < grid.size(); ++k) {
    for (std::size_t i = 0; i < n; ++i) {
      kernel[k * n + i] = reflected_kernel(grid[k], scores_[i], bandwidth);
    }
  }
  return kernel;
}

WeightedEmpirical BoundObjective::distribution(const SimplexWeights& w) const {
  return WeightedEmpirical::from_scores(scores_, w.weights());
}

double BoundObjective::value(const SimplexWeights& w) const { return evaluate(w, nullptr); }

double BoundObjective::value_and_gradient(const SimplexWeights& w,
                                          std::vector<double>& gradient) const {
  return evaluate(w, &gradient);
}

double BoundObjective::evaluate(const SimplexWeights& w, std::vector<double>* gradient) const {
  const std::size_t n = scores_.size();
  if (w.size() != n) {
    throw ValidationError("weights length " + std::to_string(w.size()) +
                          " does not match " + std::to_string(n) + " calibration scores");
  }
  const auto weights = w.weights();

  // Weighted CDF at sorted rank c is prefix[c].
  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t t = 0; t < n; ++t) prefix[t + 1] = prefix[t] + weights[order_[t]];

  std::vector<double> raw;  // d value / d w_i
  if (gradient) raw.assign(n, 0.0);

  if (config_.flavor == Flavor::kWeightedCdf && config_.estimator == Estimator::kExpectation) {
    std::vector<double> sign(n);
    double value = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double fw = prefix[cal_upper_rank_[i]];
      const double du = fw - upper_at_score_[i];
      const double dl = fw - lower_at_score_[i];
      const double h = 0.5 * (std::abs(du) + std::abs(dl) + lower_at_score_[i] - upper_at_score_[i]);
      value += weights[i] * h;
      sign[i] = 0.5 * (tie_sign(du) + tie_sign(dl));
      if (gradient) raw[i] = h;
    }
    if (!gradient) return value;
    // d/dw_j sum_i w_i h_i picks up w_i * sign_i for every atom i >= s_j.
    std::vector<double> suffix(n + 1, 0.0);
    for (std::size_t t = n; t-- > 0;) {
      const std::size_t i = order_[t];
      suffix[t] = suffix[t + 1] + weights[i] * sign[i];
    }
    for (std::size_t j = 0; j < n; ++j) raw[j] += suffix[cal_lower_rank_[j]];
    const double centered = std::inner_product(weights.begin(), weights.end(), raw.begin(), 0.0);
    gradient->resize(n);
    for (std::size_t j = 0; j < n; ++j) (*gradient)[j] = weights[j] * (raw[j] - centered);
    return value;
  }

  std::vector<double> local_kernel;
  const std::vector<double>* kernel = &kernel_;
  if (config_.refit_bandwidth) {
    local_kernel = kernel_matrix(silverman_bandwidth(scores_, weights));
    kernel = &local_kernel;
  }
  const std::size_t grid_size = config_.grid_size;
  std::vector<double> density(grid_size, 0.0);
  for (std::size_t k = 0; k < grid_size; ++k) {
    const double* row = kernel->data() + k * n;
    density[k] = std::inner_product(row, row + n, weights.begin(), 0.0);
  }

  // Integrand h and its sign weight on every segment.
  const std::size_t segments = segments_.size();
  std::vector<double> sign(segments);
  std::vector<double> cells(grid_size, 0.0);
  double integral = 0.0;
  for (std::size_t r = 0; r < segments; ++r) {
    const Segment& seg = segments_[r];
    const double fw = prefix[seg.cal_count];
    const double du = fw - seg.upper_cdf;
    const double dl = fw - seg.lower_cdf;
    const double h = 0.5 * (std::abs(du) + std::abs(dl) + seg.lower_cdf - seg.upper_cdf);
    cells[seg.cell] += h * seg.length;
    integral += h * seg.length;
    sign[r] = 0.5 * (tie_sign(du) + tie_sign(dl));
  }

  double value = 0.0;
  std::vector<double> segment_scale(segments);
  if (config_.flavor == Flavor::kW1) {
    const auto top = std::max_element(density.begin(), density.end());
    const auto argmax = static_cast<std::size_t>(top - density.begin());
    value = *top * integral;
    std::fill(segment_scale.begin(), segment_scale.end(), *top);
    if (gradient) {
      const double* row = kernel->data() + argmax * n;
      for (std::size_t i = 0; i < n; ++i) raw[i] = row[i] * integral;
    }
  } else {
    for (std::size_t k = 0; k < grid_size; ++k) value += density[k] * cells[k];
    for (std::size_t r = 0; r < segments; ++r) segment_scale[r] = density[segments_[r].cell];
    if (gradient) {
      for (std::size_t k = 0; k < grid_size; ++k) {
        if (cells[k] == 0.0) continue;
        const double* row = kernel->data() + k * n;
        for (std::size_t i = 0; i < n; ++i) raw[i] += row[i] * cells[k];
      }
    }
  }
  if (!gradient) return value;

  // d/dw_i of the CDF part: integral over t >= s_i of scale * sign.
  std::vector<double> suffix(segments + 1, 0.0);
  for (std::size_t r = segments; r-- > 0;) {
    suffix[r] = suffix[r + 1] + segment_scale[r] * sign[r] * segments_[r].length;
  }
  for (std::size_t i = 0; i < n; ++i) raw[i] += suffix[first_segment_[i]];

  const double centered = std::inner_product(weights.begin(), weights.end(), raw.begin(), 0.0);
  gradient->resize(n);
  for (std::size_t j = 0; j < n; ++j) (*gradient)[j] = weights[j] * (raw[j] - centered);
  return value;
}

double objective(const SimplexWeights& w, std::span<const double> cal_scores,
                 const AuxiliaryPair& pair, const OptimizerConfig& config) {
  return BoundObjective(cal_scores, pair, config).value(w);
}

std::vector<double> gradient(const SimplexWeights& w, std::span<const double> cal_scores,
                             const AuxiliaryPair& pair, const OptimizerConfig& config) {
  std::vector<double> grad;
  BoundObjective(cal_scores, pair, config).value_and_gradient(w, grad);
  return grad;
}

LearnResult learn_weights(std::span<const double> cal_scores, const AuxiliaryPair& pair,
                          const OptimizerConfig& config) {
  return learn_weights(cal_scores, pair, config, SimplexWeights::uniform(cal_scores.size()));
}

LearnResult learn_weights(std::span<const double> cal_scores, const AuxiliaryPair& pair,
                          const OptimizerConfig& config, SimplexWeights initial) {
  if (cal_scores.size() < 2) throw ValidationError("learning weights needs at least two scores");
  const BoundObjective objective(cal_scores, pair, config);
  const std::size_t n = cal_scores.size();
  if (initial.size() != n) throw ValidationError("initial weights length mismatch");

  std::vector<double> theta(initial.log_weights().begin(), initial.log_weights().end());
  std::vector<double> first_moment(n, 0.0);
  std::vector<double> second_moment(n, 0.0);
  std::vector<double> grad;
  LearnResult result{std::move(initial), {}, objective.bandwidth()};
  if (config.record_trace) result.trace.reserve(config.steps);

  double beta1_power = 1.0;
  double beta2_power = 1.0;
  for (std::size_t step = 0; step < config.steps; ++step) {
    const double value = objective.value_and_gradient(result.weights, grad);
    if (config.record_trace) result.trace.push_back(value);
    beta1_power *= config.beta1;
    beta2_power *= config.beta2;
    for (std::size_t i = 0; i < n; ++i) {
      first_moment[i] = config.beta1 * first_moment[i] + (1.0 - config.beta1) * grad[i];
      second_moment[i] = config.beta2 * second_moment[i] + (1.0 - config.beta2) * grad[i] * grad[i];
      const double m_hat = first_moment[i] / (1.0 - beta1_power);
      const double v_hat = second_moment[i] / (1.0 - beta2_power);
      theta[i] -= config.learning_rate * m_hat / (std::sqrt(v_hat) + config.epsilon_adam);
    }
    result.weights = SimplexWeights(theta);
  }
  return result;
}

}  // namespace shiftcp
