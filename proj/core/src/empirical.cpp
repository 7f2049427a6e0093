#include "shiftcp/empirical.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "shiftcp/error.hpp"

namespace shiftcp {
namespace {

// Slack for comparing running sums of weights against a target level.
constexpr double kLevelSlack = 1e-12;

}  // namespace

WeightedEmpirical WeightedEmpirical::from_scores(
    std::span<const double> scores,
    std::optional<std::span<const double>> weights) {
  const std::size_t n = scores.size();
  if (n == 0) throw ValidationError("empirical distribution needs at least one score");
  for (std::size_t i = 0; i < n; ++i) {
    const double s = scores[i];
    if (!std::isfinite(s) || s < 0.0 || s > 1.0) {
      throw ValidationError("score " + std::to_string(s) + " at index " +
                            std::to_string(i) + " is outside [0, 1]");
    }
  }

  std::vector<double> raw(n, 1.0);
  bool uniform = true;
  if (weights) {
    if (weights->size() != n) {
      throw ValidationError("weights length " + std::to_string(weights->size()) +
                            " does not match scores length " + std::to_string(n));
    }
    for (std::size_t i = 0; i < n; ++i) {
      const double w = (*weights)[i];
      if (!std::isfinite(w) || w < 0.0) {
        throw ValidationError("weight at index " + std::to_string(i) +
                              " is negative or not finite");
      }
      raw[i] = w;
    }
    const auto [lo, hi] = std::minmax_element(raw.begin(), raw.end());
    uniform = (*hi - *lo) <= 1e-15 * *hi;
  }
  const double total = std::accumulate(raw.begin(), raw.end(), 0.0);
  if (!(total > 0.0)) throw ValidationError("weights sum to zero");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  WeightedEmpirical dist;
  dist.uniform_ = uniform;
  dist.support_.resize(n);
  dist.weights_.resize(n);
  dist.cumulative_.resize(n);
  double running = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    dist.support_[i] = scores[order[i]];
    dist.weights_[i] = uniform ? 1.0 / static_cast<double>(n) : raw[order[i]] / total;
    running += dist.weights_[i];
    dist.cumulative_[i] = running;
  }
  dist.cumulative_.back() = 1.0;
  return dist;
}

double cdf_at(const WeightedEmpirical& dist, double t) {
  const auto support = dist.support();
  const auto it = std::upper_bound(support.begin(), support.end(), t);
  if (it == support.begin()) return 0.0;
  return dist.cumulative()[static_cast<std::size_t>(it - support.begin()) - 1];
}

QuantileConvention effective_convention(const WeightedEmpirical& dist,
                                        QuantileConvention requested) {
  if (requested == QuantileConvention::kConformal && !dist.is_uniform()) {
    return QuantileConvention::kPlain;
  }
  return requested;
}

double quantile(const WeightedEmpirical& dist, double level,
                QuantileConvention convention) {
  if (!(level >= 0.0 && level <= 1.0)) {
    throw ValidationError("quantile level must lie in [0, 1]");
  }
  const auto support = dist.support();
  const std::size_t n = support.size();
  if (effective_convention(dist, convention) == QuantileConvention::kConformal) {
    const double position = static_cast<double>(n + 1) * level;
    // Guard against 10 * 0.9 landing a hair above 9.
    auto k = static_cast<std::size_t>(std::ceil(position - 1e-9));
    k = std::clamp<std::size_t>(k, 1, n);
    return support[k - 1];
  }
  const auto cumulative = dist.cumulative();
  const auto it = std::lower_bound(cumulative.begin(), cumulative.end(),
                                   level - kLevelSlack);
  const auto index = std::min<std::size_t>(
      static_cast<std::size_t>(it - cumulative.begin()), n - 1);
  return support[index];
}

double w1(const WeightedEmpirical& p, const WeightedEmpirical& q) {
  const auto ps = p.support();
  const auto qs = q.support();
  const auto pw = p.weights();
  const auto qw = q.weights();
  std::size_t i = 0;
  std::size_t j = 0;
  double fp = 0.0;
  double fq = 0.0;
  double total = 0.0;
  double position = std::min(ps.front(), qs.front());
  // Sweep the merged support; between consecutive breakpoints both CDFs are
  // constant.
  while (i < ps.size() || j < qs.size()) {
    const double next = (j >= qs.size() || (i < ps.size() && ps[i] <= qs[j])) ? ps[i] : qs[j];
    total += std::abs(fp - fq) * (next - position);
    position = next;
    while (i < ps.size() && ps[i] == next) fp += pw[i++];
    while (j < qs.size() && qs[j] == next) fq += qw[j++];
  }
  return total;
}

bool dominates(const WeightedEmpirical& a, const WeightedEmpirical& b, double tol) {
  const auto check = [&](double t) { return cdf_at(a, t) <= cdf_at(b, t) + tol; };
  return std::all_of(a.support().begin(), a.support().end(), check) &&
         std::all_of(b.support().begin(), b.support().end(), check);
}

double mean(const WeightedEmpirical& dist) {
  return std::inner_product(dist.support().begin(), dist.support().end(),
                            dist.weights().begin(), 0.0);
}

double dkw_epsilon(double n_effective, double d) {
  if (!(n_effective > 0.0)) throw ValidationError("DKW needs a positive sample size");
  if (!(d > 0.0 && d < 1.0)) throw ValidationError("DKW failure probability must lie in (0, 1)");
  return std::sqrt(std::log(2.0 / d) / (2.0 * n_effective));
}

DkwBand DkwBand::make(double n_effective, double d) {
  return DkwBand{dkw_epsilon(n_effective, d), 1.0 - d, n_effective};
}

double effective_sample_size(std::span<const double> weights) {
  double sum_sq = 0.0;
  for (double w : weights) sum_sq += w * w;
  return 1.0 / sum_sq;
}

std::vector<double> resample(const WeightedEmpirical& dist, std::size_t k,
                             std::uint64_t seed) {
  if (k == 0) throw ValidationError("resample size must be at least 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const auto cumulative = dist.cumulative();
  std::vector<double> draws(k);
  for (auto& draw : draws) {
    const double u = unit(rng);
    const auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
    const auto index = std::min<std::size_t>(
        static_cast<std::size_t>(it - cumulative.begin()), dist.size() - 1);
    draw = dist.support()[index];
  }
  return draws;
}

}  // namespace shiftcp
