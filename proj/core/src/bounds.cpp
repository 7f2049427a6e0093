#include "shiftcp/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <stdexcept>

#include "shiftcp/error.hpp"

namespace shiftcp {
namespace {

// Integrand of the bound as a function of the calibration CDF and the
// target CDF(s) at a point.
using Integrand = std::function<double(double t)>;

// Per-cell integrals of a step function over [0, 1]. Cell k is
// [g_k - step/2, g_k + step/2] clipped to [0, 1]. The integrand only changes
// at atoms of the involved distributions, so evaluating it at segment
// midpoints between consecutive breakpoints is exact.
std::vector<double> cell_integrals(const Integrand& integrand,
                                   std::span<const WeightedEmpirical* const> dists,
                                   std::size_t grid_size) {
  const double step = 1.0 / static_cast<double>(grid_size - 1);
  std::vector<double> breaks;
  breaks.reserve(grid_size + 2);
  breaks.push_back(0.0);
  breaks.push_back(1.0);
  for (std::size_t k = 0; k + 1 < grid_size; ++k) {
    breaks.push_back((static_cast<double>(k) + 0.5) * step);
  }
  for (const auto* dist : dists) {
    breaks.insert(breaks.end(), dist->support().begin(), dist->support().end());
  }
  std::sort(breaks.begin(), breaks.end());
  breaks.erase(std::unique(breaks.begin(), breaks.end()), breaks.end());

  std::vector<double> cells(grid_size, 0.0);
  for (std::size_t r = 0; r + 1 < breaks.size(); ++r) {
    const double a = breaks[r];
    const double b = breaks[r + 1];
    const double mid = 0.5 * (a + b);
    const auto k = std::min<std::size_t>(
        static_cast<std::size_t>(std::floor(mid / step + 0.5)), grid_size - 1);
    cells[k] += integrand(mid) * (b - a);
  }
  return cells;
}

double grid_estimate(const Integrand& integrand,
                     std::span<const WeightedEmpirical* const> dists,
                     const KdeDensity& kde, std::size_t grid_size,
                     std::map<std::string, double>& components) {
  const auto cells = cell_integrals(integrand, dists, grid_size);
  const auto grid = uniform_grid(grid_size);
  double total = 0.0;
  double unweighted = 0.0;
  for (std::size_t k = 0; k < grid_size; ++k) {
    total += kde.density_at(grid[k]) * cells[k];
    unweighted += cells[k];
  }
  components["cdf_integral"] = unweighted;
  return total;
}

double expectation_estimate(const Integrand& integrand, const WeightedEmpirical& p) {
  double total = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    total += p.weights()[i] * integrand(p.support()[i]);
  }
  return total;
}

BoundReport base_report(const KdeDensity& kde, const BoundOptions& options, bool labeled) {
  if (options.grid_size < 2) throw ValidationError("grid size must be at least 2");
  BoundReport report;
  report.flavor = options.flavor;
  report.estimator = options.estimator;
  report.grid_size = options.grid_size;
  report.labeled = labeled;
  report.max_density = max_density(kde, options.grid_size).value;
  report.bandwidth = kde.bandwidth();
  return report;
}

}  // namespace

std::string_view to_string(Flavor flavor) {
  return flavor == Flavor::kW1 ? "w1" : "weighted_cdf";
}

std::string_view to_string(Estimator estimator) {
  return estimator == Estimator::kGrid ? "grid" : "expectation";
}

BoundReport labeled_bound(const WeightedEmpirical& p, const WeightedEmpirical& q,
                          const KdeDensity& kde, const BoundOptions& options) {
  BoundReport report = base_report(kde, options, /*labeled=*/true);
  if (options.flavor == Flavor::kW1) {
    const double distance = w1(p, q);
    report.components["w1"] = distance;
    report.value = report.max_density * distance;
    return report;
  }
  const Integrand gap = [&](double t) { return std::abs(cdf_at(p, t) - cdf_at(q, t)); };
  if (options.estimator == Estimator::kGrid) {
    const WeightedEmpirical* dists[] = {&p, &q};
    report.value = grid_estimate(gap, dists, kde, options.grid_size, report.components);
  } else {
    report.value = expectation_estimate(gap, p);
  }
  return report;
}

BoundReport unlabeled_bound(const WeightedEmpirical& p, const AuxiliaryPair& pair,
                            const KdeDensity& kde, const BoundOptions& options) {
  const double mean_gap = mean(pair.upper) - mean(pair.lower);
  if (pair.dominance_verified && mean_gap < -1e-12) {
    throw std::logic_error("auxiliary pair is marked dominant but mean(upper) < mean(lower)");
  }
  BoundReport report = base_report(kde, options, /*labeled=*/false);
  report.dominance_verified = pair.dominance_verified;
  report.components["mean_gap"] = mean_gap;

  if (options.flavor == Flavor::kW1) {
    const double to_upper = w1(p, pair.upper);
    const double to_lower = w1(p, pair.lower);
    report.components["w1_to_upper"] = to_upper;
    report.components["w1_to_lower"] = to_lower;
    report.value = 0.5 * report.max_density * (to_upper + to_lower + mean_gap);
    return report;
  }
  const Integrand sandwich = [&](double t) {
    const double fp = cdf_at(p, t);
    const double fu = cdf_at(pair.upper, t);
    const double fl = cdf_at(pair.lower, t);
    return 0.5 * (std::abs(fp - fu) + std::abs(fp - fl) + fl - fu);
  };
  if (options.estimator == Estimator::kGrid) {
    const WeightedEmpirical* dists[] = {&p, &pair.upper, &pair.lower};
    report.value = grid_estimate(sandwich, dists, kde, options.grid_size, report.components);
  } else {
    report.value = expectation_estimate(sandwich, p);
  }
  return report;
}

BoundReport dkw_correct(const BoundReport& report, double n, double m, double d) {
  BoundReport out = report;
  DkwCorrection correction;
  correction.calibration = DkwBand::make(n, d);
  correction.test = DkwBand::make(m, d);
  correction.raw_value = report.value;
  correction.corrected_value =
      report.value + correction.calibration.epsilon + correction.test.epsilon;
  out.dkw = correction;
  return out;
}

namespace {

template <typename Evaluate>
BoundReport corrected(const WeightedEmpirical& p, double bandwidth, double m, double d,
                      std::uint64_t seed, Evaluate evaluate) {
  if (p.is_uniform()) {
    const auto kde = KdeDensity::fit(p.support(), p.weights(), bandwidth);
    return dkw_correct(evaluate(p, kde), static_cast<double>(p.size()), m, d);
  }
  const double n_effective = effective_sample_size(p.weights());
  const auto k = static_cast<std::size_t>(std::max<long long>(1, std::llround(n_effective)));
  const auto draws = resample(p, k, seed);
  const auto sample = WeightedEmpirical::from_scores(draws);
  const auto kde = KdeDensity::fit(sample.support(), bandwidth);
  BoundReport out = dkw_correct(evaluate(sample, kde), n_effective, m, d);
  out.dkw->resampled = true;
  out.dkw->resample_size = k;
  return out;
}

}  // namespace

BoundReport dkw_corrected_bound(const WeightedEmpirical& p, const WeightedEmpirical& q,
                                double bandwidth, const BoundOptions& options, double d,
                                std::uint64_t seed) {
  return corrected(p, bandwidth, static_cast<double>(q.size()), d, seed,
                   [&](const WeightedEmpirical& sample, const KdeDensity& kde) {
                     return labeled_bound(sample, q, kde, options);
                   });
}

BoundReport dkw_corrected_bound(const WeightedEmpirical& p, const AuxiliaryPair& pair,
                                double bandwidth, const BoundOptions& options, double d,
                                std::uint64_t seed) {
  const double m = static_cast<double>(std::max(pair.lower.size(), pair.upper.size()));
  return corrected(p, bandwidth, m, d, seed,
                   [&](const WeightedEmpirical& sample, const KdeDensity& kde) {
                     return unlabeled_bound(sample, pair, kde, options);
                   });
}

double alpha_specific_bound(const WeightedEmpirical& p, const AuxiliaryPair& pair,
                            double alpha, std::size_t n_cal_draws, std::size_t n,
                            std::size_t m, double d, std::uint64_t seed) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (n_cal_draws == 0 || n == 0) throw ValidationError("need at least one calibration draw");
  std::mt19937_64 rng(seed);
  double total = 0.0;
  for (std::size_t draw = 0; draw < n_cal_draws; ++draw) {
    const auto sample = WeightedEmpirical::from_scores(resample(p, n, rng()));
    const double t = quantile(sample, 1.0 - alpha, QuantileConvention::kConformal);
    const double fp = cdf_at(p, t);
    const double fl = cdf_at(pair.lower, t);
    const double fu = cdf_at(pair.upper, t);
    total += 0.5 * (std::abs(fp - fl) + std::abs(fp - fu) + std::abs(fl - fu));
  }
  return total / static_cast<double>(n_cal_draws) +
         dkw_epsilon(static_cast<double>(n), d) + dkw_epsilon(static_cast<double>(m), d);
}

std::vector<double> default_alpha_grid() {
  std::vector<double> grid(99);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    grid[i] = static_cast<double>(i + 1) / 100.0;
  }
  return grid;
}

double empirical_coverage(std::span<const double> scores, double threshold) {
  if (scores.empty()) throw ValidationError("coverage needs at least one test score");
  const auto covered = std::count_if(scores.begin(), scores.end(),
                                     [&](double s) { return s <= threshold; });
  return static_cast<double>(covered) / static_cast<double>(scores.size());
}

double total_gap_empirical(const WeightedEmpirical& cal, std::span<const double> test_scores,
                           std::span<const double> alpha_grid) {
  if (test_scores.empty()) throw ValidationError("total gap needs test scores");
  if (alpha_grid.empty()) throw ValidationError("alpha grid is empty");
  std::vector<double> sorted(test_scores.begin(), test_scores.end());
  std::sort(sorted.begin(), sorted.end());
  double total = 0.0;
  for (double alpha : alpha_grid) {
    if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
    const double threshold = quantile(cal, 1.0 - alpha, QuantileConvention::kConformal);
    const auto covered = std::upper_bound(sorted.begin(), sorted.end(), threshold) - sorted.begin();
    const double coverage = static_cast<double>(covered) / static_cast<double>(sorted.size());
    total += std::abs((1.0 - alpha) - coverage);
  }
  return total / static_cast<double>(alpha_grid.size());
}

}  // namespace shiftcp
