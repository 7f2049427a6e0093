#include "shiftcp/density.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include "shiftcp/error.hpp"

namespace shiftcp {
namespace {

void check_simplex(std::span<const double> weights) {
  double total = 0.0;
  for (double w : weights) {
    if (!std::isfinite(w) || w < 0.0) throw ValidationError("KDE weights must be nonnegative");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw ValidationError("KDE weights must sum to one");
}

}  // namespace

double gaussian_kernel(double x, double h) {
  const double z = x / h;
  return std::exp(-0.5 * z * z) / (h * std::sqrt(2.0 * std::numbers::pi));
}

double reflected_kernel(double t, double c, double h) {
  return gaussian_kernel(t - c, h) + gaussian_kernel(t + c, h) +
         gaussian_kernel(t - (2.0 - c), h);
}

double silverman_bandwidth(std::span<const double> scores,
                           std::span<const double> weights) {
  double mu = 0.0;
  double sum_sq = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    mu += weights[i] * scores[i];
    sum_sq += weights[i] * weights[i];
  }
  double var = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double d = scores[i] - mu;
    var += weights[i] * d * d;
  }
  const double n_eff = 1.0 / sum_sq;
  const double h = 1.06 * std::sqrt(var) * std::pow(n_eff, -0.2);
  return std::max(h, kMinBandwidth);
}

KdeDensity KdeDensity::fit(std::span<const double> scores,
                           std::span<const double> weights,
                           std::optional<double> bandwidth) {
  if (scores.empty()) throw ValidationError("KDE needs at least one score");
  if (weights.size() != scores.size()) {
    throw ValidationError("KDE weights length does not match scores");
  }
  for (double s : scores) {
    if (!(s >= 0.0 && s <= 1.0)) throw ValidationError("KDE centers must lie in [0, 1]");
  }
  check_simplex(weights);
  if (bandwidth && !(*bandwidth > 0.0 && std::isfinite(*bandwidth))) {
    throw ValidationError("KDE bandwidth must be positive");
  }

  KdeDensity kde;
  kde.centers_.assign(scores.begin(), scores.end());
  kde.weights_.assign(weights.begin(), weights.end());
  kde.silverman_ = !bandwidth.has_value();
  kde.bandwidth_ = bandwidth ? *bandwidth : silverman_bandwidth(scores, weights);
  return kde;
}

KdeDensity KdeDensity::fit(std::span<const double> scores,
                           std::optional<double> bandwidth) {
  const std::vector<double> uniform(scores.size(),
                                    1.0 / static_cast<double>(scores.size()));
  return fit(scores, uniform, bandwidth);
}

double KdeDensity::density_at(double t) const {
  if (!(t >= 0.0 && t <= 1.0)) {
    throw ValidationError("density evaluated at " + std::to_string(t) +
                          ", outside [0, 1]");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < centers_.size(); ++i) {
    total += weights_[i] * reflected_kernel(t, centers_[i], bandwidth_);
  }
  return total;
}

std::vector<double> uniform_grid(std::size_t grid_size) {
  if (grid_size < 2) throw ValidationError("grid needs at least two points");
  std::vector<double> grid(grid_size);
  const double step = 1.0 / static_cast<double>(grid_size - 1);
  for (std::size_t k = 0; k < grid_size; ++k) grid[k] = static_cast<double>(k) * step;
  grid.back() = 1.0;
  return grid;
}

MaxDensity max_density(const KdeDensity& kde, std::size_t grid_size) {
  const auto grid = uniform_grid(grid_size);
  MaxDensity best{kde.density_at(grid[0]), 0, grid[0]};
  for (std::size_t k = 1; k < grid.size(); ++k) {
    const double value = kde.density_at(grid[k]);
    if (value > best.value) best = {value, k, grid[k]};
  }
  return best;
}

}  // namespace shiftcp
