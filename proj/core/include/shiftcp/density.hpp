#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace shiftcp {

inline constexpr std::size_t kDefaultGridSize = 512;
inline constexpr double kMinBandwidth = 1e-3;

// Gaussian kernel of scale h evaluated at x.
double gaussian_kernel(double x, double h);

// Gaussian kernel centered at c with one reflection about each boundary of
// [0, 1]; integrates to one over [0, 1] up to the mass beyond a second
// reflection.
double reflected_kernel(double t, double c, double h);

// Weighted Silverman bandwidth 1.06 * sigma_w * n_eff^(-1/5), floored at
// kMinBandwidth.
double silverman_bandwidth(std::span<const double> scores,
                           std::span<const double> weights);

// Weighted Gaussian KDE on [0, 1] with boundary reflection.
class KdeDensity {
 public:
  // weights must be on the simplex and match scores in length. Without a
  // bandwidth the weighted Silverman rule is used.
  static KdeDensity fit(std::span<const double> scores,
                        std::span<const double> weights,
                        std::optional<double> bandwidth = std::nullopt);

  // Uniform weights.
  static KdeDensity fit(std::span<const double> scores,
                        std::optional<double> bandwidth = std::nullopt);

  // Throws ValidationError for t outside [0, 1].
  double density_at(double t) const;

  std::span<const double> centers() const noexcept { return centers_; }
  std::span<const double> weights() const noexcept { return weights_; }
  double bandwidth() const noexcept { return bandwidth_; }
  // True when the bandwidth came from the Silverman rule.
  bool silverman() const noexcept { return silverman_; }

 private:
  KdeDensity() = default;

  std::vector<double> centers_;
  std::vector<double> weights_;
  double bandwidth_ = 0.0;
  bool silverman_ = false;
};

// K equally spaced points 0, 1/(K-1), ..., 1.
std::vector<double> uniform_grid(std::size_t grid_size);

struct MaxDensity {
  double value = 0.0;
  std::size_t argmax = 0;  // first maximizing grid index
  double location = 0.0;
};

// Maximum of the density over uniform_grid(grid_size). grid_size >= 2.
MaxDensity max_density(const KdeDensity& kde, std::size_t grid_size = kDefaultGridSize);

}  // namespace shiftcp
