#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "shiftcp/auxiliary.hpp"
#include "shiftcp/density.hpp"
#include "shiftcp/empirical.hpp"

namespace shiftcp {

// Density-weighted CDF distance, or max density times W1.
enum class Flavor { kWeightedCdf, kW1 };

// How the density-weighted CDF integral is estimated. kGrid integrates the
// CDF gap exactly inside each cell of a uniform grid and weights each cell
// by the KDE at its grid point. kExpectation averages the gap over the atoms
// of the calibration distribution.
enum class Estimator { kGrid, kExpectation };

std::string_view to_string(Flavor flavor);
std::string_view to_string(Estimator estimator);

struct BoundOptions {
  Flavor flavor = Flavor::kWeightedCdf;
  Estimator estimator = Estimator::kGrid;
  std::size_t grid_size = kDefaultGridSize;
};

struct DkwCorrection {
  DkwBand calibration;
  DkwBand test;
  double raw_value = 0.0;
  double corrected_value = 0.0;
  // Weighted calibration distributions are resampled to their effective
  // size before the raw term is recomputed.
  bool resampled = false;
  std::size_t resample_size = 0;
};

struct BoundReport {
  // Raw right-hand side of the bound (no DKW term).
  double value = 0.0;
  Flavor flavor = Flavor::kWeightedCdf;
  bool labeled = true;
  std::optional<DkwCorrection> dkw;
  bool dominance_verified = true;
  Estimator estimator = Estimator::kGrid;
  std::size_t grid_size = kDefaultGridSize;
  double max_density = 0.0;
  double bandwidth = 0.0;
  std::map<std::string, double> components;

  // DKW-corrected value when a correction was applied, raw value otherwise.
  double bound() const { return dkw ? dkw->corrected_value : value; }
  // The coverage gap never exceeds one; the bound can.
  double display_value() const { return bound() < 1.0 ? bound() : 1.0; }
};

// Bound on the total coverage gap between p and a labeled test
// distribution q. kde must describe p's density.
BoundReport labeled_bound(const WeightedEmpirical& p, const WeightedEmpirical& q,
                          const KdeDensity& kde, const BoundOptions& options = {});

// Bound that only needs an auxiliary pair sandwiching the test scores.
// Throws std::logic_error if the pair claims dominance yet
// mean(upper) < mean(lower).
BoundReport unlabeled_bound(const WeightedEmpirical& p, const AuxiliaryPair& pair,
                            const KdeDensity& kde, const BoundOptions& options = {});

// Adds the two DKW half-widths for sample sizes n and m at failure
// probability d (per band) to an already computed report.
BoundReport dkw_correct(const BoundReport& report, double n, double m, double d);

// Full DKW-corrected bound for a possibly weighted p. Uniform p is used as
// is with n = p.size(). Weighted p is replaced by round(n_w) draws from it
// (n_w the effective sample size) and the DKW term uses n_w. The KDE is
// refit on whatever sample is used, with the given bandwidth.
BoundReport dkw_corrected_bound(const WeightedEmpirical& p, const WeightedEmpirical& q,
                                double bandwidth, const BoundOptions& options, double d,
                                std::uint64_t seed);
BoundReport dkw_corrected_bound(const WeightedEmpirical& p, const AuxiliaryPair& pair,
                                double bandwidth, const BoundOptions& options, double d,
                                std::uint64_t seed);

// Monte Carlo bound on the coverage gap at a single miscoverage level:
// averages 0.5 * (|F_p - F_lo| + |F_p - F_up| + |F_lo - F_up|) at the
// conformal threshold of n_cal_draws calibration sets of size n drawn from
// p, then adds the DKW half-widths for n and m.
double alpha_specific_bound(const WeightedEmpirical& p, const AuxiliaryPair& pair,
                            double alpha, std::size_t n_cal_draws, std::size_t n,
                            std::size_t m, double d, std::uint64_t seed);

// {0.01, 0.02, ..., 0.99}
std::vector<double> default_alpha_grid();

// Fraction of scores <= threshold.
double empirical_coverage(std::span<const double> scores, double threshold);

// Mean over alpha_grid of |(1 - alpha) - coverage of test_scores at the
// calibration threshold quantile(cal, 1 - alpha)|. The conformal convention
// is used for uniform cal, plain otherwise.
double total_gap_empirical(const WeightedEmpirical& cal, std::span<const double> test_scores,
                           std::span<const double> alpha_grid);

}  // namespace shiftcp
