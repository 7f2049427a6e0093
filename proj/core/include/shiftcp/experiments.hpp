#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "shiftcp/auxiliary.hpp"
#include "shiftcp/baselines.hpp"
#include "shiftcp/reweight.hpp"

namespace shiftcp {

// Y = 210 + 27.4 X1 + 13.7 (X2 + X3 + X4) + noise, X ~ N(0, I4).
inline constexpr std::array<double, 5> kTrueCoefficients = {210.0, 27.4, 13.7, 13.7, 13.7};

struct SynthConfig {
  std::size_t n_train = 1000;
  std::size_t n_cal = 300;
  std::size_t n_adapt = 300;
  std::size_t n_test = 1000;
  std::size_t bins = 50;
  std::array<double, 4> tilt = kDefaultTilt;
  double noise_sigma = 1.0;
  std::uint64_t seed = 42;

  void validate() const;
};

struct RegressionData {
  std::vector<std::array<double, 4>> x;
  std::vector<double> y;

  std::size_t size() const noexcept { return y.size(); }
};

struct SynthDatasets {
  RegressionData train_p;
  RegressionData cal_p;
  RegressionData adapt_q;
  RegressionData test_q;
};

// Q-distributed samples come from self-normalized importance resampling
// (with replacement) of a P pool 20 times the requested size, with weights
// exp(tilt . x).
SynthDatasets generate_synth(const SynthConfig& config);

struct LinearGaussianModel {
  std::array<double, 5> coefficients{};  // intercept, then one slope per input
  double sigma = 0.0;                    // residual standard deviation

  double predict(const std::array<double, 4>& x) const;
};

// Ordinary least squares with an intercept; sigma uses the n - 5
// denominator (0 when n == 5). Needs at least five samples.
LinearGaussianModel fit_linear_gaussian(const RegressionData& train);

// bins + 1 equally spaced edges over [min(y) - 3 sigma, max(y) + 3 sigma].
std::vector<double> make_bin_edges(std::span<const double> train_y, double sigma,
                                   std::size_t bins);

struct BinnedScores {
  ScoreMatrix scores;
  std::vector<int> labels;  // empty when no targets were given
};

// Regression as classification: bin b gets the Gaussian(prediction, sigma)
// mass on [edge_b, edge_b+1], renormalized over bins; score = 1 - mass.
// Targets outside the edges fall in the boundary bins.
BinnedScores bin_scores(const LinearGaussianModel& model,
                        std::span<const std::array<double, 4>> inputs,
                        std::span<const double> edges,
                        std::optional<std::span<const double>> targets = std::nullopt);

// Index of the bin containing y, clamped to the boundary bins.
int bin_of(double y, std::span<const double> edges);

// Label shift: draws a target class marginal from Dirichlet(gamma * p_k),
// p_k the empirical class frequencies, then subsamples without replacement
// to follow it. The size is the largest the class counts allow, but never
// below min_fraction of the input; when that floor binds, classes that run
// out are capped and the remainder is spread over the others in proportion
// to the target marginal. Returns sorted row indices.
std::vector<std::size_t> label_shift_resample(std::span<const int> labels,
                                              const ScoreMatrix& scores, double gamma,
                                              std::uint64_t seed,
                                              double min_fraction = 1.0 / 3.0);

// Default Adam settings, 1000 steps, on the W1 bound with the grid estimator.
OptimizerConfig default_regression_optimizer();

struct SynthRunOptions {
  OptimizerConfig optimizer = default_regression_optimizer();
  // 0 means one thread per hardware core.
  std::size_t threads = 0;
};

struct SimRecord {
  std::size_t sim = 0;
  Method method = Method::kUncorrected;
  double alpha = 0.0;
  double coverage = 0.0;
  double mean_size = 0.0;
  // Learned-weight methods only: mean objective over the first and last ten
  // optimizer steps.
  std::optional<double> trace_head_mean;
  std::optional<double> trace_tail_mean;
};

// For each simulation: fresh datasets from seed + sim, OLS on train_p,
// binned scores for cal_p, adapt_q and test_q, then every method's coverage
// and mean set size on test_q at alpha. Records come back ordered by
// (sim, method) regardless of threading.
std::vector<SimRecord> run_synth_experiment(const SynthConfig& config,
                                            std::span<const Method> methods, double alpha,
                                            std::size_t n_sims, std::uint64_t seed,
                                            const SynthRunOptions& options = {});

struct MethodSummary {
  Method method = Method::kUncorrected;
  std::size_t count = 0;
  double coverage_mean = 0.0;
  double coverage_sd = 0.0;
  double size_mean = 0.0;
  double size_sd = 0.0;
};

std::vector<MethodSummary> summarize(std::span<const SimRecord> records);

}  // namespace shiftcp
