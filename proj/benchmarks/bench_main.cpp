#include <benchmark/benchmark.h>

#include <random>
#include <vector>

#include "shiftcp/auxiliary.hpp"
#include "shiftcp/density.hpp"
#include "shiftcp/empirical.hpp"
#include "shiftcp/reweight.hpp"

namespace {

using namespace shiftcp;

std::vector<double> scores(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u;
  std::vector<double> out(n);
  for (double& v : out) v = u(rng);
  return out;
}

// Unlabeled test matrix with uniform random rows, scores = 1 - p.
ScoreMatrix test_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::gamma_distribution<double> g(0.5, 1.0);
  std::vector<double> probs(rows * cols);
  std::vector<double> s(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols; ++c) total += probs[r * cols + c] = g(rng) + 1e-12;
    for (std::size_t c = 0; c < cols; ++c) {
      probs[r * cols + c] /= total;
      s[r * cols + c] = 1.0 - probs[r * cols + c];
    }
  }
  return ScoreMatrix(rows, cols, s, probs);
}

void BM_W1(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto a = WeightedEmpirical::from_scores(scores(n, 1));
  const auto b = WeightedEmpirical::from_scores(scores(n, 2));
  for (auto _ : state) benchmark::DoNotOptimize(w1(a, b));
  state.SetComplexityN(state.range(0));
}
BENCHMARK(BM_W1)->RangeMultiplier(4)->Range(64, 65536)->Complexity();

void BM_MaxDensity(benchmark::State& state) {
  const auto kde = KdeDensity::fit(scores(300, 3));
  const auto grid = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(max_density(kde, grid).value);
}
BENCHMARK(BM_MaxDensity)->Arg(128)->Arg(512)->Arg(2048);

void BM_ObjectiveGradient(benchmark::State& state) {
  const auto n = static_cast<std::size_t>(state.range(0));
  const auto cal = scores(n, 4);
  const BoundObjective obj(cal, min_max_pair(test_matrix(n, 10, 5)), OptimizerConfig{});
  const auto w = SimplexWeights::uniform(n);
  std::vector<double> grad;
  for (auto _ : state) benchmark::DoNotOptimize(obj.value_and_gradient(w, grad));
}
BENCHMARK(BM_ObjectiveGradient)->Arg(100)->Arg(300)->Arg(1000);

void BM_Learn(benchmark::State& state) {
  const auto cal = scores(300, 6);
  const auto pair = min_max_pair(test_matrix(300, 10, 7));
  OptimizerConfig config;
  config.steps = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(learn_weights(cal, pair, config).weights.size());
}
BENCHMARK(BM_Learn)->Arg(100)->Arg(1000)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
