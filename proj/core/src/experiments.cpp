#include "shiftcp/experiments.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <thread>

#include "shiftcp/conformal.hpp"
#include "shiftcp/error.hpp"

namespace shiftcp {
namespace {

constexpr std::size_t kPoolFactor = 20;

double true_mean(const std::array<double, 4>& x) {
  double y = kTrueCoefficients[0];
  for (std::size_t d = 0; d < 4; ++d) y += kTrueCoefficients[d + 1] * x[d];
  return y;
}

std::array<double, 4> draw_input(std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::array<double, 4> x{};
  for (double& v : x) v = normal(rng);
  return x;
}

RegressionData sample_p(std::size_t n, double noise_sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> noise(0.0, noise_sigma);
  RegressionData data;
  data.x.reserve(n);
  data.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.x.push_back(draw_input(rng));
    data.y.push_back(true_mean(data.x.back()) + noise(rng));
  }
  return data;
}

RegressionData sample_q(std::size_t n, const std::array<double, 4>& tilt, double noise_sigma,
                        std::mt19937_64& rng) {
  const std::size_t pool_size = kPoolFactor * n;
  std::vector<std::array<double, 4>> pool(pool_size);
  std::vector<double> log_weights(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) {
    pool[i] = draw_input(rng);
    double z = 0.0;
    for (std::size_t d = 0; d < 4; ++d) z += tilt[d] * pool[i][d];
    log_weights[i] = z;
  }
  const auto weights = softmax(log_weights);
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  std::normal_distribution<double> noise(0.0, noise_sigma);
  RegressionData data;
  data.x.reserve(n);
  data.y.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    data.x.push_back(pool[pick(rng)]);
    data.y.push_back(true_mean(data.x.back()) + noise(rng));
  }
  return data;
}

// Gaussian mass on [a, b], accurate in both tails.
double normal_mass(double a, double b) {
  constexpr double kInvSqrt2 = 0.70710678118654752440;
  if (a >= 0.0) return 0.5 * (std::erfc(a * kInvSqrt2) - std::erfc(b * kInvSqrt2));
  if (b <= 0.0) return 0.5 * (std::erfc(-b * kInvSqrt2) - std::erfc(-a * kInvSqrt2));
  return 1.0 - 0.5 * (std::erfc(-a * kInvSqrt2) + std::erfc(b * kInvSqrt2));
}

}  // namespace

void SynthConfig::validate() const {
  if (n_train == 0 || n_cal == 0 || n_adapt == 0 || n_test == 0) {
    throw ValidationError("synthetic sample counts must be at least 1");
  }
  if (bins < 2) throw ValidationError("need at least two bins");
  if (!(noise_sigma > 0.0)) throw ValidationError("noise sigma must be positive");
}

SynthDatasets generate_synth(const SynthConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  SynthDatasets out;
  out.train_p = sample_p(config.n_train, config.noise_sigma, rng);
  out.cal_p = sample_p(config.n_cal, config.noise_sigma, rng);
  out.adapt_q = sample_q(config.n_adapt, config.tilt, config.noise_sigma, rng);
  out.test_q = sample_q(config.n_test, config.tilt, config.noise_sigma, rng);
  return out;
}

double LinearGaussianModel::predict(const std::array<double, 4>& x) const {
  double y = coefficients[0];
  for (std::size_t d = 0; d < 4; ++d) y += coefficients[d + 1] * x[d];
  return y;
}

LinearGaussianModel fit_linear_gaussian(const RegressionData& train) {
  const auto n = static_cast<Eigen::Index>(train.size());
  if (n < 5) throw ValidationError("OLS with intercept needs at least five samples");
  Eigen::MatrixXd design(n, 5);
  Eigen::VectorXd target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    design(i, 0) = 1.0;
    for (Eigen::Index d = 0; d < 4; ++d) design(i, d + 1) = train.x[static_cast<std::size_t>(i)][static_cast<std::size_t>(d)];
    target(i) = train.y[static_cast<std::size_t>(i)];
  }
  const Eigen::VectorXd beta = design.colPivHouseholderQr().solve(target);
  LinearGaussianModel model;
  for (std::size_t j = 0; j < 5; ++j) model.coefficients[j] = beta(static_cast<Eigen::Index>(j));
  const double rss = (design * beta - target).squaredNorm();
  model.sigma = n > 5 ? std::sqrt(rss / static_cast<double>(n - 5)) : 0.0;
  return model;
}

std::vector<double> make_bin_edges(std::span<const double> train_y, double sigma,
                                   std::size_t bins) {
  if (train_y.empty()) throw ValidationError("bin edges need training targets");
  if (bins < 2) throw ValidationError("need at least two bins");
  const auto [lo_it, hi_it] = std::minmax_element(train_y.begin(), train_y.end());
  const double lo = *lo_it - 3.0 * sigma;
  const double hi = *hi_it + 3.0 * sigma;
  if (!(hi > lo)) throw ValidationError("degenerate target range for binning");
  std::vector<double> edges(bins + 1);
  for (std::size_t b = 0; b <= bins; ++b) {
    edges[b] = lo + (hi - lo) * static_cast<double>(b) / static_cast<double>(bins);
  }
  edges.back() = hi;
  return edges;
}

int bin_of(double y, std::span<const double> edges) {
  const auto it = std::upper_bound(edges.begin(), edges.end(), y);
  const auto raw = static_cast<long>(it - edges.begin()) - 1;
  const long last = static_cast<long>(edges.size()) - 2;
  return static_cast<int>(std::clamp(raw, 0L, last));
}

BinnedScores bin_scores(const LinearGaussianModel& model,
                        std::span<const std::array<double, 4>> inputs,
                        std::span<const double> edges,
                        std::optional<std::span<const double>> targets) {
  if (edges.size() < 3) throw ValidationError("need at least two bins");
  for (std::size_t b = 1; b < edges.size(); ++b) {
    if (!(edges[b] > edges[b - 1])) throw ValidationError("bin edges must be strictly increasing");
  }
  if (targets && targets->size() != inputs.size()) {
    throw ValidationError("targets length does not match inputs");
  }
  const std::size_t bins = edges.size() - 1;
  // A zero residual spread still needs a proper predictive distribution.
  const double sigma = std::max(model.sigma, 1e-9);
  std::vector<double> scores(inputs.size() * bins);
  std::vector<double> probs(inputs.size() * bins);
  for (std::size_t r = 0; r < inputs.size(); ++r) {
    const double mu = model.predict(inputs[r]);
    double* p = probs.data() + r * bins;
    double total = 0.0;
    for (std::size_t b = 0; b < bins; ++b) {
      p[b] = normal_mass((edges[b] - mu) / sigma, (edges[b + 1] - mu) / sigma);
      total += p[b];
    }
    if (!(total > 0.0)) {
      // Prediction far outside the edges: all mass on the nearest bin.
      std::fill(p, p + bins, 0.0);
      p[static_cast<std::size_t>(bin_of(mu, edges))] = 1.0;
      total = 1.0;
    }
    for (std::size_t b = 0; b < bins; ++b) {
      p[b] /= total;
      scores[r * bins + b] = 1.0 - p[b];
    }
  }
  std::vector<int> labels;
  if (targets) {
    labels.reserve(targets->size());
    for (double y : *targets) labels.push_back(bin_of(y, edges));
  }
  return BinnedScores{ScoreMatrix(inputs.size(), bins, std::move(scores), std::move(probs)),
                      std::move(labels)};
}

std::vector<std::size_t> label_shift_resample(std::span<const int> labels,
                                              const ScoreMatrix& scores, double gamma,
                                              std::uint64_t seed, double min_fraction) {
  if (!(gamma > 0.0)) throw ValidationError("gamma must be positive");
  if (!(min_fraction >= 0.0 && min_fraction <= 1.0)) {
    throw ValidationError("min_fraction must lie in [0, 1]");
  }
  if (labels.size() != scores.rows()) {
    throw ValidationError("labels length does not match the number of rows");
  }
  if (labels.empty()) throw ValidationError("label shift needs at least one labeled row");
  const std::size_t classes = scores.cols();
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ValidationError("label " + std::to_string(y) + " in row " + std::to_string(i) +
                            " is out of range");
    }
    members[static_cast<std::size_t>(y)].push_back(i);
  }
  const auto total = static_cast<double>(labels.size());

  std::mt19937_64 rng(seed);
  std::vector<double> target(classes, 0.0);
  double target_sum = 0.0;
  for (std::size_t k = 0; k < classes; ++k) {
    if (members[k].empty()) continue;
    std::gamma_distribution<double> draw(gamma * static_cast<double>(members[k].size()) / total, 1.0);
    target[k] = draw(rng);
    target_sum += target[k];
  }
  if (!(target_sum > 0.0)) {
    // Every gamma draw underflowed; keep the original marginal.
    for (std::size_t k = 0; k < classes; ++k) target[k] = static_cast<double>(members[k].size());
    target_sum = total;
  }
  for (double& q : target) q /= target_sum;

  // Largest size whose class counts follow the target marginal exactly.
  double exact_size = total;
  for (std::size_t k = 0; k < classes; ++k) {
    if (target[k] > 0.0) {
      exact_size = std::min(exact_size, static_cast<double>(members[k].size()) / target[k]);
    }
  }
  const double floor_size = std::ceil(min_fraction * total);
  const double wanted = std::min(total, std::max(std::floor(exact_size), floor_size));

  // Water-fill: find the scale s with sum_k min(count_k, s * q_k) = wanted.
  const auto filled = [&](double s) {
    double sum = 0.0;
    for (std::size_t k = 0; k < classes; ++k) {
      sum += std::min(static_cast<double>(members[k].size()), s * target[k]);
    }
    return sum;
  };
  double lo = 0.0;
  double hi = total;
  while (filled(hi) < wanted && hi < 1e300) {
    if (filled(hi * 2.0) <= filled(hi)) break;  // no uncapped class left to grow
    hi *= 2.0;
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    (filled(mid) < wanted ? lo : hi) = mid;
  }
  std::vector<std::size_t> take(classes, 0);
  std::vector<std::pair<double, std::size_t>> remainders;
  std::size_t assigned = 0;
  for (std::size_t k = 0; k < classes; ++k) {
    const double share = std::min(static_cast<double>(members[k].size()), hi * target[k]);
    take[k] = static_cast<std::size_t>(std::floor(share + 1e-9));
    assigned += take[k];
    if (take[k] < members[k].size() && target[k] > 0.0) {
      remainders.emplace_back(share - static_cast<double>(take[k]), k);
    }
  }
  std::stable_sort(remainders.begin(), remainders.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  const auto goal = static_cast<std::size_t>(wanted);
  for (const auto& [fraction, k] : remainders) {
    if (assigned >= goal) break;
    ++take[k];
    ++assigned;
  }

  std::vector<std::size_t> chosen;
  chosen.reserve(assigned);
  for (std::size_t k = 0; k < classes; ++k) {
    auto pool = members[k];
    std::shuffle(pool.begin(), pool.end(), rng);
    chosen.insert(chosen.end(), pool.begin(),
                  pool.begin() + static_cast<std::ptrdiff_t>(std::min(take[k], pool.size())));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

OptimizerConfig default_regression_optimizer() {
  OptimizerConfig config;
  config.flavor = Flavor::kW1;
  config.estimator = Estimator::kGrid;
  config.steps = 1000;
  return config;
}

namespace {

double mean_of(std::span<const double> values) {
  return std::accumulate(values.begin(), values.end(), 0.0) / static_cast<double>(values.size());
}

std::vector<SimRecord> run_one(const SynthConfig& base, std::span<const Method> methods,
                               double alpha, std::size_t sim, std::uint64_t seed,
                               const OptimizerConfig& optimizer) {
  SynthConfig config = base;
  config.seed = seed + sim;
  const auto data = generate_synth(config);
  const auto model = fit_linear_gaussian(data.train_p);
  const auto edges = make_bin_edges(data.train_p.y, model.sigma, config.bins);
  const auto cal = bin_scores(model, data.cal_p.x, edges, std::span<const double>(data.cal_p.y));
  const auto adapt = bin_scores(model, data.adapt_q.x, edges, std::span<const double>(data.adapt_q.y));
  const auto test = bin_scores(model, data.test_q.x, edges, std::span<const double>(data.test_q.y));
  const auto cal_scores = true_label_scores(cal.scores, cal.labels);

  const auto run_at = [&](double t, Method method) {
    const auto report = evaluate_thresholds(test.scores, test.labels, std::array{alpha},
                                            std::array{t}, std::string(to_string(method)));
    SimRecord record;
    record.sim = sim;
    record.method = method;
    record.alpha = alpha;
    record.coverage = report.per_alpha[0].coverage;
    record.mean_size = report.per_alpha[0].mean_size;
    return record;
  };

  std::vector<SimRecord> records;
  for (Method method : methods) {
    switch (method) {
      case Method::kUncorrected:
        records.push_back(run_at(threshold(uncorrected(cal_scores), alpha), method));
        break;
      case Method::kOptimal: {
        const auto adapt_scores = true_label_scores(adapt.scores, adapt.labels);
        records.push_back(run_at(threshold(oracle(adapt_scores), alpha), method));
        break;
      }
      case Method::kTrueLr: {
        const auto weights = true_lr_weights(data.cal_p.x, config.tilt);
        const auto dist = WeightedEmpirical::from_scores(cal_scores, weights);
        records.push_back(run_at(threshold(dist, alpha, QuantileConvention::kPlain), method));
        break;
      }
      case Method::kEcp:
        records.push_back(run_at(ecp_threshold(uncorrected(cal_scores), test.scores, alpha), method));
        break;
      case Method::kOtMinMax:
      case Method::kOtFu: {
        OptimizerConfig opt = optimizer;
        opt.seed = config.seed;
        opt.record_trace = true;
        const auto pair = method == Method::kOtMinMax ? min_max_pair(adapt.scores)
                                                      : f_u_pair(adapt.scores, opt.seed);
        const auto learned = learn_weights(cal_scores, pair, opt);
        const auto dist = WeightedEmpirical::from_scores(cal_scores, learned.weights.weights());
        auto record = run_at(threshold(dist, alpha, QuantileConvention::kPlain), method);
        const std::size_t window = std::min<std::size_t>(10, learned.trace.size());
        const std::span<const double> trace(learned.trace);
        record.trace_head_mean = mean_of(trace.first(window));
        record.trace_tail_mean = mean_of(trace.last(window));
        records.push_back(record);
        break;
      }
    }
  }
  return records;
}

}  // namespace

std::vector<SimRecord> run_synth_experiment(const SynthConfig& config,
                                            std::span<const Method> methods, double alpha,
                                            std::size_t n_sims, std::uint64_t seed,
                                            const SynthRunOptions& options) {
  config.validate();
  options.optimizer.validate();
  if (!(alpha > 0.0 && alpha < 1.0)) throw ValidationError("alpha must lie in (0, 1)");
  if (methods.empty()) throw ValidationError("no methods requested");

  std::vector<std::vector<SimRecord>> per_sim(n_sims);
  std::size_t threads = options.threads;
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = std::min(threads, std::max<std::size_t>(n_sims, 1));

  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::atomic<bool> failed{false};
  const auto worker = [&] {
    for (std::size_t sim = next++; sim < n_sims && !failed; sim = next++) {
      try {
        per_sim[sim] = run_one(config, methods, alpha, sim, seed, options.optimizer);
      } catch (...) {
        if (!failed.exchange(true)) failure = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::vector<SimRecord> records;
  for (auto& sim_records : per_sim) {
    records.insert(records.end(), sim_records.begin(), sim_records.end());
  }
  return records;
}

std::vector<MethodSummary> summarize(std::span<const SimRecord> records) {
  std::vector<MethodSummary> out;
  for (Method method : all_methods()) {
    std::vector<double> coverage;
    std::vector<double> size;
    for (const auto& r : records) {
      if (r.method == method) {
        coverage.push_back(r.coverage);
        size.push_back(r.mean_size);
      }
    }
    if (coverage.empty()) continue;
    const auto sd = [](const std::vector<double>& v, double mu) {
      if (v.size() < 2) return 0.0;
      double ss = 0.0;
      for (double x : v) ss += (x - mu) * (x - mu);
      return std::sqrt(ss / static_cast<double>(v.size() - 1));
    };
    MethodSummary s;
    s.method = method;
    s.count = coverage.size();
    s.coverage_mean = mean_of(coverage);
    s.coverage_sd = sd(coverage, s.coverage_mean);
    s.size_mean = mean_of(size);
    s.size_sd = sd(size, s.size_mean);
    out.push_back(s);
  }
  return out;
}

}  // namespace shiftcp
