// Acceptance checks, one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria (capped at 1).
//
//   shiftcp_acceptance [--only ID]... [--work-dir DIR]
//
// IDs are 1..10 and "fixture". Criteria 8 and 9 share one simulation run;
// it is cached in the work directory so running them as separate processes
// does not repeat it.
#include <CLI11.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "cli.hpp"
#include "shiftcp/auxiliary.hpp"
#include "shiftcp/bounds.hpp"
#include "shiftcp/conformal.hpp"
#include "shiftcp/empirical.hpp"
#include "shiftcp/experiments.hpp"
#include "shiftcp/io.hpp"
#include "shiftcp/reweight.hpp"
#include "support.hpp"

namespace {

using namespace shiftcp;
namespace fs = std::filesystem;
using testing::beta_scores;
using testing::draw_size;

struct Result {
  bool pass = false;
  std::string detail;
};

std::string fmt(double x, int digits = 4) {
  std::ostringstream s;
  s.precision(digits);
  s << x;
  return s.str();
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

WeightedEmpirical uniform_dist(const std::vector<double>& s) {
  return WeightedEmpirical::from_scores(s);
}

// 1. CDF-integration W1 against the co-sorted matching.
Result w1_oracle() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  double worst = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const auto n = draw_size(rng, 1, 64);
    const auto a = testing::uniform_scores(rng, n);
    const auto b = testing::uniform_scores(rng, n);
    worst = std::max(worst, std::abs(w1(uniform_dist(a), uniform_dist(b)) - testing::matched_w1(a, b)));
  }
  const double t = seconds_since(start);
  return {worst <= 1e-9 && t < 5.0,
          "1000 instances, max |diff| " + fmt(worst) + ", " + fmt(t, 3) + " s"};
}

// 2. W1 equals the mean difference when one distribution dominates.
Result dominance_identity() {
  std::mt19937_64 rng(1002);
  std::uniform_real_distribution<double> half(0.0, 0.5);
  double worst = 0.0;
  int not_dominant = 0;
  for (int i = 0; i < 500; ++i) {
    const auto n = draw_size(rng, 1, 64);
    std::vector<double> b(n);
    std::vector<double> a(n);
    for (std::size_t k = 0; k < n; ++k) {
      b[k] = half(rng);
      a[k] = b[k] + half(rng);
    }
    const auto da = uniform_dist(a);
    const auto db = uniform_dist(b);
    if (!dominates(da, db, 0.0)) ++not_dominant;
    worst = std::max(worst, std::abs(w1(da, db) - (mean(da) - mean(db))));
  }
  return {worst <= 1e-9 && not_dominant == 0,
          "500 pairs, max |diff| " + fmt(worst) + ", dominance failures " +
              std::to_string(not_dominant)};
}

// 3. Row-min / row-max pair sandwiches the labeled scores with no slack.
Result sandwich() {
  std::mt19937_64 rng(1003);
  int violations = 0;
  for (int i = 0; i < 200; ++i) {
    const auto data = testing::random_labeled_matrix(rng, draw_size(rng, 1, 100),
                                                     draw_size(rng, 2, 20));
    const auto pair = min_max_pair(data.scores);
    const auto truth = labeled_empirical(true_label_scores(data.scores, data.labels));
    if (!dominates(pair.upper, truth, 0.0) || !dominates(truth, pair.lower, 0.0)) ++violations;
  }
  return {violations == 0, "200 matrices, violations " + std::to_string(violations)};
}

// 4. weighted CDF <= W1 flavor, and labeled <= unlabeled with a sandwiching pair.
Result bound_ordering() {
  std::mt19937_64 rng(1004);
  int flavor_bad = 0;
  int label_bad = 0;
  double flavor_worst = -1e300;
  double label_worst = -1e300;
  for (int i = 0; i < 500; ++i) {
    const auto cal = beta_scores(rng, draw_size(rng, 2, 80), 2.0, 5.0);
    const auto data = testing::random_labeled_matrix(rng, draw_size(rng, 2, 80),
                                                     draw_size(rng, 2, 10));
    const auto p = uniform_dist(cal);
    const auto kde = KdeDensity::fit(cal);
    const auto q = labeled_empirical(true_label_scores(data.scores, data.labels));
    const auto pair = min_max_pair(data.scores);
    for (auto estimator : {Estimator::kGrid, Estimator::kExpectation}) {
      const BoundOptions cdf{Flavor::kWeightedCdf, estimator, kDefaultGridSize};
      const BoundOptions w1f{Flavor::kW1, estimator, kDefaultGridSize};
      const double lab_cdf = labeled_bound(p, q, kde, cdf).value;
      const double lab_w1 = labeled_bound(p, q, kde, w1f).value;
      const double unl_cdf = unlabeled_bound(p, pair, kde, cdf).value;
      const double unl_w1 = unlabeled_bound(p, pair, kde, w1f).value;
      // The expectation estimator is not dominated by max-density times W1
      // in general, so the flavor ordering is checked on the grid estimator.
      if (estimator == Estimator::kGrid) {
        for (double excess : {lab_cdf - lab_w1, unl_cdf - unl_w1}) {
          flavor_worst = std::max(flavor_worst, excess);
          if (excess > 1e-9) ++flavor_bad;
        }
      }
      for (double excess : {lab_cdf - unl_cdf, lab_w1 - unl_w1}) {
        label_worst = std::max(label_worst, excess);
        if (excess > 1e-9) ++label_bad;
      }
    }
  }
  return {flavor_bad == 0 && label_bad == 0,
          "500 instances, flavor violations " + std::to_string(flavor_bad) + " (max excess " +
              fmt(flavor_worst) + "), labeled/unlabeled violations " + std::to_string(label_bad) +
              " (max excess " + fmt(label_worst) + ")"};
}

// 5. Empirical total gap below the DKW-corrected labeled bound.
Result bound_validity() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1005);
  std::uniform_real_distribution<double> shape(1.0, 6.0);
  const auto grid = default_alpha_grid();
  int held = 0;
  for (int i = 0; i < 200; ++i) {
    const double a = shape(rng);
    const double b = shape(rng);
    const auto cal = beta_scores(rng, 200, a, b);
    const auto test = beta_scores(rng, 200, a + shape(rng) - 1.0, b);
    const auto p = uniform_dist(cal);
    const auto q = uniform_dist(test);
    const auto kde = KdeDensity::fit(cal);
    const double bound =
        dkw_corrected_bound(p, q, kde.bandwidth(), BoundOptions{}, 0.05, 1005 + i).bound();
    if (total_gap_empirical(p, test, grid) <= bound) ++held;
  }
  const double t = seconds_since(start);
  const double rate = held / 200.0;
  return {rate >= 0.88 && t < 120.0,
          "held in " + std::to_string(held) + "/200 (" + fmt(100 * rate, 3) + "%), " + fmt(t, 3) + " s"};
}

// 6. Analytic gradient against central differences in the log-weights.
Result gradient_check() {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1006);
  std::normal_distribution<double> g(0.0, 0.5);
  constexpr double kStep = 1e-5;
  int accepted = 0;
  int excluded = 0;
  double worst = 0.0;
  int bad = 0;
  while (accepted < 100 && excluded < 1000) {
    const auto cal = beta_scores(rng, draw_size(rng, 2, 50), 2.0, 4.0);
    const auto data = testing::random_labeled_matrix(rng, draw_size(rng, 1, 50),
                                                     draw_size(rng, 2, 8));
    const auto pair = accepted % 2 ? min_max_pair(data.scores) : f_u_pair(data.scores, rng());
    std::vector<double> logits(cal.size());
    for (double& v : logits) v = g(rng);

    bool tie = false;
    double instance_worst = 0.0;
    for (auto flavor : {Flavor::kWeightedCdf, Flavor::kW1}) {
      for (auto estimator : {Estimator::kGrid, Estimator::kExpectation}) {
        OptimizerConfig config;
        config.flavor = flavor;
        config.estimator = estimator;
        const BoundObjective obj(cal, pair, config);
        std::vector<double> analytic;
        const double f0 = obj.value_and_gradient(SimplexWeights(logits), analytic);
        std::vector<double> numeric(cal.size());
        double scale = 0.0;
        for (std::size_t i = 0; i < cal.size(); ++i) {
          auto up = logits;
          auto down = logits;
          up[i] += kStep;
          down[i] -= kStep;
          const double fu = obj.value(SimplexWeights(up));
          const double fd = obj.value(SimplexWeights(down));
          numeric[i] = (fu - fd) / (2 * kStep);
          // A kink inside the stencil shows up as one-sided slopes that
          // disagree; that is a tie configuration.
          const double right = (fu - f0) / kStep;
          const double left = (f0 - fd) / kStep;
          if (std::abs(right - left) > 1e-3 * std::max(std::abs(numeric[i]), 1e-6)) tie = true;
          scale = std::max(scale, std::abs(numeric[i]));
        }
        for (std::size_t i = 0; i < cal.size(); ++i) {
          // Flat directions leave only rounding noise in the difference quotient.
          const double denom = std::max({std::abs(numeric[i]), 1e-6 * scale, 1e-7});
          instance_worst = std::max(instance_worst, std::abs(analytic[i] - numeric[i]) / denom);
        }
      }
    }
    if (tie) {
      ++excluded;
      continue;
    }
    ++accepted;
    worst = std::max(worst, instance_worst);
    if (instance_worst > 1e-3) ++bad;
  }
  const double t = seconds_since(start);
  return {accepted == 100 && bad == 0 && t < 60.0,
          std::to_string(accepted) + " instances (" + std::to_string(excluded) +
              " tie configurations skipped), max relative error " + fmt(worst) + ", " + fmt(t, 3) +
              " s"};
}

// 7. Marginal coverage of uniform-weight split CP on exchangeable data.
Result exchangeable_coverage() {
  std::mt19937_64 rng(1007);
  const auto pool = beta_scores(rng, 100000, 2.0, 5.0);
  std::uniform_int_distribution<std::size_t> pick(0, pool.size() - 1);
  const auto draw = [&](std::size_t n) {
    std::vector<double> out(n);
    for (double& v : out) v = pool[pick(rng)];
    return out;
  };
  bool ok = true;
  std::string detail;
  for (double alpha : {0.05, 0.1, 0.2}) {
    double total = 0.0;
    for (int rep = 0; rep < 2000; ++rep) {
      const auto cal = uniform_dist(draw(100));
      const auto test = draw(100);
      total += empirical_coverage(test, threshold(cal, alpha));
    }
    const double coverage = total / 2000.0;
    const double lo = 1.0 - alpha - 0.01;
    const double hi = 1.0 - alpha + 1.0 / 101.0 + 0.01;
    ok = ok && coverage >= lo && coverage <= hi;
    detail += (detail.empty() ? "" : ", ") + std::string("alpha ") + fmt(alpha, 2) + ": " +
              fmt(coverage) + " in [" + fmt(lo) + ", " + fmt(hi) + "]";
  }
  return {ok, detail};
}

// Simulation records shared by criteria 8 and 9.
struct SynthRun {
  std::vector<SimRecord> records;
  double seconds = 0.0;
};

const std::vector<Method> kSynthMethods = {Method::kUncorrected, Method::kOptimal,
                                           Method::kOtMinMax, Method::kOtFu};
constexpr std::size_t kSynthSims = 100;
constexpr std::uint64_t kSynthSeed = 42;

void save_run(const fs::path& path, const SynthRun& run) {
  std::ostringstream out;
  out.precision(17);
  out << "seconds " << run.seconds << "\n";
  for (const auto& r : run.records) {
    out << r.sim << ' ' << static_cast<int>(r.method) << ' ' << r.coverage << ' ' << r.mean_size
        << ' ' << r.trace_head_mean.value_or(std::nan("")) << ' '
        << r.trace_tail_mean.value_or(std::nan("")) << "\n";
  }
  write_text(path, out.str());
}

std::optional<SynthRun> load_run(const fs::path& path) {
  std::ifstream in(path);
  if (!in) return std::nullopt;
  SynthRun run;
  std::string key;
  if (!(in >> key >> run.seconds) || key != "seconds") return std::nullopt;
  SimRecord r;
  int method = 0;
  std::string head;
  std::string tail;
  while (in >> r.sim >> method >> r.coverage >> r.mean_size >> head >> tail) {
    r.method = static_cast<Method>(method);
    r.alpha = 0.1;
    r.trace_head_mean = head == "nan" ? std::nullopt : std::optional<double>(std::stod(head));
    r.trace_tail_mean = tail == "nan" ? std::nullopt : std::optional<double>(std::stod(tail));
    run.records.push_back(r);
  }
  if (run.records.size() != kSynthSims * kSynthMethods.size()) return std::nullopt;
  return run;
}

// Criterion 8 always simulates afresh; 9 reads what 8 left behind when it
// runs in a separate process.
const SynthRun& synth_run(const fs::path& work_dir, bool fresh) {
  static std::optional<SynthRun> cached;
  if (cached) return *cached;
  const auto path = work_dir / "synth_records.txt";
  if (fresh) fs::remove(path);
  if (auto loaded = load_run(path)) {
    cached = std::move(loaded);
    return *cached;
  }
  const auto start = std::chrono::steady_clock::now();
  SynthRun run;
  run.records = run_synth_experiment(SynthConfig{}, kSynthMethods, 0.1, kSynthSims, kSynthSeed);
  run.seconds = seconds_since(start);
  save_run(path, run);
  cached = std::move(run);
  return *cached;
}

// 8. Synthetic regression: directional and interval claims on mean coverage.
Result synth_reproduction(const fs::path& work_dir) {
  const auto& run = synth_run(work_dir, true);
  std::map<Method, double> cov;
  for (const auto& s : summarize(run.records)) cov[s.method] = s.coverage_mean;
  const double unc = cov[Method::kUncorrected];
  const double opt = cov[Method::kOptimal];
  const bool unc_ok = unc < 0.88;
  const bool opt_ok = opt >= 0.87 && opt <= 0.93;
  bool ot_ok = true;
  std::string ot_detail;
  for (auto m : {Method::kOtMinMax, Method::kOtFu}) {
    const double c = cov[m];
    ot_ok = ot_ok && c >= 0.88 && c <= 0.96 && c - unc >= 0.02;
    ot_detail += std::string(", ") + std::string(to_string(m)) + " " + fmt(c);
  }
  const bool time_ok = run.seconds < 900.0;
  std::string failed;
  if (!unc_ok) failed += " uncorrected>=0.88";
  if (!opt_ok) failed += " optimal-outside-[0.87,0.93]";
  if (!ot_ok) failed += " ot-interval-or-margin";
  if (!time_ok) failed += " runtime";
  return {unc_ok && opt_ok && ot_ok && time_ok,
          "100 sims: uncorrected " + fmt(unc) + ", optimal " + fmt(opt) + ot_detail + ", " +
              fmt(run.seconds, 3) + " s" + (failed.empty() ? "" : "; failed:" + failed)};
}

// 9. Objective descent on every learned-weight run of criterion 8.
Result descent(const fs::path& work_dir) {
  const auto& run = synth_run(work_dir, false);
  int checked = 0;
  int bad = 0;
  double worst = -1e300;
  for (const auto& r : run.records) {
    if (!r.trace_head_mean || !r.trace_tail_mean) continue;
    ++checked;
    const double rise = *r.trace_tail_mean - *r.trace_head_mean;
    worst = std::max(worst, rise);
    if (rise > 0.0) ++bad;
  }
  return {checked == 200 && bad == 0,
          std::to_string(checked) + " optimizer runs, " + std::to_string(bad) +
              " with mean(last 10) > mean(first 10), max change " + fmt(worst)};
}

int cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv = {"shiftcp"};
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out;
  std::ostringstream err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  if (code != 0) {
    std::cerr << "shiftcp";
    for (const auto& a : args) std::cerr << ' ' << a;
    std::cerr << " exited " << code << ": " << err.str();
  }
  return code;
}

std::string fixture(const std::string& name) { return (testing::fixture_dir() / name).string(); }

// Every file below dir, relative path -> bytes.
std::map<std::string, std::string> snapshot(const fs::path& dir) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file()) {
      files[fs::relative(entry.path(), dir).string()] = testing::slurp(entry.path());
    }
  }
  return files;
}

// 10. Every seeded command twice, byte-identical artifacts.
Result determinism(const fs::path& work_dir) {
  const std::string cal = fixture("shift100_cal.csv");
  const std::string adapt = fixture("shift100_adapt.csv");
  const std::string test = fixture("shift100_test.csv");
  std::vector<std::map<std::string, std::string>> runs;
  // Same directory both rounds: artifacts record the paths they were given.
  const auto dir = work_dir / "determinism";
  for (int round = 0; round < 2; ++round) {
    fs::remove_all(dir);
    fs::create_directories(dir);
    const auto p = [&](const std::string& name) { return (dir / name).string(); };
    int failures = 0;
    failures += cli({"bound", "--cal", cal, "--test", adapt, "--pair", "fu", "--dkw", "0.05",
                     "--out", p("bound_fu.json")}) != 0;
    failures += cli({"bound", "--cal", cal, "--test", test, "--labeled", "--flavor", "w1",
                     "--out", p("bound_labeled.json")}) != 0;
    failures += cli({"learn", "--cal", cal, "--test", adapt, "--pair", "fu", "--steps", "200",
                     "--out", p("weights.json")}) != 0;
    failures += cli({"evaluate", "--cal", cal, "--weights", p("weights.json"), "--test", test,
                     "--out", p("evaluate.csv")}) != 0;
    failures += cli({"synth", "--sims", "5", "--seed", "42", "--out", p("synth")}) != 0;
    failures += cli({"shift-label", "--in", test, "--seed", "9", "--out", p("shifted.csv")}) != 0;
    const std::string tool = std::string(SHIFTCP_FIXTURE_TOOL) + " --out " + p("fixture") +
                             " > /dev/null";
    failures += std::system(tool.c_str()) != 0;
    if (failures > 0) return {false, std::to_string(failures) + " command(s) failed"};
    runs.push_back(snapshot(dir));
  }
  std::vector<std::string> differing;
  for (const auto& [name, bytes] : runs[0]) {
    const auto it = runs[1].find(name);
    if (it == runs[1].end() || it->second != bytes) differing.push_back(name);
  }
  if (runs[0].size() != runs[1].size()) differing.push_back("<file set>");
  // The committed fixture is what the generator writes today.
  for (const auto& entry : fs::directory_iterator(testing::fixture_dir())) {
    const auto name = "fixture/" + entry.path().filename().string();
    const auto it = runs[0].find(name);
    if (it == runs[0].end() || it->second != testing::slurp(entry.path())) {
      differing.push_back("committed " + entry.path().filename().string());
    }
  }
  std::string detail = std::to_string(runs[0].size()) + " artifacts from 7 commands compared";
  for (const auto& d : differing) detail += "; differs: " + d;
  return {differing.empty(), detail};
}

// Committed 100-class fixture: learned weights cut the total gap by >= 25%.
Result fixture_gap(const fs::path& work_dir) {
  const auto dir = work_dir / "fixture_gap";
  fs::create_directories(dir);
  const auto weights = (dir / "weights.json").string();
  const auto base = (dir / "uncorrected.json").string();
  const auto learned = (dir / "learned.json").string();
  const std::string cal = fixture("shift100_cal.csv");
  const std::string test = fixture("shift100_test.csv");
  if (cli({"learn", "--cal", cal, "--test", fixture("shift100_adapt.csv"), "--out", weights}) != 0 ||
      cli({"evaluate", "--cal", cal, "--test", test, "--out", base}) != 0 ||
      cli({"evaluate", "--cal", cal, "--weights", weights, "--test", test, "--out", learned}) != 0) {
    return {false, "a command failed"};
  }
  const double before = read_json(base)["report"]["total_gap"].get<double>();
  const double after = read_json(learned)["report"]["total_gap"].get<double>();
  const double reduction = 1.0 - after / before;
  return {reduction >= 0.25, "total gap " + fmt(before) + " -> " + fmt(after) + ", reduction " +
                                 fmt(100 * reduction, 3) + "%"};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Acceptance checks"};
  std::vector<std::string> only;
  std::string work_dir = (fs::temp_directory_path() / "shiftcp-acceptance").string();
  app.add_option("--only", only, "Criterion ids to run (default: all)");
  app.add_option("--work-dir", work_dir, "Scratch directory for artifacts and caches");
  CLI11_PARSE(app, argc, argv);
  fs::create_directories(work_dir);

  const std::vector<std::pair<std::string, std::pair<std::string, std::function<Result()>>>> criteria = {
      {"1", {"W1 oracle equivalence", w1_oracle}},
      {"2", {"dominance identity", dominance_identity}},
      {"3", {"sandwich property", sandwich}},
      {"4", {"bound ordering", bound_ordering}},
      {"5", {"bound validity at confidence", bound_validity}},
      {"6", {"gradient correctness", gradient_check}},
      {"7", {"exchangeable-case coverage", exchangeable_coverage}},
      {"8", {"synthetic regression coverage", [&] { return synth_reproduction(work_dir); }}},
      {"9", {"objective descent", [&] { return descent(work_dir); }}},
      {"10", {"determinism", [&] { return determinism(work_dir); }}},
      {"fixture", {"100-class fixture gap reduction", [&] { return fixture_gap(work_dir); }}},
  };

  int failed = 0;
  int ran = 0;
  for (const auto& [id, entry] : criteria) {
    if (!only.empty() && std::find(only.begin(), only.end(), id) == only.end()) continue;
    ++ran;
    Result r;
    try {
      r = entry.second();
    } catch (const std::exception& e) {
      r = {false, std::string("exception: ") + e.what()};
    }
    if (!r.pass) ++failed;
    std::cout << (r.pass ? "PASS" : "FAIL") << "  " << id << "  " << entry.first << ": " << r.detail
              << std::endl;
  }
  if (ran == 0) {
    std::cerr << "no criterion matched --only\n";
    return 2;
  }
  return failed == 0 ? 0 : 1;
}
