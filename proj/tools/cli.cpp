#include "cli.hpp"

#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "shiftcp/auxiliary.hpp"
#include "shiftcp/baselines.hpp"
#include "shiftcp/bounds.hpp"
#include "shiftcp/conformal.hpp"
#include "shiftcp/density.hpp"
#include "shiftcp/error.hpp"
#include "shiftcp/experiments.hpp"
#include "shiftcp/io.hpp"
#include "shiftcp/reweight.hpp"

namespace shiftcp {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

constexpr std::uint64_t kDefaultSeed = 42;

struct BoundArgs {
  std::string cal;
  std::string test;
  bool labeled = false;
  std::string flavor = "cdf";
  std::string estimator = "grid";
  std::string pair = "minmax";
  std::optional<double> dkw;
  std::size_t grid_size = kDefaultGridSize;
  std::optional<double> bandwidth;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

struct LearnArgs {
  std::string cal;
  std::string test;
  std::string pair = "minmax";
  std::string flavor = "cdf";
  std::string estimator = "grid";
  std::size_t steps = 1000;
  double lr = 1e-3;
  std::size_t grid_size = kDefaultGridSize;
  std::optional<double> bandwidth;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

struct EvaluateArgs {
  std::string cal;
  std::string weights;
  std::string test;
  std::vector<double> alphas;
  std::string method;
  std::string out;
};

struct SynthArgs {
  std::size_t sims = 100;
  double alpha = 0.1;
  std::vector<std::string> methods;
  std::uint64_t seed = kDefaultSeed;
  std::size_t steps = 1000;
  double lr = 1e-3;
  std::string out;
};

struct ShiftArgs {
  std::string in;
  double gamma = 10.0;
  double min_fraction = 1.0 / 3.0;
  std::uint64_t seed = kDefaultSeed;
  std::string out;
};

Flavor flavor_arg(const std::string& name) {
  if (const auto f = parse_flavor(name)) return *f;
  throw ValidationError("unknown flavor '" + name + "' (expected cdf or w1)");
}

Estimator estimator_arg(const std::string& name) {
  if (const auto e = parse_estimator(name)) return *e;
  throw ValidationError("unknown estimator '" + name + "' (expected grid or expectation)");
}

PairKind pair_arg(const std::string& name) {
  if (const auto p = parse_pair(name)) return *p;
  throw ValidationError("unknown pair '" + name + "' (expected minmax or fu)");
}

AuxiliaryPair make_pair(PairKind kind, const ScoreMatrix& scores, std::uint64_t seed) {
  return kind == PairKind::kMinMax ? min_max_pair(scores) : f_u_pair(scores, seed);
}

// Calibration files must be fully labeled.
std::vector<double> calibration_scores(const ScoreFile& file, const std::string& path) {
  if (file.scores.rows() == 0) throw ValidationError(path + ": no rows");
  if (!file.unlabeled_rows().empty()) {
    throw ValidationError(path + ": calibration rows must all be labeled");
  }
  return true_label_scores(file.scores, file.labels);
}

// foo.csv -> foo.meta.json
fs::path meta_path(const fs::path& out) {
  fs::path meta = out;
  meta.replace_extension();
  meta += ".meta.json";
  return meta;
}

std::optional<std::size_t> thread_cap() {
  const char* env = std::getenv("SHIFTCP_THREADS");
  if (env == nullptr || *env == '\0') return std::nullopt;
  char* end = nullptr;
  const auto value = std::strtoull(env, &end, 10);
  if (*end != '\0' || value == 0) {
    throw ValidationError("SHIFTCP_THREADS must be a positive integer");
  }
  return static_cast<std::size_t>(value);
}

void run_bound(const BoundArgs& a) {
  const auto cal_file = load_score_matrix(a.cal);
  const auto test_file = load_score_matrix(a.test);
  const auto cal_scores = calibration_scores(cal_file, a.cal);
  const auto p = WeightedEmpirical::from_scores(cal_scores);

  BoundOptions options;
  options.flavor = flavor_arg(a.flavor);
  options.estimator = estimator_arg(a.estimator);
  options.grid_size = a.grid_size;
  const auto kde = KdeDensity::fit(cal_scores, a.bandwidth);

  json config = {{"command", "bound"},
                 {"cal", a.cal},
                 {"test", a.test},
                 {"labeled", a.labeled},
                 {"flavor", to_string(options.flavor)},
                 {"estimator", to_string(options.estimator)},
                 {"grid_size", a.grid_size},
                 {"seed", a.seed}};
  config["pair"] = a.labeled ? json(nullptr) : json(a.pair);
  config["dkw"] = a.dkw ? json(*a.dkw) : json(nullptr);
  config["bandwidth"] = a.bandwidth ? json(*a.bandwidth) : json(nullptr);

  BoundReport report;
  std::size_t test_used = 0;
  if (a.labeled) {
    const auto rows = test_file.labeled_rows();
    if (rows.empty()) throw ValidationError(a.test + ": no labeled rows for --labeled");
    const auto sub = test_file.scores.select_rows(rows);
    std::vector<int> labels;
    for (auto r : rows) labels.push_back(test_file.labels[r]);
    const auto q = labeled_empirical(true_label_scores(sub, labels));
    test_used = rows.size();
    report = a.dkw ? dkw_corrected_bound(p, q, kde.bandwidth(), options, *a.dkw, a.seed)
                   : labeled_bound(p, q, kde, options);
  } else {
    if (test_file.scores.rows() == 0) throw ValidationError(a.test + ": no rows");
    const auto pair = make_pair(pair_arg(a.pair), test_file.scores, a.seed);
    test_used = test_file.scores.rows();
    report = a.dkw ? dkw_corrected_bound(p, pair, kde.bandwidth(), options, *a.dkw, a.seed)
                   : unlabeled_bound(p, pair, kde, options);
  }
  write_json(a.out, {{"report", to_json(report)},
                     {"n_calibration", cal_scores.size()},
                     {"n_test_used", test_used},
                     {"config", config}});
}

void run_learn(const LearnArgs& a) {
  const auto cal_file = load_score_matrix(a.cal);
  const auto test_file = load_score_matrix(a.test);
  const auto cal_scores = calibration_scores(cal_file, a.cal);
  if (test_file.scores.rows() == 0) throw ValidationError(a.test + ": no rows");

  OptimizerConfig config;
  config.steps = a.steps;
  config.learning_rate = a.lr;
  config.flavor = flavor_arg(a.flavor);
  config.estimator = estimator_arg(a.estimator);
  config.grid_size = a.grid_size;
  config.bandwidth = a.bandwidth;
  config.seed = a.seed;
  config.validate();
  const auto kind = pair_arg(a.pair);
  const auto pair = make_pair(kind, test_file.scores, a.seed);
  const auto result = learn_weights(cal_scores, pair, config);

  json full = to_json(config);
  full["command"] = "learn";
  full["cal"] = a.cal;
  full["test"] = a.test;
  full["pair"] = pair_option_name(kind);
  write_json(a.out, weights_json(result, full));
}

void run_evaluate(const EvaluateArgs& a) {
  const auto cal_file = load_score_matrix(a.cal);
  const auto test_file = load_score_matrix(a.test);
  const auto cal_scores = calibration_scores(cal_file, a.cal);

  std::optional<std::vector<double>> weights;
  if (!a.weights.empty()) {
    weights = load_weights(a.weights);
    if (weights->size() != cal_scores.size()) {
      throw ValidationError(a.weights + ": " + std::to_string(weights->size()) +
                            " weights for " + std::to_string(cal_scores.size()) +
                            " calibration rows");
    }
  }
  const auto cal = weights ? WeightedEmpirical::from_scores(cal_scores, *weights)
                           : WeightedEmpirical::from_scores(cal_scores);

  const auto rows = test_file.labeled_rows();
  if (rows.empty()) throw ValidationError(a.test + ": no labeled rows to evaluate");
  const auto test = test_file.scores.select_rows(rows);
  std::vector<int> labels;
  for (auto r : rows) labels.push_back(test_file.labels[r]);

  const auto alphas = a.alphas.empty() ? default_alpha_grid() : a.alphas;
  for (double alpha : alphas) {
    if (!(alpha > 0.0 && alpha < 1.0)) {
      throw ValidationError("alpha " + std::to_string(alpha) + " is outside (0, 1)");
    }
  }
  std::string method = a.method;
  if (method.empty()) method = weights ? "weighted" : "uncorrected";
  const auto convention = effective_convention(cal, QuantileConvention::kConformal);

  CoverageReport report;
  if (method == "ecp") {
    if (weights) throw ValidationError("ecp does not take calibration weights");
    std::vector<double> thresholds;
    for (double alpha : alphas) thresholds.push_back(ecp_threshold(cal, test, alpha, convention));
    report = evaluate_thresholds(test, labels, alphas, thresholds, method);
    report.convention = convention;
  } else {
    report = evaluate(cal, test, labels, alphas, convention, method);
  }

  const json config = {{"command", "evaluate"},
                       {"cal", a.cal},
                       {"weights", a.weights.empty() ? json(nullptr) : json(a.weights)},
                       {"test", a.test},
                       {"alphas", alphas},
                       {"method", method},
                       {"n_test_used", rows.size()}};
  const fs::path out(a.out);
  if (out.extension() == ".json") {
    write_json(out, {{"report", to_json(report)}, {"config", config}});
  } else {
    write_text(out, coverage_csv(report));
    write_json(meta_path(out), {{"report", to_json(report)}, {"config", config}});
  }
}

void run_synth(const SynthArgs& a) {
  std::vector<Method> methods;
  if (a.methods.empty()) {
    const auto all = all_methods();
    methods.assign(all.begin(), all.end());
  }
  for (const auto& name : a.methods) {
    const auto m = parse_method(name);
    if (!m) throw ValidationError("unknown method '" + name + "'");
    methods.push_back(*m);
  }
  if (a.sims == 0) throw ValidationError("--sims must be at least 1");

  SynthConfig config;
  config.seed = a.seed;
  SynthRunOptions options;
  options.optimizer.steps = a.steps;
  options.optimizer.learning_rate = a.lr;
  if (const auto cap = thread_cap()) options.threads = *cap;

  const auto records = run_synth_experiment(config, methods, a.alpha, a.sims, a.seed, options);
  const auto summary = summarize(records);

  std::vector<std::string> names;
  for (auto m : methods) names.emplace_back(to_string(m));
  const fs::path dir(a.out);
  write_text(dir / "sims.csv", sim_records_csv(records));
  write_json(dir / "summary.json",
             {{"summary", to_json(std::span<const MethodSummary>(summary))},
              {"config",
               {{"command", "synth"},
                {"sims", a.sims},
                {"alpha", a.alpha},
                {"methods", names},
                {"seed", a.seed},
                {"data", to_json(config)},
                {"optimizer", to_json(options.optimizer)}}}});
}

void run_shift_label(const ShiftArgs& a) {
  const auto file = load_score_matrix(a.in);
  if (!file.unlabeled_rows().empty()) {
    throw ValidationError(a.in + ": label shift needs every row labeled");
  }
  const auto chosen = label_shift_resample(file.labels, file.scores, a.gamma, a.seed, a.min_fraction);
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (auto r : chosen) {
    labels.push_back(file.labels[r]);
    ids.push_back(file.ids[r]);
  }
  const fs::path out(a.out);
  if (fs::exists(out) && fs::exists(a.in) && fs::equivalent(out, fs::path(a.in))) {
    throw ValidationError("--out must differ from --in");
  }
  save_score_matrix(out, file.scores.select_rows(chosen), labels, ids);
  write_json(meta_path(out), {{"config",
                               {{"command", "shift-label"},
                                {"in", a.in},
                                {"gamma", a.gamma},
                                {"min_fraction", a.min_fraction},
                                {"seed", a.seed}}},
                              {"n_in", file.scores.rows()},
                              {"n_out", chosen.size()},
                              {"rows", chosen}});
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Conformal prediction under distribution shift"};
  app.require_subcommand(1);

  BoundArgs bound;
  auto* b = app.add_subcommand("bound", "Bound the total coverage gap");
  b->add_option("--cal", bound.cal, "Labeled calibration scores")->required()->check(CLI::ExistingFile);
  b->add_option("--test", bound.test, "Test scores")->required()->check(CLI::ExistingFile);
  b->add_flag("--labeled", bound.labeled, "Use the labeled test rows directly");
  b->add_option("--flavor", bound.flavor, "cdf or w1")->capture_default_str();
  b->add_option("--estimator", bound.estimator, "grid or expectation")->capture_default_str();
  b->add_option("--pair", bound.pair, "minmax or fu")->capture_default_str();
  b->add_option("--dkw", bound.dkw, "Add DKW terms at this failure probability");
  b->add_option("--grid-size", bound.grid_size, "Density grid points")->capture_default_str();
  b->add_option("--bandwidth", bound.bandwidth, "Fixed KDE bandwidth");
  b->add_option("--seed", bound.seed)->capture_default_str();
  b->add_option("--out", bound.out, "Report JSON")->required();

  LearnArgs learn;
  auto* l = app.add_subcommand("learn", "Learn calibration weights");
  l->add_option("--cal", learn.cal, "Labeled calibration scores")->required()->check(CLI::ExistingFile);
  l->add_option("--test", learn.test, "Unlabeled test scores")->required()->check(CLI::ExistingFile);
  l->add_option("--pair", learn.pair, "minmax or fu")->capture_default_str();
  l->add_option("--flavor", learn.flavor, "cdf or w1")->capture_default_str();
  l->add_option("--estimator", learn.estimator, "grid or expectation")->capture_default_str();
  l->add_option("--steps", learn.steps)->capture_default_str();
  l->add_option("--lr", learn.lr)->capture_default_str();
  l->add_option("--grid-size", learn.grid_size)->capture_default_str();
  l->add_option("--bandwidth", learn.bandwidth, "Fixed KDE bandwidth");
  l->add_option("--seed", learn.seed)->capture_default_str();
  l->add_option("--out", learn.out, "Weights JSON")->required();

  EvaluateArgs eval;
  auto* e = app.add_subcommand("evaluate", "Coverage and set size on labeled test rows");
  e->add_option("--cal", eval.cal, "Labeled calibration scores")->required()->check(CLI::ExistingFile);
  e->add_option("--weights", eval.weights, "Weights JSON from learn")->check(CLI::ExistingFile);
  e->add_option("--test", eval.test, "Labeled test scores")->required()->check(CLI::ExistingFile);
  e->add_option("--alphas", eval.alphas, "Comma-separated miscoverage levels")->delimiter(',');
  e->add_option("--method", eval.method, "Label for the report; ecp switches thresholds");
  e->add_option("--out", eval.out, "CSV report (or .json)")->required();

  SynthArgs synth;
  auto* s = app.add_subcommand("synth", "Synthetic regression simulations");
  s->add_option("--sims", synth.sims)->capture_default_str();
  s->add_option("--alpha", synth.alpha)->capture_default_str();
  s->add_option("--methods", synth.methods, "Comma-separated method names")->delimiter(',');
  s->add_option("--seed", synth.seed)->capture_default_str();
  s->add_option("--steps", synth.steps, "Optimizer steps for OT methods")->capture_default_str();
  s->add_option("--lr", synth.lr, "Optimizer learning rate for OT methods")->capture_default_str();
  s->add_option("--out", synth.out, "Output directory")->required();

  ShiftArgs shift;
  auto* sl = app.add_subcommand("shift-label", "Dirichlet label-shift resample");
  sl->add_option("--in", shift.in, "Labeled scores")->required()->check(CLI::ExistingFile);
  sl->add_option("--gamma", shift.gamma)->capture_default_str();
  sl->add_option("--min-fraction", shift.min_fraction)->capture_default_str();
  sl->add_option("--seed", shift.seed)->capture_default_str();
  sl->add_option("--out", shift.out, "Resampled scores")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& ex) {
    const int code = app.exit(ex, out, err);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*b) run_bound(bound);
    if (*l) run_learn(learn);
    if (*e) run_evaluate(eval);
    if (*s) run_synth(synth);
    if (*sl) run_shift_label(shift);
  } catch (const ValidationError& ex) {
    err << "error: " << ex.what() << '\n';
    return 2;
  } catch (const std::exception& ex) {
    err << "internal error: " << ex.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace shiftcp
