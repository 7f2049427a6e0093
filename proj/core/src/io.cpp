#include "shiftcp/io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <system_error>

#include "shiftcp/error.hpp"

namespace shiftcp {
namespace {

namespace fs = std::filesystem;

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    fields.push_back(trim(line.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

std::optional<double> parse_double(std::string_view field) {
  double value = 0.0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end || !std::isfinite(value)) return std::nullopt;
  return value;
}

std::optional<int> parse_int(std::string_view field) {
  int value = 0;
  const char* end = field.data() + field.size();
  const auto [ptr, ec] = std::from_chars(field.data(), end, value);
  if (ec != std::errc() || ptr != end) return std::nullopt;
  return value;
}

struct RawTable {
  std::size_t cols = 0;
  std::vector<std::string> ids;
  std::vector<int> labels;
  std::vector<double> values;
};

// Shared reader for score and probability files; prefix is "s_" or "p_".
RawTable read_table(const fs::path& path, std::string_view prefix, std::string_view what) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  const std::string name = path.string();

  RawTable table;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    const auto text = trim(line);
    if (text.empty()) continue;
    if (!header_seen && text.front() == '#') {
      const auto body = trim(text.substr(1));
      constexpr std::string_view kKey = "version:";
      if (body.substr(0, kKey.size()) == kKey) {
        const auto version = parse_int(trim(body.substr(kKey.size())));
        if (!version || *version != kScoreFormatVersion) {
          throw ParseError(name, line_no, 0, "unsupported format version '" +
                                                 std::string(trim(body.substr(kKey.size()))) + "'");
        }
      }
      continue;
    }
    const auto fields = split(text);
    if (!header_seen) {
      if (fields.size() < 4 || fields[0] != "id" || fields[1] != "label") {
        throw ParseError(name, line_no, 0,
                         "malformed header: expected id,label," + std::string(prefix) + "0,...");
      }
      for (std::size_t c = 2; c < fields.size(); ++c) {
        if (fields[c] != std::string(prefix) + std::to_string(c - 2)) {
          throw ParseError(name, line_no, c + 1,
                           "malformed header: expected '" + std::string(prefix) +
                               std::to_string(c - 2) + "', found '" + std::string(fields[c]) + "'");
        }
      }
      table.cols = fields.size() - 2;
      header_seen = true;
      continue;
    }
    if (fields.size() != table.cols + 2) {
      throw ParseError(name, line_no, 0,
                       "ragged row: " + std::to_string(fields.size()) + " fields, header has " +
                           std::to_string(table.cols + 2));
    }
    if (fields[0].empty()) throw ParseError(name, line_no, 1, "malformed row: empty id");
    const auto label = parse_int(fields[1]);
    if (!label) {
      throw ParseError(name, line_no, 2,
                       "malformed row: label '" + std::string(fields[1]) + "' is not an integer");
    }
    if (*label < kUnlabeled || *label >= static_cast<int>(table.cols)) {
      throw ParseError(name, line_no, 2,
                       "label " + std::to_string(*label) + " out of range for " +
                           std::to_string(table.cols) + " classes");
    }
    for (std::size_t c = 0; c < table.cols; ++c) {
      const auto value = parse_double(fields[c + 2]);
      if (!value) {
        throw ParseError(name, line_no, c + 3,
                         "malformed row: " + std::string(what) + " '" +
                             std::string(fields[c + 2]) + "' is not a number");
      }
      if (*value < 0.0 || *value > 1.0) {
        throw ParseError(name, line_no, c + 3,
                         std::string(what) + " " + std::string(fields[c + 2]) + " in column " +
                             std::string(prefix) + std::to_string(c) + " is outside [0, 1]");
      }
      table.values.push_back(*value);
    }
    table.ids.emplace_back(fields[0]);
    table.labels.push_back(*label);
  }
  if (!header_seen) throw ParseError(name, line_no, 0, "missing header row");
  return table;
}

std::string table_text(const ScoreMatrix& m, std::span<const double> values,
                       std::span<const int> labels, std::span<const std::string> ids,
                       std::string_view prefix) {
  std::string out = "# version: " + std::to_string(kScoreFormatVersion) + "\nid,label";
  for (std::size_t c = 0; c < m.cols(); ++c) {
    out += ',';
    out += prefix;
    out += std::to_string(c);
  }
  out += '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out += ids.empty() ? std::to_string(r) : ids[r];
    out += ',';
    out += std::to_string(labels.empty() ? kUnlabeled : labels[r]);
    for (std::size_t c = 0; c < m.cols(); ++c) {
      out += ',';
      out += format_double(values[r * m.cols() + c]);
    }
    out += '\n';
  }
  return out;
}

nlohmann::json band_json(const DkwBand& band) {
  return {{"epsilon", band.epsilon},
          {"confidence", band.confidence},
          {"n_effective", band.n_effective}};
}

}  // namespace

std::vector<std::size_t> ScoreFile::labeled_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] != kUnlabeled) rows.push_back(i);
  }
  return rows;
}

std::vector<std::size_t> ScoreFile::unlabeled_rows() const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == kUnlabeled) rows.push_back(i);
  }
  return rows;
}

fs::path probs_companion(const fs::path& path) {
  fs::path out = path;
  out.replace_extension();
  out += ".probs.csv";
  return out;
}

ScoreFile load_score_matrix(const fs::path& path) {
  if (!fs::exists(path)) throw ValidationError("no such file: " + path.string());
  auto table = read_table(path, "s_", "score");
  if (table.cols < 2) {
    throw ParseError(path.string(), 1, 0, "need at least two classes");
  }
  std::optional<std::vector<double>> probs;
  const auto companion = probs_companion(path);
  if (fs::exists(companion)) {
    auto p = read_table(companion, "p_", "probability");
    if (p.cols != table.cols || p.ids.size() != table.ids.size()) {
      throw ValidationError(companion.string() + ": shape " + std::to_string(p.ids.size()) + "x" +
                            std::to_string(p.cols) + " does not match scores " +
                            std::to_string(table.ids.size()) + "x" + std::to_string(table.cols));
    }
    for (std::size_t r = 0; r < p.ids.size(); ++r) {
      if (p.ids[r] != table.ids[r]) {
        throw ValidationError(companion.string() + ": row " + std::to_string(r) + " has id '" +
                              p.ids[r] + "', scores have '" + table.ids[r] + "'");
      }
    }
    probs = std::move(p.values);
  }
  const std::size_t rows = table.ids.size();
  const bool has_probs = probs.has_value();
  try {
    ScoreMatrix matrix(rows, table.cols, std::move(table.values), std::move(probs));
    ScoreFileHeader header;
    header.n_classes = table.cols;
    header.has_probs = has_probs;
    for (int label : table.labels) header.has_labels = header.has_labels || label != kUnlabeled;
    return ScoreFile{header, std::move(matrix), std::move(table.labels), std::move(table.ids)};
  } catch (const ValidationError& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void save_score_matrix(const fs::path& path, const ScoreMatrix& scores,
                       std::span<const int> labels, std::span<const std::string> ids) {
  if (!labels.empty() && labels.size() != scores.rows()) {
    throw ValidationError("labels length does not match the number of rows");
  }
  if (!ids.empty() && ids.size() != scores.rows()) {
    throw ValidationError("ids length does not match the number of rows");
  }
  write_text(path, table_text(scores, scores.data(), labels, ids, "s_"));
  if (const auto probs = scores.probabilities()) {
    write_text(probs_companion(path), table_text(scores, *probs, labels, ids, "p_"));
  }
}

void save_score_file(const fs::path& path, const ScoreFile& file) {
  save_score_matrix(path, file.scores, file.labels, file.ids);
}

std::string format_double(double value) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  if (ec != std::errc()) throw std::runtime_error("cannot format double");
  return std::string(buf, ptr);
}

std::optional<Flavor> parse_flavor(std::string_view name) {
  if (name == "cdf" || name == "weighted_cdf") return Flavor::kWeightedCdf;
  if (name == "w1") return Flavor::kW1;
  return std::nullopt;
}

std::optional<Estimator> parse_estimator(std::string_view name) {
  if (name == "grid") return Estimator::kGrid;
  if (name == "expectation") return Estimator::kExpectation;
  return std::nullopt;
}

std::optional<PairKind> parse_pair(std::string_view name) {
  if (name == "minmax") return PairKind::kMinMax;
  if (name == "fu") return PairKind::kFU;
  return std::nullopt;
}

std::string_view pair_option_name(PairKind kind) {
  switch (kind) {
    case PairKind::kMinMax:
      return "minmax";
    case PairKind::kFU:
      return "fu";
    case PairKind::kCustom:
      return "custom";
  }
  return "custom";
}

nlohmann::json to_json(const BoundReport& report) {
  nlohmann::json j;
  j["value"] = report.display_value();
  j["raw_value"] = report.value;
  j["bound"] = report.bound();
  j["flavor"] = to_string(report.flavor);
  j["labeled"] = report.labeled;
  j["estimator"] = to_string(report.estimator);
  j["grid_size"] = report.grid_size;
  j["max_density"] = report.max_density;
  j["bandwidth"] = report.bandwidth;
  j["dominance_verified"] = report.dominance_verified;
  j["components"] = report.components;
  if (report.dkw) {
    j["dkw"] = {{"calibration", band_json(report.dkw->calibration)},
                {"test", band_json(report.dkw->test)},
                {"raw_value", report.dkw->raw_value},
                {"corrected_value", report.dkw->corrected_value},
                {"resampled", report.dkw->resampled},
                {"resample_size", report.dkw->resample_size}};
  } else {
    j["dkw"] = nullptr;
  }
  return j;
}

nlohmann::json to_json(const CoverageReport& report) {
  nlohmann::json per_alpha = nlohmann::json::array();
  for (const auto& m : report.per_alpha) {
    per_alpha.push_back({{"alpha", m.alpha},
                         {"threshold", m.threshold},
                         {"coverage", m.coverage},
                         {"mean_size", m.mean_size}});
  }
  return {{"method", report.method},
          {"convention", report.convention == QuantileConvention::kConformal ? "conformal" : "plain"},
          {"total_gap", report.total_gap},
          {"alpha_grid", report.alpha_grid},
          {"per_alpha", per_alpha}};
}

nlohmann::json to_json(const OptimizerConfig& config) {
  nlohmann::json j = {{"steps", config.steps},
                      {"learning_rate", config.learning_rate},
                      {"beta1", config.beta1},
                      {"beta2", config.beta2},
                      {"epsilon_adam", config.epsilon_adam},
                      {"flavor", to_string(config.flavor)},
                      {"estimator", to_string(config.estimator)},
                      {"grid_size", config.grid_size},
                      {"refit_bandwidth", config.refit_bandwidth},
                      {"seed", config.seed}};
  j["bandwidth"] = config.bandwidth ? nlohmann::json(*config.bandwidth) : nlohmann::json(nullptr);
  return j;
}

nlohmann::json to_json(const SynthConfig& config) {
  return {{"n_train", config.n_train}, {"n_cal", config.n_cal},
          {"n_adapt", config.n_adapt}, {"n_test", config.n_test},
          {"bins", config.bins},       {"tilt", config.tilt},
          {"noise_sigma", config.noise_sigma}, {"seed", config.seed}};
}

nlohmann::json to_json(std::span<const MethodSummary> summary) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& s : summary) {
    out.push_back({{"method", to_string(s.method)},
                   {"count", s.count},
                   {"coverage_mean", s.coverage_mean},
                   {"coverage_sd", s.coverage_sd},
                   {"size_mean", s.size_mean},
                   {"size_sd", s.size_sd}});
  }
  return out;
}

nlohmann::json weights_json(const LearnResult& result, const nlohmann::json& config) {
  const auto w = result.weights.weights();
  return {{"weights", std::vector<double>(w.begin(), w.end())},
          {"objective_trace", result.trace},
          {"bandwidth", result.bandwidth},
          {"effective_sample_size", effective_sample_size(w)},
          {"config", config}};
}

std::vector<double> load_weights(const fs::path& path) {
  const auto j = read_json(path);
  if (!j.is_object() || !j.contains("weights") || !j["weights"].is_array()) {
    throw ValidationError(path.string() + ": missing \"weights\" array");
  }
  std::vector<double> weights;
  double sum = 0.0;
  for (const auto& v : j["weights"]) {
    if (!v.is_number()) throw ValidationError(path.string() + ": non-numeric weight");
    const double x = v.get<double>();
    if (!(x >= 0.0)) throw ValidationError(path.string() + ": negative weight");
    weights.push_back(x);
    sum += x;
  }
  if (weights.empty()) throw ValidationError(path.string() + ": empty weights");
  if (std::abs(sum - 1.0) > 1e-6) {
    throw ValidationError(path.string() + ": weights sum to " + std::to_string(sum));
  }
  return weights;
}

std::string coverage_csv(const CoverageReport& report) {
  std::string out = "alpha,coverage,mean_size,method\n";
  for (const auto& m : report.per_alpha) {
    out += format_double(m.alpha) + "," + format_double(m.coverage) + "," +
           format_double(m.mean_size) + "," + report.method + "\n";
  }
  return out;
}

std::string sim_records_csv(std::span<const SimRecord> records) {
  std::string out = "sim,method,alpha,coverage,mean_size\n";
  for (const auto& r : records) {
    out += std::to_string(r.sim) + "," + std::string(to_string(r.method)) + "," +
           format_double(r.alpha) + "," + format_double(r.coverage) + "," +
           format_double(r.mean_size) + "\n";
  }
  return out;
}

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(path.string() + ": " + e.what());
  }
}

void write_json(const fs::path& path, const nlohmann::json& value) {
  write_text(path, value.dump(2) + "\n");
}

void write_text(const fs::path& path, std::string_view text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

}  // namespace shiftcp
