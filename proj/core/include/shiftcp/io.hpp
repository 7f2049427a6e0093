#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "shiftcp/auxiliary.hpp"
#include "shiftcp/bounds.hpp"
#include "shiftcp/conformal.hpp"
#include "shiftcp/experiments.hpp"
#include "shiftcp/reweight.hpp"

namespace shiftcp {

inline constexpr int kScoreFormatVersion = 1;
inline constexpr int kUnlabeled = -1;

struct ScoreFileHeader {
  int version = kScoreFormatVersion;
  std::size_t n_classes = 0;
  bool has_labels = false;  // at least one row carries a label
  bool has_probs = false;   // a companion probability file was read
};

struct ScoreFile {
  ScoreFileHeader header;
  ScoreMatrix scores;
  std::vector<int> labels;  // kUnlabeled for rows without a label
  std::vector<std::string> ids;

  // Indices of rows with a label, ascending.
  std::vector<std::size_t> labeled_rows() const;
  // Indices of rows without a label, ascending.
  std::vector<std::size_t> unlabeled_rows() const;
};

// foo.csv -> foo.probs.csv
std::filesystem::path probs_companion(const std::filesystem::path& path);

// Reads `id,label,s_0,...,s_{K-1}` rows, optionally preceded by a
// `# version: 1` line, plus the `.probs.csv` companion when one exists.
// Throws ParseError for malformed rows, out-of-range scores, ragged rows and
// labels outside [-1, K), and ValidationError for a missing file.
ScoreFile load_score_matrix(const std::filesystem::path& path);

// Writes the scores (and the probability companion when the matrix has
// probabilities) with shortest round-trip formatting, so load recovers
// every value exactly. Empty ids mean 0, 1, 2, ...
void save_score_matrix(const std::filesystem::path& path, const ScoreMatrix& scores,
                       std::span<const int> labels, std::span<const std::string> ids = {});
void save_score_file(const std::filesystem::path& path, const ScoreFile& file);

// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

std::optional<Flavor> parse_flavor(std::string_view name);      // "cdf", "w1"
std::optional<Estimator> parse_estimator(std::string_view name);  // "grid", "expectation"
std::optional<PairKind> parse_pair(std::string_view name);      // "minmax", "fu"
std::string_view pair_option_name(PairKind kind);

nlohmann::json to_json(const BoundReport& report);
nlohmann::json to_json(const CoverageReport& report);
nlohmann::json to_json(const OptimizerConfig& config);
nlohmann::json to_json(const SynthConfig& config);
nlohmann::json to_json(std::span<const MethodSummary> summary);

// Weights file: {"weights": [...], "objective_trace": [...], "bandwidth",
// "config": {...}}.
nlohmann::json weights_json(const LearnResult& result, const nlohmann::json& config);
// Reads the "weights" array back. Throws ValidationError when it is missing,
// empty, negative or does not sum to one within 1e-6.
std::vector<double> load_weights(const std::filesystem::path& path);

// alpha,coverage,mean_size,method
std::string coverage_csv(const CoverageReport& report);
// sim,method,alpha,coverage,mean_size
std::string sim_records_csv(std::span<const SimRecord> records);

nlohmann::json read_json(const std::filesystem::path& path);
void write_json(const std::filesystem::path& path, const nlohmann::json& value);
void write_text(const std::filesystem::path& path, std::string_view text);

}  // namespace shiftcp
