#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "shiftcp/empirical.hpp"

namespace shiftcp {

// Per-sample, per-class nonconformity scores, row-major, entries in [0, 1].
// Optionally carries the model probabilities the scores were derived from
// (score = 1 - probability).
class ScoreMatrix {
 public:
  // Throws ValidationError on shape mismatch, entries outside [0, 1], rows of
  // probabilities that do not sum to one (1e-6), or scores that disagree with
  // 1 - probability by more than 1e-6.
  ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> scores,
              std::optional<std::vector<double>> probabilities = std::nullopt);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double score(std::size_t row, std::size_t col) const { return scores_[row * cols_ + col]; }
  std::span<const double> row(std::size_t r) const {
    return std::span<const double>(scores_).subspan(r * cols_, cols_);
  }
  std::span<const double> data() const noexcept { return scores_; }

  bool has_probabilities() const noexcept { return probabilities_.has_value(); }
  // Requires has_probabilities().
  std::span<const double> probability_row(std::size_t r) const {
    return std::span<const double>(*probabilities_).subspan(r * cols_, cols_);
  }
  std::optional<std::span<const double>> probabilities() const {
    if (!probabilities_) return std::nullopt;
    return std::span<const double>(*probabilities_);
  }

  // Copy of the selected rows, in the given order.
  ScoreMatrix select_rows(std::span<const std::size_t> indices) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> scores_;
  std::optional<std::vector<double>> probabilities_;
};

// Scores of the labeled classes, one per row. Throws ValidationError when a
// label is outside [0, cols).
std::vector<double> true_label_scores(const ScoreMatrix& scores,
                                      std::span<const int> labels);

enum class PairKind { kMinMax, kFU, kCustom };

std::string_view to_string(PairKind kind);

// (lower, upper) with the intent upper >= Q >= lower in stochastic order.
struct AuxiliaryPair {
  WeightedEmpirical lower;
  WeightedEmpirical upper;
  PairKind kind;
  // For kMinMax this is always true. Otherwise it records whether
  // dominates(upper, lower) held for the constructed pair.
  bool dominance_verified;
};

// Row minima and row maxima as uniform empirical distributions.
AuxiliaryPair min_max_pair(const ScoreMatrix& scores);

// lower: one score per row at a class drawn from the row's model
// probabilities; upper: one score per row at a uniformly drawn class.
// Requires model probabilities.
AuxiliaryPair f_u_pair(const ScoreMatrix& scores, std::uint64_t seed);

// User-supplied pair; dominance is checked and recorded, not enforced.
AuxiliaryPair custom_pair(WeightedEmpirical lower, WeightedEmpirical upper);

// Uniform empirical over labeled test scores.
WeightedEmpirical labeled_empirical(std::span<const double> scores);

}  // namespace shiftcp
