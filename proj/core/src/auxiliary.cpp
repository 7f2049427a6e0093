#include "shiftcp/auxiliary.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "shiftcp/error.hpp"

namespace shiftcp {
namespace {

constexpr double kProbabilityTolerance = 1e-6;

}  // namespace

ScoreMatrix::ScoreMatrix(std::size_t rows, std::size_t cols, std::vector<double> scores,
                         std::optional<std::vector<double>> probabilities)
    : rows_(rows), cols_(cols), scores_(std::move(scores)),
      probabilities_(std::move(probabilities)) {
  if (scores_.size() != rows_ * cols_) {
    throw ValidationError("score matrix has " + std::to_string(scores_.size()) +
                          " entries, expected " + std::to_string(rows_ * cols_));
  }
  for (std::size_t i = 0; i < scores_.size(); ++i) {
    const double s = scores_[i];
    if (!(s >= 0.0 && s <= 1.0)) {
      throw ValidationError("score at row " + std::to_string(i / cols_) + ", column " +
                            std::to_string(i % cols_) + " is outside [0, 1]");
    }
  }
  if (!probabilities_) return;
  if (probabilities_->size() != scores_.size()) {
    throw ValidationError("probability matrix shape does not match the score matrix");
  }
  for (std::size_t r = 0; r < rows_; ++r) {
    double total = 0.0;
    for (std::size_t c = 0; c < cols_; ++c) {
      const double p = (*probabilities_)[r * cols_ + c];
      if (!(p >= 0.0 && p <= 1.0)) {
        throw ValidationError("probability at row " + std::to_string(r) + ", column " +
                              std::to_string(c) + " is outside [0, 1]");
      }
      if (std::abs(scores_[r * cols_ + c] - (1.0 - p)) > kProbabilityTolerance) {
        throw ValidationError("score at row " + std::to_string(r) + ", column " +
                              std::to_string(c) + " is not 1 - probability");
      }
      total += p;
    }
    if (std::abs(total - 1.0) > kProbabilityTolerance) {
      throw ValidationError("probabilities in row " + std::to_string(r) +
                            " do not sum to one");
    }
  }
}

ScoreMatrix ScoreMatrix::select_rows(std::span<const std::size_t> indices) const {
  std::vector<double> scores;
  scores.reserve(indices.size() * cols_);
  std::optional<std::vector<double>> probs;
  if (probabilities_) {
    probs.emplace();
    probs->reserve(indices.size() * cols_);
  }
  for (std::size_t index : indices) {
    if (index >= rows_) throw ValidationError("row index out of range");
    const auto r = row(index);
    scores.insert(scores.end(), r.begin(), r.end());
    if (probs) {
      const auto p = probability_row(index);
      probs->insert(probs->end(), p.begin(), p.end());
    }
  }
  return ScoreMatrix(indices.size(), cols_, std::move(scores), std::move(probs));
}

std::vector<double> true_label_scores(const ScoreMatrix& scores,
                                      std::span<const int> labels) {
  if (labels.size() != scores.rows()) {
    throw ValidationError("labels length does not match the number of rows");
  }
  std::vector<double> out(labels.size());
  for (std::size_t r = 0; r < labels.size(); ++r) {
    const int label = labels[r];
    if (label < 0 || static_cast<std::size_t>(label) >= scores.cols()) {
      throw ValidationError("label " + std::to_string(label) + " in row " +
                            std::to_string(r) + " is out of range");
    }
    out[r] = scores.score(r, static_cast<std::size_t>(label));
  }
  return out;
}

std::string_view to_string(PairKind kind) {
  switch (kind) {
    case PairKind::kMinMax: return "min_max";
    case PairKind::kFU: return "f_U";
    case PairKind::kCustom: return "custom";
  }
  return "unknown";
}

AuxiliaryPair min_max_pair(const ScoreMatrix& scores) {
  if (scores.rows() == 0) throw ValidationError("min/max pair needs at least one row");
  if (scores.cols() < 2) throw ValidationError("min/max pair needs at least two classes");
  std::vector<double> lows(scores.rows());
  std::vector<double> highs(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    const auto [lo, hi] = std::minmax_element(scores.row(r).begin(), scores.row(r).end());
    lows[r] = *lo;
    highs[r] = *hi;
  }
  auto lower = WeightedEmpirical::from_scores(lows);
  auto upper = WeightedEmpirical::from_scores(highs);
  const bool verified = dominates(upper, lower, 0.0);
  return AuxiliaryPair{std::move(lower), std::move(upper), PairKind::kMinMax, verified};
}

AuxiliaryPair f_u_pair(const ScoreMatrix& scores, std::uint64_t seed) {
  if (scores.rows() == 0) throw ValidationError("f/U pair needs at least one row");
  if (!scores.has_probabilities()) {
    throw ValidationError("f/U pair needs model probabilities");
  }
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<std::size_t> uniform_class(0, scores.cols() - 1);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<double> model_draws(scores.rows());
  std::vector<double> uniform_draws(scores.rows());
  for (std::size_t r = 0; r < scores.rows(); ++r) {
    // Inverse-CDF draw from the row's probabilities; the last class absorbs
    // any rounding shortfall.
    const auto probs = scores.probability_row(r);
    const double u = unit(rng);
    std::size_t chosen = probs.size() - 1;
    double running = 0.0;
    for (std::size_t c = 0; c < probs.size(); ++c) {
      running += probs[c];
      if (u < running) {
        chosen = c;
        break;
      }
    }
    model_draws[r] = scores.score(r, chosen);
    uniform_draws[r] = scores.score(r, uniform_class(rng));
  }
  auto lower = WeightedEmpirical::from_scores(model_draws);
  auto upper = WeightedEmpirical::from_scores(uniform_draws);
  const bool verified = dominates(upper, lower);
  return AuxiliaryPair{std::move(lower), std::move(upper), PairKind::kFU, verified};
}

AuxiliaryPair custom_pair(WeightedEmpirical lower, WeightedEmpirical upper) {
  const bool verified = dominates(upper, lower);
  return AuxiliaryPair{std::move(lower), std::move(upper), PairKind::kCustom, verified};
}

WeightedEmpirical labeled_empirical(std::span<const double> scores) {
  return WeightedEmpirical::from_scores(scores);
}

}  // namespace shiftcp
