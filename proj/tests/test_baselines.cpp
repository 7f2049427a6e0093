#include "shiftcp/baselines.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

#include "shiftcp/conformal.hpp"
#include "shiftcp/bounds.hpp"
#include "shiftcp/error.hpp"
#include "support.hpp"

namespace shiftcp {
namespace {

ScoreMatrix from_probs(std::size_t rows, std::size_t cols, const std::vector<double>& probs) {
  std::vector<double> scores(probs.size());
  for (std::size_t i = 0; i < probs.size(); ++i) scores[i] = 1.0 - probs[i];
  return ScoreMatrix(rows, cols, scores, probs);
}

TEST(MethodNamesTest, RoundTrip) {
  ASSERT_EQ(all_methods().size(), 6u);
  for (Method m : all_methods()) EXPECT_EQ(parse_method(to_string(m)), m);
  EXPECT_EQ(parse_method("true-lr"), Method::kTrueLr);
  EXPECT_FALSE(parse_method("bogus").has_value());
}

TEST(UncorrectedTest, UniformWeights) {
  const std::vector<double> s = {0.4, 0.1, 0.9};
  const auto d = uncorrected(s);
  EXPECT_TRUE(d.is_uniform());
  for (double w : d.weights()) EXPECT_DOUBLE_EQ(w, 1.0 / 3.0);
  const auto single = uncorrected(std::vector<double>{0.3});
  EXPECT_EQ(single.size(), 1u);
  EXPECT_DOUBLE_EQ(single.weights()[0], 1.0);
}

TEST(UncorrectedTest, SameThresholdsAsPlainSplitCp) {
  std::mt19937_64 rng(80);
  const auto s = testing::uniform_scores(rng, 37);
  const auto a = uncorrected(s);
  const auto b = WeightedEmpirical::from_scores(s);
  for (double alpha : default_alpha_grid()) EXPECT_EQ(threshold(a, alpha), threshold(b, alpha));
}

TEST(OracleTest, EmptyThrows) {
  EXPECT_THROW(oracle(std::vector<double>{}), ValidationError);
  EXPECT_TRUE(oracle(std::vector<double>{0.5, 0.6}).is_uniform());
}

TEST(TrueLrTest, Examples) {
  std::vector<std::array<double, 4>> zeros(5, {0.0, 0.0, 0.0, 0.0});
  for (double w : true_lr_weights(zeros)) EXPECT_DOUBLE_EQ(w, 0.2);
  std::vector<std::array<double, 4>> one = {{1.0, 2.0, 3.0, 4.0}};
  EXPECT_DOUBLE_EQ(true_lr_weights(one)[0], 1.0);
  EXPECT_THROW(true_lr_weights(std::vector<std::array<double, 4>>{}), ValidationError);
}

TEST(TrueLrTest, MatchesDirectExponentials) {
  std::mt19937_64 rng(81);
  std::normal_distribution<double> g;
  std::vector<std::array<double, 4>> x(40);
  for (auto& row : x) {
    for (double& v : row) v = g(rng);
  }
  const auto w = true_lr_weights(x);
  std::vector<double> raw(40);
  double total = 0.0;
  for (std::size_t i = 0; i < 40; ++i) {
    raw[i] = std::exp(-x[i][0] + 0.5 * x[i][1] - 0.25 * x[i][2] - 0.1 * x[i][3]);
    total += raw[i];
  }
  for (std::size_t i = 0; i < 40; ++i) EXPECT_NEAR(w[i], raw[i] / total, 1e-12);
}

TEST(TrueLrTest, ScaleInvariant) {
  // Moving every point by the same vector multiplies all raw weights by one
  // constant.
  std::mt19937_64 rng(82);
  std::normal_distribution<double> g;
  std::vector<std::array<double, 4>> x(25);
  for (auto& row : x) {
    for (double& v : row) v = g(rng);
  }
  auto shifted = x;
  for (auto& row : shifted) row[0] += 3.0;
  const auto a = true_lr_weights(x);
  const auto b = true_lr_weights(shifted);
  for (std::size_t i = 0; i < a.size(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

TEST(EntropyTest, Values) {
  EXPECT_DOUBLE_EQ(entropy(std::vector<double>{1.0, 0.0, 0.0}), 0.0);
  EXPECT_NEAR(entropy(std::vector<double>{0.25, 0.25, 0.25, 0.25}), std::log(4.0), 1e-15);
  EXPECT_NEAR(entropy(std::vector<double>{0.5, 0.5}), std::log(2.0), 1e-15);
}

TEST(EcpTest, OneHotReducesToStandard) {
  const auto cal = WeightedEmpirical::from_scores(std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9});
  const auto test = from_probs(3, 3, {1, 0, 0, 0, 1, 0, 0, 0, 1});
  for (double alpha : {0.1, 0.3, 0.5}) {
    EXPECT_DOUBLE_EQ(ecp_threshold(cal, test, alpha), threshold(cal, alpha));
  }
}

TEST(EcpTest, UniformPredictionsDivideByLogK) {
  const auto cal = WeightedEmpirical::from_scores(std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9});
  std::vector<double> probs(2 * 5, 0.2);
  const auto test = from_probs(2, 5, probs);
  EXPECT_NEAR(ecp_threshold(cal, test, 0.4), threshold(cal, 0.4) / std::log(5.0), 1e-12);
}

TEST(EcpTest, TwoClassUniformIsNotScaled) {
  const auto cal = WeightedEmpirical::from_scores(std::vector<double>{0.1, 0.3, 0.5, 0.7, 0.9});
  const auto test = from_probs(2, 2, {0.5, 0.5, 0.5, 0.5});
  EXPECT_DOUBLE_EQ(ecp_threshold(cal, test, 0.4), threshold(cal, 0.4));
}

TEST(EcpTest, NeedsProbabilities) {
  const auto cal = WeightedEmpirical::from_scores(std::vector<double>{0.1, 0.3});
  const ScoreMatrix test(1, 2, std::vector<double>{0.2, 0.8});
  EXPECT_THROW(ecp_threshold(cal, test, 0.1), ValidationError);
}

TEST(EcpTest, NeverAboveStandardAndSetsNest) {
  std::mt19937_64 rng(83);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cal_data = testing::random_labeled_matrix(rng, 60, 8);
    const auto test = testing::random_labeled_matrix(rng, 40, 8, 2.0);
    const auto cal =
        WeightedEmpirical::from_scores(true_label_scores(cal_data.scores, cal_data.labels));
    for (double alpha : {0.05, 0.1, 0.3}) {
      const double base = threshold(cal, alpha);
      const double scaled = ecp_threshold(cal, test.scores, alpha);
      EXPECT_LE(scaled, base);
      for (std::size_t r = 0; r < test.scores.rows(); ++r) {
        const auto small = predict_set(test.scores.row(r), scaled).classes;
        const auto big = predict_set(test.scores.row(r), base).classes;
        EXPECT_TRUE(std::includes(big.begin(), big.end(), small.begin(), small.end()));
      }
    }
  }
}

}  // namespace
}  // namespace shiftcp
