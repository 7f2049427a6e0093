// Writes the 100-class shifted score fixture: calibration rows from P, an
// unlabeled adaptation split and a labeled test split from Q. Q draws inputs
// with 1.5 times the input noise of P and a Dirichlet(10 p) label marginal.
#include <CLI11.hpp>

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "shiftcp/error.hpp"
#include "shiftcp/experiments.hpp"
#include "shiftcp/io.hpp"
#include "shiftcp/reweight.hpp"

namespace {

using shiftcp::ScoreMatrix;

struct Params {
  std::size_t classes = 100;
  std::size_t dims = 20;
  double separation = 1.5;
  double p_noise = 1.0;
  double q_noise = 1.5;
  std::size_t n_cal = 300;
  std::size_t n_adapt = 300;
  std::size_t n_test = 1000;
  std::size_t q_pool = 4000;
  double gamma = 10.0;
  std::uint64_t seed = 7;
};

struct Sample {
  std::vector<double> scores;
  std::vector<double> probs;
  std::vector<int> labels;
};

double round8(double x) { return std::round(x * 1e8) / 1e8; }

// Posterior of the P model (isotropic Gaussians at the class means, uniform
// prior), rounded to 8 decimals.
void posterior(const std::vector<std::vector<double>>& means, const std::vector<double>& x,
               double noise, std::vector<double>& probs, std::vector<double>& scores) {
  const std::size_t k = means.size();
  std::vector<double> logits(k);
  for (std::size_t c = 0; c < k; ++c) {
    double d2 = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) d2 += (x[j] - means[c][j]) * (x[j] - means[c][j]);
    logits[c] = -d2 / (2.0 * noise * noise);
  }
  auto p = shiftcp::softmax(logits);
  double total = 0.0;
  for (auto& v : p) {
    v = round8(v);
    total += v;
  }
  // Put the rounding residue on the largest entry so rows sum to one.
  const auto top = static_cast<std::size_t>(std::max_element(p.begin(), p.end()) - p.begin());
  p[top] = round8(p[top] + (1.0 - total));
  for (double v : p) {
    probs.push_back(v);
    scores.push_back(1.0 - v);
  }
}

Sample draw(const Params& prm, const std::vector<std::vector<double>>& means, std::size_t n,
            double noise, std::mt19937_64& rng) {
  std::uniform_int_distribution<int> label(0, static_cast<int>(prm.classes) - 1);
  std::normal_distribution<double> normal(0.0, noise);
  Sample s;
  std::vector<double> x(prm.dims);
  for (std::size_t i = 0; i < n; ++i) {
    const int y = label(rng);
    for (std::size_t j = 0; j < prm.dims; ++j) x[j] = means[static_cast<std::size_t>(y)][j] + normal(rng);
    posterior(means, x, prm.p_noise, s.probs, s.scores);
    s.labels.push_back(y);
  }
  return s;
}

ScoreMatrix to_matrix(const Sample& s, std::size_t classes) {
  return ScoreMatrix(s.labels.size(), classes, s.scores, s.probs);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Generate the shifted 100-class score fixture"};
  Params prm;
  std::string out_dir = ".";
  app.add_option("--out", out_dir, "Output directory")->capture_default_str();
  app.add_option("--seed", prm.seed)->capture_default_str();
  app.add_option("--q-noise", prm.q_noise, "Input noise scale under Q")->capture_default_str();
  app.add_option("--pool", prm.q_pool, "Q rows before label shift")->capture_default_str();
  CLI11_PARSE(app, argc, argv);

  try {
    std::mt19937_64 rng(prm.seed);
    std::normal_distribution<double> normal(0.0, prm.separation);
    std::vector<std::vector<double>> means(prm.classes, std::vector<double>(prm.dims));
    for (auto& m : means) {
      for (auto& v : m) v = normal(rng);
    }

    const auto cal = draw(prm, means, prm.n_cal, prm.p_noise, rng);
    const auto pool = draw(prm, means, prm.q_pool, prm.q_noise, rng);
    const auto pool_matrix = to_matrix(pool, prm.classes);
    auto kept = shiftcp::label_shift_resample(pool.labels, pool_matrix, prm.gamma, prm.seed);
    std::shuffle(kept.begin(), kept.end(), rng);
    if (kept.size() < prm.n_adapt + 1) {
      throw shiftcp::ValidationError("label shift left too few rows for the splits");
    }
    const std::size_t n_test = std::min(prm.n_test, kept.size() - prm.n_adapt);
    std::vector<std::size_t> adapt(kept.begin(), kept.begin() + static_cast<std::ptrdiff_t>(prm.n_adapt));
    std::vector<std::size_t> test(kept.begin() + static_cast<std::ptrdiff_t>(prm.n_adapt),
                                  kept.begin() + static_cast<std::ptrdiff_t>(prm.n_adapt + n_test));
    std::sort(adapt.begin(), adapt.end());
    std::sort(test.begin(), test.end());

    const auto ids_for = [](const std::vector<std::size_t>& rows, const std::string& prefix) {
      std::vector<std::string> ids;
      for (auto r : rows) ids.push_back(prefix + std::to_string(r));
      return ids;
    };
    std::vector<std::size_t> cal_rows(prm.n_cal);
    std::iota(cal_rows.begin(), cal_rows.end(), 0);
    const std::filesystem::path dir(out_dir);
    shiftcp::save_score_matrix(dir / "shift100_cal.csv", to_matrix(cal, prm.classes), cal.labels,
                               ids_for(cal_rows, "p"));
    const std::vector<int> unlabeled(adapt.size(), shiftcp::kUnlabeled);
    shiftcp::save_score_matrix(dir / "shift100_adapt.csv", pool_matrix.select_rows(adapt),
                               unlabeled, ids_for(adapt, "q"));
    std::vector<int> test_labels;
    for (auto r : test) test_labels.push_back(pool.labels[r]);
    shiftcp::save_score_matrix(dir / "shift100_test.csv", pool_matrix.select_rows(test),
                               test_labels, ids_for(test, "q"));
    std::cout << "cal " << prm.n_cal << ", adapt " << adapt.size() << ", test " << test.size()
              << " rows written to " << dir.string() << '\n';
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
