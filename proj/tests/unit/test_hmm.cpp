#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>

#include "fwp/error.hpp"
#include "fwp/hmm.hpp"
#include "fwp/synthetic.hpp"
#include "helpers.hpp"

using namespace fwp;

namespace {

double diag_log_normal(const HmmFeature& f, const HmmFeature& mu, const HmmFeature& var) {
  double s = 0.0;
  for (int d = 0; d < kHmmFeatureDim; ++d) {
    s += -0.5 * std::log(2 * std::numbers::pi * var[d]) - 0.5 * (f[d] - mu[d]) * (f[d] - mu[d]) / var[d];
  }
  return s;
}

double mixture_density(const DiagGaussianMixture& m, const HmmFeature& f) {
  double s = 0.0;
  for (std::size_t c = 0; c < m.weights.size(); ++c) {
    s += m.weights[c] * std::exp(diag_log_normal(f, m.means[c], m.variances[c]));
  }
  return s;
}

HmmModel two_state_model() {
  HmmModel m;
  m.initial_probs = {0.6, 0.4};
  m.transitions = Eigen::MatrixXd(2, 2);
  m.transitions << 0.7, 0.3, 0.0, 1.0;
  DiagGaussianMixture a;
  a.weights = {0.3, 0.7};
  a.means = {HmmFeature{0, 0, 1, 0}, HmmFeature{1, 0.5, 0, 0}};
  a.variances = {HmmFeature{1, 1, 1, 1}, HmmFeature{0.5, 2, 1, 0.3}};
  DiagGaussianMixture b;
  b.weights = {1.0};
  b.means = {HmmFeature{2, -1, 0.5, 0.2}};
  b.variances = {HmmFeature{0.8, 0.8, 1.5, 0.5}};
  m.emissions = {a, b};
  return m;
}

HistorySnippet constant_snippet(double x, double y, std::size_t n = 45) {
  HistorySnippet s;
  s.x.assign(n, x);
  s.y.assign(n, y);
  s.vx.assign(n, 0.0);
  s.vy.assign(n, 0.0);
  s.end_index = n - 1;
  return s;
}

std::vector<HistorySnippet> labelled_snippets(ManeuverClass m, int n_tracks, std::uint64_t seed0) {
  SceneConfig cfg;
  std::vector<HistorySnippet> out;
  for (int i = 0; i < n_tracks; ++i) {
    const auto track = generate_maneuver(m, cfg, seed0 + static_cast<std::uint64_t>(i), i);
    for (auto& s : extract_snippets(track, 3.0, 10)) {
      if (s.label == m) out.push_back(std::move(s));
    }
  }
  return out;
}

}  // namespace

TEST_CASE("forward algorithm matches exhaustive state sequences") {
  const HmmModel m = two_state_model();
  Rng rng(4);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<HmmFeature> f(3);
    for (auto& v : f) {
      for (auto& d : v) d = rng.normal();
    }
    double brute = 0.0;
    for (int code = 0; code < 8; ++code) {
      const int s[3] = {code & 1, (code >> 1) & 1, (code >> 2) & 1};
      double p = m.initial_probs[s[0]] * mixture_density(m.emissions[s[0]], f[0]);
      for (int t = 1; t < 3; ++t) {
        p *= m.transitions(s[t - 1], s[t]) * mixture_density(m.emissions[s[t]], f[t]);
      }
      brute += p;
    }
    CHECK(std::abs(hmm_loglik_features(m, f) - std::log(brute)) < 1e-10);
  }
}

TEST_CASE("a single-state chain sums emission log densities") {
  HmmModel m;
  m.initial_probs = {1.0};
  m.transitions = Eigen::MatrixXd::Ones(1, 1);
  m.emissions = {two_state_model().emissions[0]};
  Rng rng(8);
  std::vector<HmmFeature> f(45);
  double expected = 0.0;
  for (auto& v : f) {
    for (auto& d : v) d = rng.normal(0, 2);
    expected += m.emissions[0].log_density(v);
  }
  CHECK(hmm_loglik_features(m, f) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("scoring survives emission densities far below double range") {
  HmmModel m = two_state_model();
  Rng rng(12);
  std::vector<HmmFeature> f(45);
  for (auto& v : f) {
    for (auto& d : v) d = rng.normal();
  }
  const double base = hmm_loglik_features(m, f);
  const double c = -600.0;
  for (auto& e : m.emissions) {
    for (auto& w : e.weights) w *= std::exp(c);
  }
  const double shifted = hmm_loglik_features(m, f);
  REQUIRE(std::isfinite(shifted));
  CHECK(shifted == doctest::Approx(base + 45 * c).epsilon(1e-12));
}

TEST_CASE("training on identical snippets collapses to the variance floor") {
  std::vector<HistorySnippet> data(12, constant_snippet(5.0, 3.7));
  HmmTrainOptions opt;
  opt.n_states = 3;
  opt.n_mix = 2;
  opt.max_iter = 10;
  const auto m = hmm_train(data, ManeuverClass::DriftFront, opt);
  for (std::size_t i = 1; i < m.training_log.size(); ++i) {
    CHECK(m.training_log[i] >= m.training_log[i - 1] - 1e-9 * std::abs(m.training_log[i - 1]));
  }
  double min_var = 1e300;
  for (const auto& e : m.emissions) {
    for (std::size_t c = 0; c < e.weights.size(); ++c) {
      if (e.weights[c] > 0) {
        for (double v : e.variances[c]) min_var = std::min(min_var, v);
      }
    }
  }
  CHECK(min_var == doctest::Approx(opt.variance_floor));
}

TEST_CASE("two separated clusters are recovered like k-means") {
  Rng rng(31);
  std::vector<HistorySnippet> data;
  const Eigen::Vector2d ca(-10.0, 3.7), cb(12.0, -3.7);
  Eigen::Vector2d sum_a = Eigen::Vector2d::Zero(), sum_b = Eigen::Vector2d::Zero();
  std::size_t na = 0, nb = 0;
  for (int i = 0; i < 40; ++i) {
    const Eigen::Vector2d c = i % 2 == 0 ? ca : cb;
    HistorySnippet s = constant_snippet(0, 0, 15);
    for (std::size_t t = 0; t < s.size(); ++t) {
      s.x[t] = c.x() + rng.normal(0, 0.3);
      s.y[t] = c.y() + rng.normal(0, 0.3);
      s.vx[t] = rng.normal(0, 0.1);
      s.vy[t] = rng.normal(0, 0.1);
      (i % 2 == 0 ? sum_a : sum_b) += Eigen::Vector2d(s.x[t], s.y[t]);
      ++(i % 2 == 0 ? na : nb);
    }
    data.push_back(s);
  }
  // With clusters this far apart k-means converges to the per-cluster means.
  const Eigen::Vector2d centroid_a = sum_a / static_cast<double>(na);
  const Eigen::Vector2d centroid_b = sum_b / static_cast<double>(nb);
  HmmTrainOptions opt;
  opt.n_states = 1;
  opt.n_mix = 2;
  opt.seed = 3;
  const auto m = hmm_train(data, ManeuverClass::DriftRear, opt);
  REQUIRE(m.emissions.size() == 1);
  const auto& e = m.emissions[0];
  REQUIRE(e.means.size() == 2);
  for (const auto& centroid : {centroid_a, centroid_b}) {
    double best = 1e300;
    for (const auto& mu : e.means) best = std::min(best, (Eigen::Vector2d(mu[0], mu[1]) - centroid).norm());
    CHECK(best < 0.1);
  }
  CHECK(e.weights[0] == doctest::Approx(0.5).epsilon(0.01));
}

TEST_CASE("Baum-Welch keeps the left-right structure and improves monotonically") {
  const auto data = labelled_snippets(ManeuverClass::CutInLeft, 12, 100);
  REQUIRE(data.size() >= 10);
  HmmTrainOptions opt;
  opt.seed = 9;
  opt.max_iter = 25;
  opt.scaler = fit_feature_scaler(data);
  const auto m = hmm_train(data, ManeuverClass::CutInLeft, opt);
  CHECK(m.n_states() == 5);
  for (int i = 0; i < m.n_states(); ++i) {
    CHECK(m.transitions.row(i).sum() == doctest::Approx(1.0).epsilon(1e-12));
    for (int j = 0; j < m.n_states(); ++j) {
      if (j != i && j != i + 1) CHECK(m.transitions(i, j) == 0.0);
    }
    double w = 0.0;
    for (double x : m.emissions[i].weights) w += x;
    CHECK(w == doctest::Approx(1.0).epsilon(1e-12));
    for (const auto& v : m.emissions[i].variances) {
      for (double x : v) CHECK(x >= opt.variance_floor);
    }
  }
  REQUIRE(m.training_log.size() >= 2);
  for (std::size_t i = 1; i < m.training_log.size(); ++i) {
    CHECK(m.training_log[i] >= m.training_log[i - 1] - 1e-9 * std::abs(m.training_log[i - 1]));
  }
}

TEST_CASE("seeded training is bit-identical and survives JSON") {
  const auto data = labelled_snippets(ManeuverClass::DriftFront, 6, 7);
  HmmTrainOptions opt;
  opt.seed = 42;
  opt.max_iter = 8;
  opt.scaler = fit_feature_scaler(data);
  const auto a = hmm_train(data, ManeuverClass::DriftFront, opt);
  const auto b = hmm_train(data, ManeuverClass::DriftFront, opt);
  CHECK(to_json(a).dump() == to_json(b).dump());
  const auto c = hmm_from_json(to_json(a));
  CHECK(to_json(c).dump() == to_json(a).dump());
  for (const auto& s : data) CHECK(hmm_loglik(c, s) == hmm_loglik(a, s));
}

TEST_CASE("too few snippets is an error") {
  std::vector<HistorySnippet> data(9, constant_snippet(1, 1));
  try {
    hmm_train(data, ManeuverClass::DriftFront, HmmTrainOptions{});
    FAIL("accepted nine snippets");
  } catch (const Error& e) {
    CHECK(e.code() == "insufficient_training_data");
  }
}

TEST_CASE("a trained class model prefers its own held-out snippets") {
  const auto own = labelled_snippets(ManeuverClass::OvertakeLeft, 40, 1000);
  const auto other = labelled_snippets(ManeuverClass::LanePassRightBack, 40, 5000);
  REQUIRE(own.size() > 40);
  REQUIRE(other.size() > 40);
  const std::size_t split_own = own.size() / 2, split_other = other.size() / 2;
  std::vector<HistorySnippet> train_own(own.begin(), own.begin() + split_own);
  std::vector<HistorySnippet> train_other(other.begin(), other.begin() + split_other);
  std::vector<HistorySnippet> all(train_own);
  all.insert(all.end(), train_other.begin(), train_other.end());
  HmmTrainOptions opt;
  opt.max_iter = 20;
  opt.scaler = fit_feature_scaler(all);
  const std::vector<HmmModel> models = {hmm_train(train_own, ManeuverClass::OvertakeLeft, opt),
                                        hmm_train(train_other, ManeuverClass::LanePassRightBack, opt)};
  std::size_t wins = 0, total = 0;
  for (std::size_t i = split_own; i < own.size(); ++i, ++total) {
    if (hmm_loglik(models[0], own[i]) > hmm_loglik(models[1], own[i])) ++wins;
  }
  CHECK(static_cast<double>(wins) >= 0.95 * static_cast<double>(total));

  // classify agrees with sorting the individual scores.
  for (std::size_t i = split_other; i < other.size(); ++i) {
    const auto ranked = classify(models, other[i], 2);
    REQUIRE(ranked.size() == 2);
    const double l0 = hmm_loglik(models[0], other[i]), l1 = hmm_loglik(models[1], other[i]);
    CHECK(ranked[0].maneuver == (l1 > l0 ? ManeuverClass::LanePassRightBack : ManeuverClass::OvertakeLeft));
    CHECK(ranked[0].log_likelihood >= ranked[1].log_likelihood);
  }
}

TEST_CASE("ranking breaks ties by class order") {
  std::vector<ManeuverScore> scores;
  for (auto m : kAllManeuvers) scores.push_back({m, -5.0});
  std::reverse(scores.begin(), scores.end());
  scores[3].log_likelihood = -1.0;
  rank_scores(scores);
  REQUIRE(scores.size() == kNumManeuvers);
  CHECK(scores[0].maneuver == ManeuverClass::CutInLeft);
  for (std::size_t i = 2; i < scores.size(); ++i) {
    CHECK(index_of(scores[i - 1].maneuver) < index_of(scores[i].maneuver));
  }

  HmmModel a = two_state_model(), b = two_state_model();
  a.maneuver = ManeuverClass::DriftRear;
  b.maneuver = ManeuverClass::OvertakeRight;
  const std::vector<HmmModel> models = {a, b};
  const auto top = classify(models, constant_snippet(1, 0, 5), 1);
  REQUIRE(top.size() == 1);
  CHECK(top[0].maneuver == ManeuverClass::OvertakeRight);
}
