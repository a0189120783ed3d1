#include <doctest.h>

#include <cmath>
#include <random>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "fwp/error.hpp"
#include "fwp/prediction.hpp"
#include "fwp/synthetic.hpp"
#include "helpers.hpp"

using namespace fwp;
using fwp::testing::max_abs_diff;
using fwp::testing::random_spd;
using fwp::testing::random_vector;

namespace {

PredictedTrajectory random_trajectory(std::size_t steps, Rng& rng, double t_pred = 3.0) {
  PredictedTrajectory p;
  p.t_pred = t_pred;
  p.rate = 15.0;
  for (std::size_t k = 0; k < steps; ++k) {
    p.means.emplace_back(rng.normal(0, 10), rng.normal(0, 3));
    p.covariances.push_back(random_spd(2, rng, 0.1));
  }
  return p;
}

std::vector<PredictionWindow> class_windows(ManeuverClass m, int tracks, std::uint64_t seed) {
  SceneConfig cfg;
  std::vector<PredictionWindow> out;
  for (int i = 0; i < tracks; ++i) {
    const auto t = generate_maneuver(m, cfg, seed + static_cast<std::uint64_t>(i), i);
    for (auto& w : extract_prediction_windows(t, 3.0, 5.0, 5)) out.push_back(std::move(w));
  }
  return out;
}

}  // namespace

TEST_CASE("accumulator structure") {
  const AccumulatorMatrix acc(6, 0.1);
  const Eigen::MatrixXd a = acc.dense();
  REQUIRE(a.rows() == 12);
  REQUIRE(a.cols() == 12);
  for (int i = 0; i < 12; ++i) {
    for (int j = 0; j < 12; ++j) {
      const bool same_block = (i < 6) == (j < 6);
      const double expected = same_block && (i % 6) >= (j % 6) ? 0.1 : 0.0;
      CHECK(a(i, j) == expected);
    }
  }
  Rng rng(1);
  const Eigen::VectorXd v = random_vector(12, rng);
  const Eigen::VectorXd av = acc.apply(v);
  for (int axis = 0; axis < 2; ++axis) {
    double run = 0.0;
    for (int i = 0; i < 6; ++i) {
      run += v(axis * 6 + i);
      CHECK(av(axis * 6 + i) == doctest::Approx(0.1 * run).epsilon(1e-14));
    }
  }
  CHECK(max_abs_diff(av, a * v) < 1e-14);
  const Eigen::VectorXd c = acc.apply(Eigen::VectorXd::Constant(12, 3.0));
  for (int i = 0; i < 6; ++i) CHECK(c(i) == doctest::Approx(0.3 * (i + 1)));
}

TEST_CASE("zero and constant velocity coefficients") {
  const int degree = 4, nc = degree + 1;
  Eigen::VectorXd mean = Eigen::VectorXd::Zero(2 * nc);
  Rng rng(2);
  const Eigen::MatrixXd cov = random_spd(2 * nc, rng, 0.2);
  const Eigen::Vector2d anchor(7.0, -3.7);
  const auto still = trajectory_from_coefficient_moments(mean, cov, anchor, 3.0, 5.0, 15.0, degree);
  REQUIRE(still.horizon_steps() == 75);
  CHECK(still.t_pred == 3.0);
  for (const auto& m : still.means) CHECK((m - anchor).norm() < 1e-12);

  // Covariance blocks equal A B Sigma B^T A^T.
  const Eigen::MatrixXd basis = cheb_basis(75, degree);
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(150, 2 * nc);
  b.topLeftCorner(75, nc) = basis;
  b.bottomRightCorner(75, nc) = basis;
  const Eigen::MatrixXd a = AccumulatorMatrix(75, 1.0 / 15.0).dense();
  const Eigen::MatrixXd full = a * b * cov * b.transpose() * a.transpose();
  for (int k = 0; k < 75; ++k) {
    Eigen::Matrix2d blk;
    blk << full(k, k), full(k, 75 + k), full(75 + k, k), full(75 + k, 75 + k);
    CHECK(max_abs_diff(still.covariances[k], blk) < 1e-10);
  }

  mean(0) = 10.0;
  const auto moving = trajectory_from_coefficient_moments(mean, cov, anchor, 3.0, 5.0, 15.0, degree);
  for (int k = 0; k < 75; ++k) {
    CHECK(moving.means[k].x() == doctest::Approx(anchor.x() + 10.0 * (k + 1) / 15.0).epsilon(1e-12));
    CHECK(moving.means[k].y() == doctest::Approx(anchor.y()).epsilon(1e-12));
  }
}

TEST_CASE("position covariance matches Monte-Carlo propagation") {
  const int degree = 4, nc = degree + 1, steps = 75;
  Rng rng(3);
  const Eigen::VectorXd mean = random_vector(2 * nc, rng);
  const Eigen::MatrixXd cov = random_spd(2 * nc, rng, 0.1);
  const auto traj =
      trajectory_from_coefficient_moments(mean, cov, Eigen::Vector2d::Zero(), 0.0, 5.0, 15.0, degree);
  const Eigen::MatrixXd l = cov.llt().matrixL();
  const int n = 100000;
  const std::vector<int> probe = {0, 14, 44, 74};
  std::vector<Eigen::Vector2d> sum(probe.size(), Eigen::Vector2d::Zero());
  std::vector<std::vector<Eigen::Vector2d>> samples(probe.size(), std::vector<Eigen::Vector2d>(n));
  for (int s = 0; s < n; ++s) {
    const Eigen::VectorXd c = mean + l * random_vector(2 * nc, rng);
    const auto vx = cheb_eval(c.head(nc), steps);
    const auto vy = cheb_eval(c.tail(nc), steps);
    double x = 0.0, y = 0.0;
    std::size_t p = 0;
    for (int k = 0; k < steps && p < probe.size(); ++k) {
      x += vx[k] / 15.0;
      y += vy[k] / 15.0;
      if (k == probe[p]) {
        samples[p][s] = Eigen::Vector2d(x, y);
        sum[p] += samples[p][s];
        ++p;
      }
    }
  }
  for (std::size_t p = 0; p < probe.size(); ++p) {
    const Eigen::Vector2d mu = sum[p] / n;
    CHECK((mu - traj.means[probe[p]]).norm() < 0.05 * (1.0 + mu.norm()));
    Eigen::Matrix2d acc = Eigen::Matrix2d::Zero(), acc_sq = Eigen::Matrix2d::Zero();
    for (const auto& v : samples[p]) {
      const Eigen::Vector2d d = v - mu;
      const Eigen::Matrix2d o = d * d.transpose();
      acc += o;
      acc_sq += o.cwiseProduct(o);
    }
    acc /= n;
    acc_sq /= n;
    for (int a = 0; a < 2; ++a) {
      for (int b = 0; b < 2; ++b) {
        const double se = std::sqrt((acc_sq(a, b) - acc(a, b) * acc(a, b)) / n);
        CHECK(std::abs(acc(a, b) - traj.covariances[probe[p]](a, b)) < 3.0 * se + 1e-12);
      }
    }
  }
}

TEST_CASE("fusion averages means and covariances") {
  Rng rng(4);
  const auto a = random_trajectory(75, rng), b = random_trajectory(75, rng);
  const auto same = fuse(a, a);
  for (std::size_t k = 0; k < 75; ++k) {
    CHECK(max_abs_diff(same.means[k], a.means[k]) < 1e-15);
    CHECK(max_abs_diff(same.covariances[k], a.covariances[k]) < 1e-15);
  }
  const auto f = fuse(a, b);
  for (std::size_t k = 0; k < 75; ++k) {
    CHECK(max_abs_diff(f.means[k], 0.5 * (a.means[k] + b.means[k])) < 1e-14);
    CHECK(max_abs_diff(f.covariances[k], 0.5 * (a.covariances[k] + b.covariances[k])) < 1e-14);
    CHECK(Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d>(f.covariances[k]).eigenvalues().minCoeff() >= 0);
  }
  auto one = a, two = b;
  one.means[10] = Eigen::Vector2d(1.0, 0.0);
  two.means[10] = Eigen::Vector2d(2.0, 0.0);
  CHECK(fuse(one, two).means[10].x() == 1.5);

  // Fusion commutes with truncation.
  for (std::size_t n : {1u, 15u, 40u, 75u}) {
    const auto x = fuse(a, b).truncated(n);
    const auto y = fuse(a.truncated(n), b.truncated(n));
    REQUIRE(x.horizon_steps() == y.horizon_steps());
    for (std::size_t k = 0; k < n; ++k) {
      CHECK(x.means[k] == y.means[k]);
      CHECK(x.covariances[k] == y.covariances[k]);
    }
  }
}

TEST_CASE("fusion rejects mismatched horizons") {
  Rng rng(5);
  const auto a = random_trajectory(75, rng);
  auto b = random_trajectory(60, rng);
  CHECK_THROWS_AS(fuse(a, b), Error);
  auto c = random_trajectory(75, rng, 4.0);
  try {
    fuse(a, c);
    FAIL("accepted different prediction times");
  } catch (const Error& e) {
    CHECK(e.code() == "horizon_mismatch");
  }
}

TEST_CASE("vehicle prediction routes through the requested model") {
  const auto windows = class_windows(ManeuverClass::CutInRight, 12, 300);
  REQUIRE(windows.size() > 40);
  const auto model = train_probabilistic_model(windows, ManeuverClass::CutInRight, 3, 11, 4, 60);
  const auto mono = train_probabilistic_model(windows, std::nullopt, 3, 11, 4, 60);

  ModelBundle bundle;
  bundle.class_models[index_of(ManeuverClass::CutInRight)] = model;
  const auto& snippet = windows[7].history;
  const auto imm = imm_filter_snippet(snippet, bundle.rate, bundle.imm);
  const auto motion = imm_forecast(imm, 5.0, bundle.rate, snippet.t_pred, bundle.imm);

  const auto only = predict_vehicle(bundle, imm, snippet, ImmOnlyRoute{}, 5.0);
  for (std::size_t k = 0; k < motion.horizon_steps(); ++k) {
    CHECK(only.means[k] == motion.means[k]);
    CHECK(only.covariances[k] == motion.covariances[k]);
  }

  const auto cls = predict_vehicle(bundle, imm, snippet, ManeuverClass::CutInRight, 5.0);
  const auto expected = fuse(motion, prob_predict(model, snippet, 5.0, bundle.rate));
  for (std::size_t k = 0; k < motion.horizon_steps(); ++k) {
    CHECK(cls.means[k] == expected.means[k]);
    CHECK(cls.covariances[k] == expected.covariances[k]);
    CHECK((cls.covariances[k] - cls.covariances[k].transpose()).cwiseAbs().maxCoeff() < 1e-9);
  }

  try {
    predict_vehicle(bundle, imm, snippet, ManeuverClass::DriftRear, 5.0);
    FAIL("missing class model accepted");
  } catch (const Error& e) {
    CHECK(e.code() == "missing_model");
  }
  CHECK_THROWS_AS(predict_vehicle(bundle, imm, snippet, MonolithicRoute{}, 5.0), Error);

  // A monolithic model fitted to one class only is the class model.
  bundle.monolithic = mono;
  const auto m = predict_vehicle(bundle, imm, snippet, MonolithicRoute{}, 5.0);
  for (std::size_t k = 0; k < motion.horizon_steps(); ++k) {
    CHECK((m.means[k] - cls.means[k]).norm() < 1e-6);
  }
}

TEST_CASE("bundle JSON round trip preserves predictions and hash") {
  const auto windows = class_windows(ManeuverClass::DriftFront, 6, 40);
  ModelBundle bundle;
  bundle.class_models[index_of(ManeuverClass::DriftFront)] =
      train_probabilistic_model(windows, ManeuverClass::DriftFront, 2, 5, 4, 30);
  bundle.config_hash = "abc";
  bundle.experiment = {{"note", "test"}};
  const auto restored = bundle_from_json(to_json(bundle));
  CHECK(to_json(restored).dump() == to_json(bundle).dump());
  CHECK(bundle_hash(restored) == bundle_hash(bundle));
  CHECK(restored.experiment == bundle.experiment);
  const auto& s = windows[3].history;
  const auto imm = imm_filter_snippet(s, 15.0);
  const auto a = predict_vehicle(bundle, imm, s, ManeuverClass::DriftFront, 5.0);
  const auto b = predict_vehicle(restored, imm, s, ManeuverClass::DriftFront, 5.0);
  for (std::size_t k = 0; k < a.horizon_steps(); ++k) CHECK(a.means[k] == b.means[k]);
  CHECK(fnv1a_hex("") == "cbf29ce484222325");
  CHECK(fnv1a_hex("a") == "af63dc4c8601ec8c");
}
