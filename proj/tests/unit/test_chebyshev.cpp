#include <doctest.h>

#include <cmath>

#include <Eigen/Cholesky>

#include "fwp/chebyshev.hpp"
#include "fwp/error.hpp"
#include "helpers.hpp"

using namespace fwp;

namespace {

// Independent basis via the trigonometric definition T_j(t) = cos(j acos t).
Eigen::MatrixXd trig_basis(std::size_t n, int degree) {
  Eigen::MatrixXd b(static_cast<Eigen::Index>(n), degree + 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double tau = -1.0 + 2.0 * static_cast<double>(i) / static_cast<double>(n - 1);
    for (int j = 0; j <= degree; ++j) {
      b(static_cast<Eigen::Index>(i), j) = std::cos(j * std::acos(std::clamp(tau, -1.0, 1.0)));
    }
  }
  return b;
}

}  // namespace

TEST_CASE("constant signal maps to T0") {
  const std::vector<double> s(45, 5.0);
  const auto c = cheb_fit(s, 4);
  REQUIRE(c.size() == 5);
  CHECK(c(0) == doctest::Approx(5.0).epsilon(1e-12));
  for (int j = 1; j < 5; ++j) CHECK(std::abs(c(j)) < 1e-12);
}

TEST_CASE("samples of T1 map to the unit coefficient") {
  std::vector<double> s(45);
  for (std::size_t i = 0; i < s.size(); ++i) s[i] = -1.0 + 2.0 * static_cast<double>(i) / 44.0;
  const auto c = cheb_fit(s, 4);
  CHECK(std::abs(c(0)) < 1e-12);
  CHECK(c(1) == doctest::Approx(1.0).epsilon(1e-12));
  for (int j = 2; j < 5; ++j) CHECK(std::abs(c(j)) < 1e-12);
}

TEST_CASE("least squares fit matches the normal equations") {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> s(45);
    for (auto& v : s) v = rng.normal(0.0, 10.0);
    const auto c = cheb_fit(s, 4);
    const Eigen::MatrixXd b = trig_basis(45, 4);
    const Eigen::VectorXd y = Eigen::Map<const Eigen::VectorXd>(s.data(), 45);
    const Eigen::VectorXd oracle = (b.transpose() * b).ldlt().solve(b.transpose() * y);
    CHECK((c - oracle).cwiseAbs().maxCoeff() < 1e-8);
  }
}

TEST_CASE("evaluation of simple series") {
  Eigen::VectorXd c(5);
  c << 5, 0, 0, 0, 0;
  for (double v : cheb_eval(c, 10)) CHECK(v == doctest::Approx(5.0).epsilon(1e-14));
  c << 0, 1, 0, 0, 0;
  const auto t1 = cheb_eval(c, 3);
  REQUIRE(t1.size() == 3);
  CHECK(t1[0] == doctest::Approx(-1.0));
  CHECK(std::abs(t1[1]) < 1e-15);
  CHECK(t1[2] == doctest::Approx(1.0));
}

TEST_CASE("fit then evaluate reproduces a cubic") {
  std::vector<double> s(45);
  for (std::size_t i = 0; i < s.size(); ++i) {
    const double t = static_cast<double>(i) / 15.0;
    s[i] = 0.3 * t * t * t - 2.0 * t * t + t - 7.0;
  }
  const auto back = cheb_eval(cheb_fit(s, 4), s.size());
  for (std::size_t i = 0; i < s.size(); ++i) CHECK(std::abs(back[i] - s[i]) < 1e-9);
}

TEST_CASE("fit of an evaluated series returns the same coefficients") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const Eigen::VectorXd c = fwp::testing::random_vector(5, rng, 3.0);
    const auto again = cheb_fit(cheb_eval(c, 45), 4);
    CHECK((again - c).cwiseAbs().maxCoeff() < 1e-9 * std::max(1.0, c.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("explicit time stamps map affinely onto [-1, 1]") {
  std::vector<double> t, s;
  for (int i = 0; i < 20; ++i) {
    const double ti = 3.0 + 0.1 * i * i;
    t.push_back(ti);
    s.push_back(2.0 * ti - 1.0);
  }
  const auto c = cheb_fit(t, s, 2);
  // Linear in t is linear in tau: value at tau = 0 is the midpoint of the range.
  const double mid = 0.5 * (t.front() + t.back());
  CHECK(c(0) == doctest::Approx(2.0 * mid - 1.0).epsilon(1e-10));
  CHECK(c(1) == doctest::Approx(t.back() - t.front()).epsilon(1e-10));
  CHECK(std::abs(c(2)) < 1e-10);
}

TEST_CASE("ill-posed fits are rejected") {
  const std::vector<double> few = {1.0, 2.0, 3.0};
  try {
    cheb_fit(few, 4);
    FAIL("too few samples accepted");
  } catch (const Error& e) {
    CHECK(e.code() == "ill_posed_fit");
  }
  const std::vector<double> same_t(10, 1.0);
  const std::vector<double> vals(10, 2.0);
  try {
    cheb_fit(same_t, vals, 4);
    FAIL("degenerate time stamps accepted");
  } catch (const Error& e) {
    CHECK(e.code() == "ill_posed_fit");
  }
}

TEST_CASE("encoder dimensions and block layout") {
  const ChebEncoder enc;
  CHECK(enc.history_dim() == 20);
  CHECK(enc.future_dim() == 10);
  HistorySnippet s;
  for (int i = 0; i < 45; ++i) {
    s.x.push_back(1.0);
    s.y.push_back(2.0);
    s.vx.push_back(3.0);
    s.vy.push_back(4.0);
  }
  const auto c = enc.encode_history(s);
  REQUIRE(c.size() == 20);
  for (int sig = 0; sig < 4; ++sig) CHECK(c(5 * sig) == doctest::Approx(sig + 1.0));
  const std::vector<double> fx(75, -1.0), fy(75, 0.5);
  const auto f = enc.encode_future(fx, fy);
  REQUIRE(f.size() == 10);
  CHECK(f(0) == doctest::Approx(-1.0));
  CHECK(f(5) == doctest::Approx(0.5));
}
