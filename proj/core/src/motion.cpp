#include "fwp/motion.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include "fwp/error.hpp"

namespace fwp {

std::string_view to_string(MotionModel model) {
  switch (model) {
    case MotionModel::CV: return "CV";
    case MotionModel::CA: return "CA";
    case MotionModel::CTRV: return "CTRV";
  }
  return "?";
}

int state_dim(MotionModel model) {
  switch (model) {
    case MotionModel::CV: return 4;
    case MotionModel::CA: return 6;
    case MotionModel::CTRV: return 5;
  }
  return 0;
}

namespace {

Eigen::MatrixXd linear_transition(MotionModel kind, double dt) {
  const int n = state_dim(kind);
  Eigen::MatrixXd f = Eigen::MatrixXd::Identity(n, n);
  f(0, 2) = dt;
  f(1, 3) = dt;
  if (kind == MotionModel::CA) {
    f(0, 4) = 0.5 * dt * dt;
    f(1, 5) = 0.5 * dt * dt;
    f(2, 4) = dt;
    f(3, 5) = dt;
  }
  return f;
}

// CTRV state map and its Jacobian at `x`.
void ctrv_transition(const Eigen::VectorXd& x, double dt, Eigen::VectorXd& next,
                     Eigen::MatrixXd& jac) {
  const double theta = x(2), v = x(3), omega = x(4);
  next = x;
  jac = Eigen::MatrixXd::Identity(5, 5);
  const double s0 = std::sin(theta), c0 = std::cos(theta);
  if (std::abs(omega) < kCtrvStraightThreshold) {
    next(0) = x(0) + v * c0 * dt;
    next(1) = x(1) + v * s0 * dt;
    jac(0, 2) = -v * s0 * dt;
    jac(0, 3) = c0 * dt;
    jac(0, 4) = -0.5 * v * s0 * dt * dt;
    jac(1, 2) = v * c0 * dt;
    jac(1, 3) = s0 * dt;
    jac(1, 4) = 0.5 * v * c0 * dt * dt;
  } else {
    const double theta1 = theta + omega * dt;
    const double s1 = std::sin(theta1), c1 = std::cos(theta1);
    const double r = v / omega;
    next(0) = x(0) + r * (s1 - s0);
    next(1) = x(1) + r * (c0 - c1);
    next(2) = theta1;
    jac(0, 2) = r * (c1 - c0);
    jac(0, 3) = (s1 - s0) / omega;
    jac(0, 4) = v * dt * c1 / omega - r * (s1 - s0) / omega;
    jac(1, 2) = r * (s1 - s0);
    jac(1, 3) = (c0 - c1) / omega;
    jac(1, 4) = v * dt * s1 / omega - r * (c0 - c1) / omega;
    jac(2, 4) = dt;
  }
}

}  // namespace

Eigen::MatrixXd process_noise(const FilterState& state, double dt, const MotionNoise& noise) {
  const int n = state_dim(state.kind);
  Eigen::MatrixXd q = Eigen::MatrixXd::Zero(n, n);
  const double dt2 = dt * dt, dt3 = dt2 * dt, dt4 = dt3 * dt, dt5 = dt4 * dt;
  switch (state.kind) {
    case MotionModel::CV: {
      const double s = noise.sigma_accel * noise.sigma_accel;
      for (int a = 0; a < 2; ++a) {
        q(a, a) = s * dt4 / 4.0;
        q(a, a + 2) = q(a + 2, a) = s * dt3 / 2.0;
        q(a + 2, a + 2) = s * dt2;
      }
      break;
    }
    case MotionModel::CA: {
      const double s = noise.sigma_jerk * noise.sigma_jerk;
      for (int a = 0; a < 2; ++a) {
        const int p = a, v = a + 2, acc = a + 4;
        q(p, p) = s * dt5 / 20.0;
        q(p, v) = q(v, p) = s * dt4 / 8.0;
        q(p, acc) = q(acc, p) = s * dt3 / 6.0;
        q(v, v) = s * dt3 / 3.0;
        q(v, acc) = q(acc, v) = s * dt2 / 2.0;
        q(acc, acc) = s * dt;
      }
      break;
    }
    case MotionModel::CTRV: {
      const double theta = state.mean(2);
      Eigen::Matrix<double, 5, 2> g = Eigen::Matrix<double, 5, 2>::Zero();
      g(0, 0) = 0.5 * dt2 * std::cos(theta);
      g(1, 0) = 0.5 * dt2 * std::sin(theta);
      g(3, 0) = dt;
      g(2, 1) = 0.5 * dt2;
      g(4, 1) = dt;
      Eigen::Matrix2d s = Eigen::Matrix2d::Zero();
      s(0, 0) = noise.sigma_accel_ctrv * noise.sigma_accel_ctrv;
      s(1, 1) = noise.sigma_yaw_accel * noise.sigma_yaw_accel;
      q = g * s * g.transpose();
      break;
    }
  }
  return q;
}

FilterState filter_predict(const FilterState& state, double dt, const MotionNoise& noise) {
  if (!(dt > 0.0)) throw Error("invalid_argument", "filter_predict requires dt > 0");
  FilterState out;
  out.kind = state.kind;
  const Eigen::MatrixXd q = process_noise(state, dt, noise);
  if (state.kind == MotionModel::CTRV) {
    Eigen::MatrixXd jac;
    ctrv_transition(state.mean, dt, out.mean, jac);
    out.covariance = jac * state.covariance * jac.transpose() + q;
  } else {
    const Eigen::MatrixXd f = linear_transition(state.kind, dt);
    out.mean = f * state.mean;
    out.covariance = f * state.covariance * f.transpose() + q;
  }
  out.covariance = 0.5 * (out.covariance + out.covariance.transpose()).eval();
  return out;
}

FilterUpdate filter_update(const FilterState& state, const Eigen::Vector2d& observation,
                           const Eigen::Matrix2d& measurement_cov) {
  const Eigen::Index n = state.mean.size();
  // Every state layout starts with (x, y), so H selects the first two entries.
  const Eigen::Vector2d innovation = observation - state.mean.head<2>();
  const Eigen::MatrixXd ph = state.covariance.leftCols(2);  // P H^T
  Eigen::Matrix2d s = state.covariance.topLeftCorner<2, 2>() + measurement_cov;
  s = 0.5 * (s + s.transpose()).eval();
  const Eigen::LLT<Eigen::Matrix2d> llt(s);
  if (llt.info() != Eigen::Success || !(s.determinant() > 0.0)) {
    throw Error("degenerate_innovation", "degenerate innovation");
  }
  const Eigen::MatrixXd gain = llt.solve(ph.transpose()).transpose();  // n x 2
  FilterUpdate out;
  out.state.kind = state.kind;
  out.state.mean = state.mean + gain * innovation;
  // Joseph form keeps the covariance PSD.
  Eigen::MatrixXd ikh = Eigen::MatrixXd::Identity(n, n);
  ikh.leftCols(2) -= gain;
  out.state.covariance =
      ikh * state.covariance * ikh.transpose() + gain * measurement_cov * gain.transpose();
  out.state.covariance = 0.5 * (out.state.covariance + out.state.covariance.transpose()).eval();
  if (state.kind == MotionModel::CTRV) {
    out.state.mean(2) = std::remainder(out.state.mean(2), 2.0 * std::numbers::pi);
  }
  const Eigen::Matrix2d l = llt.matrixL();
  const double log_det = 2.0 * (std::log(l(0, 0)) + std::log(l(1, 1)));
  const double maha = innovation.dot(llt.solve(innovation));
  out.log_likelihood = -0.5 * (maha + log_det + 2.0 * std::log(2.0 * std::numbers::pi));
  return out;
}

void to_cartesian(const FilterState& state, Eigen::Vector4d& mean, Eigen::Matrix4d& cov) {
  if (state.kind != MotionModel::CTRV) {
    mean = state.mean.head<4>();
    cov = state.covariance.topLeftCorner<4, 4>();
    return;
  }
  const double theta = state.mean(2), v = state.mean(3);
  const double c = std::cos(theta), s = std::sin(theta);
  mean << state.mean(0), state.mean(1), v * c, v * s;
  Eigen::Matrix<double, 4, 5> jac = Eigen::Matrix<double, 4, 5>::Zero();
  jac(0, 0) = 1.0;
  jac(1, 1) = 1.0;
  jac(2, 2) = -v * s;
  jac(2, 3) = c;
  jac(3, 2) = v * c;
  jac(3, 3) = s;
  cov = jac * state.covariance * jac.transpose();
}

PredictedTrajectory PredictedTrajectory::truncated(std::size_t steps) const {
  PredictedTrajectory out = *this;
  if (steps < out.means.size()) {
    out.means.resize(steps);
    out.covariances.resize(steps);
  }
  return out;
}

Eigen::Matrix2d symmetrize_psd(const Eigen::Matrix2d& cov) {
  const Eigen::Matrix2d sym = 0.5 * (cov + cov.transpose());
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(sym);
  if (es.eigenvalues().minCoeff() >= 0.0) return sym;
  const Eigen::Vector2d clipped = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
}

}  // namespace fwp
