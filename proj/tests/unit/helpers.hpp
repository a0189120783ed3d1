#pragma once

#include <cmath>
#include <functional>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>

#include "fwp/rng.hpp"
#include "fwp/track.hpp"

namespace fwp::testing {

// Track sampled from analytic position/velocity functions of time.
inline UniformTrack sampled_track(std::size_t n, double rate,
                                  const std::function<double(double)>& x,
                                  const std::function<double(double)>& y,
                                  std::vector<ManeuverSegment> segments = {}, int id = 1) {
  std::vector<double> xs(n), ys(n), vxs(n), vys(n);
  const double h = 1e-6;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / rate;
    xs[i] = x(t);
    ys[i] = y(t);
    vxs[i] = (x(t + h) - x(t - h)) / (2 * h);
    vys[i] = (y(t + h) - y(t - h)) / (2 * h);
  }
  return UniformTrack(id, rate, 0.0, xs, ys, vxs, vys, std::move(segments));
}

inline HistorySnippet snippet_from(const std::vector<double>& x, const std::vector<double>& y,
                                   double rate, double t_pred = 0.0) {
  HistorySnippet s;
  s.x = x;
  s.y = y;
  s.vx = velocities_from_positions(x, rate);
  s.vy = velocities_from_positions(y, rate);
  s.t_pred = t_pred;
  s.end_index = x.size() - 1;
  return s;
}

inline Eigen::MatrixXd random_spd(int d, Rng& rng, double jitter = 0.5) {
  Eigen::MatrixXd a(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = 0; j < d; ++j) a(i, j) = rng.normal();
  }
  return a * a.transpose() / d + jitter * Eigen::MatrixXd::Identity(d, d);
}

inline Eigen::VectorXd random_vector(int d, Rng& rng, double scale = 1.0) {
  Eigen::VectorXd v(d);
  for (int i = 0; i < d; ++i) v(i) = scale * rng.normal();
  return v;
}

// Rows drawn from N(mean, cov).
inline Eigen::MatrixXd gaussian_rows(int n, const Eigen::VectorXd& mean,
                                     const Eigen::MatrixXd& cov, Rng& rng) {
  const Eigen::MatrixXd l = cov.llt().matrixL();
  Eigen::MatrixXd out(n, mean.size());
  for (int i = 0; i < n; ++i) {
    out.row(i) = (mean + l * random_vector(static_cast<int>(mean.size()), rng)).transpose();
  }
  return out;
}

inline double max_abs_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

inline double rel_diff(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b) {
  return (a - b).norm() / std::max(1e-300, b.norm());
}

}  // namespace fwp::testing
