#pragma once

#include <string_view>
#include <vector>

#include <Eigen/Core>

namespace fwp {

/// Kinematic model of a filter. State layouts:
///   CV   [x, y, vx, vy]
///   CA   [x, y, vx, vy, ax, ay]
///   CTRV [x, y, theta, v, omega]
enum class MotionModel { CV = 0, CA = 1, CTRV = 2 };

std::string_view to_string(MotionModel model);
int state_dim(MotionModel model);

struct FilterState {
  MotionModel kind = MotionModel::CV;
  Eigen::VectorXd mean;
  Eigen::MatrixXd covariance;
};

/// Process and measurement noise. CV uses white-noise acceleration, CA
/// white-noise jerk, CTRV longitudinal acceleration plus yaw acceleration.
struct MotionNoise {
  double sigma_accel = 1.0;       // m/s^2, CV
  double sigma_jerk = 1.0;        // m/s^3, CA
  double sigma_accel_ctrv = 1.0;  // m/s^2, CTRV
  double sigma_yaw_accel = 0.2;   // rad/s^2, CTRV
  double measurement_var = 0.25;  // m^2 per axis

  Eigen::Matrix2d measurement_cov() const {
    return Eigen::Matrix2d::Identity() * measurement_var;
  }
};

/// |omega| below this uses the straight-line limit of the CTRV map.
inline constexpr double kCtrvStraightThreshold = 1e-9;

Eigen::MatrixXd process_noise(const FilterState& state, double dt, const MotionNoise& noise);

/// Time update. CV/CA are linear; CTRV is propagated through the exact
/// nonlinear map and its Jacobian. Requires dt > 0.
FilterState filter_predict(const FilterState& state, double dt,
                           const MotionNoise& noise = MotionNoise{});

struct FilterUpdate {
  FilterState state;
  double log_likelihood = 0.0;  // Gaussian innovation log-density
};

/// Position measurement update. Throws Error("degenerate_innovation") when
/// the innovation covariance is not positive definite.
FilterUpdate filter_update(const FilterState& state, const Eigen::Vector2d& observation,
                           const Eigen::Matrix2d& measurement_cov);

/// Mean and covariance of [x, y, vx, vy] implied by a state of any kind.
void to_cartesian(const FilterState& state, Eigen::Vector4d& mean, Eigen::Matrix4d& cov);

/// Per-step Gaussian forecast of a vehicle position.
struct PredictedTrajectory {
  double t_pred = 0.0;
  double rate = 15.0;
  std::vector<Eigen::Vector2d> means;        // step k at t_pred + (k+1)/rate
  std::vector<Eigen::Matrix2d> covariances;  // m^2

  std::size_t horizon_steps() const { return means.size(); }
  PredictedTrajectory truncated(std::size_t steps) const;
};

/// Symmetrizes and clips negative eigenvalues of a 2x2 covariance.
Eigen::Matrix2d symmetrize_psd(const Eigen::Matrix2d& cov);

}  // namespace fwp
