#pragma once

#include <array>

#include <Eigen/Core>

#include "fwp/motion.hpp"
#include "fwp/track.hpp"

namespace fwp {

inline constexpr int kNumMotionModels = 3;

struct ImmConfig {
  MotionNoise noise;
  double self_transition = 0.96;  // remaining mass split evenly

  Eigen::Matrix3d transition_matrix() const;
};

/// Filter bank (index order CV, CA, CTRV) with model probabilities.
struct ImmEstimate {
  std::array<FilterState, kNumMotionModels> filters;
  Eigen::Vector3d model_probs = Eigen::Vector3d::Constant(1.0 / 3.0);
  Eigen::Matrix3d transition = Eigen::Matrix3d::Constant(1.0 / 3.0);
};

/// Warm start at (x, y) with velocity (vx, vy): higher-order terms zero,
/// covariance diag(1, 1, 4, 4[, 9, 9]) for CV/CA and diag(1, 1, 1, 4, 0.25)
/// for CTRV; uniform model probabilities.
ImmEstimate imm_init(const Eigen::Vector2d& position, const Eigen::Vector2d& velocity,
                     const ImmConfig& config = ImmConfig{});

/// Posterior model probabilities from prior probabilities, the Markov
/// switching matrix and per-model innovation log-likelihoods. Falls back to
/// uniform (with a warning) when every likelihood underflows.
Eigen::Vector3d imm_update_probs(const Eigen::Vector3d& prior_probs,
                                 const Eigen::Matrix3d& transition,
                                 const Eigen::Vector3d& log_likelihoods);

/// One interaction / predict / update / probability cycle.
ImmEstimate imm_step(const ImmEstimate& estimate, const Eigen::Vector2d& observation, double dt,
                     const ImmConfig& config = ImmConfig{});

/// Initializes from the first two samples of the snippet and runs the bank
/// over the remaining history.
ImmEstimate imm_filter_snippet(const HistorySnippet& snippet, double rate,
                               const ImmConfig& config = ImmConfig{});

/// Open-loop forecast of every filter for round(t_f * rate) steps, combined
/// per step as a Gaussian mixture (within-model plus between-model spread).
PredictedTrajectory imm_forecast(const ImmEstimate& estimate, double t_f, double rate,
                                 double t_pred = 0.0, const ImmConfig& config = ImmConfig{});

/// Forecast of a single filter (used for tests and diagnostics).
PredictedTrajectory single_model_forecast(const FilterState& state, double t_f, double rate,
                                          double t_pred, const MotionNoise& noise);

}  // namespace fwp
