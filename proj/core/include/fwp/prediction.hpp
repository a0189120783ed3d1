#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "fwp/chebyshev.hpp"
#include "fwp/hmm.hpp"
#include "fwp/imm.hpp"
#include "fwp/motion.hpp"
#include "fwp/vgmm.hpp"

namespace fwp {

/// Maps stacked per-step velocities [vx; vy] (2n) to stacked displacements
/// [x; y] (2n): two identical lower-triangular blocks filled with dt.
class AccumulatorMatrix {
 public:
  AccumulatorMatrix(std::size_t steps, double dt) : steps_(steps), dt_(dt) {}

  std::size_t steps() const { return steps_; }
  double dt() const { return dt_; }

  Eigen::MatrixXd dense() const;
  /// (A v)_i = dt * sum_{j <= i} v_j on each axis.
  Eigen::VectorXd apply(const Eigen::VectorXd& stacked_velocity) const;

 private:
  std::size_t steps_;
  double dt_;
};

/// Converts moments of the future-velocity Chebyshev coefficients c_f into a
/// position forecast anchored at `anchor`: velocities are decoded on the
/// output grid, accumulated by A, and per-step 2x2 blocks are read off
/// A B Sigma B^T A^T (B the block Chebyshev evaluation map).
PredictedTrajectory trajectory_from_coefficient_moments(const Eigen::VectorXd& cf_mean,
                                                        const Eigen::MatrixXd& cf_cov,
                                                        const Eigen::Vector2d& anchor,
                                                        double t_pred, double t_f, double rate,
                                                        int degree);

/// VGMM over standardized joint Chebyshev vectors [c_h; c_f].
struct ProbabilisticModel {
  std::optional<ManeuverClass> maneuver;  // empty for the monolithic model
  int degree = kDefaultChebDegree;
  Eigen::VectorXd offset;  // joint standardization
  Eigen::VectorXd scale;
  VgmmPosterior posterior;
  std::size_t training_rows = 0;
};

ProbabilisticModel train_probabilistic_model(std::span<const PredictionWindow> windows,
                                             std::optional<ManeuverClass> maneuver,
                                             int num_components, std::uint64_t seed,
                                             int degree = kDefaultChebDegree,
                                             int max_iter = 200, double rel_tol = 1e-5);

/// Moments of c_f given a snippet, in original (unstandardized) units. With
/// `map_component` only the most probable conditional component is used.
MixtureMoments conditional_future_moments(const ProbabilisticModel& model,
                                          const HistorySnippet& snippet,
                                          bool map_component = false);

PredictedTrajectory prob_predict(const ProbabilisticModel& model, const HistorySnippet& snippet,
                                 double t_f, double rate, bool map_component = false);

/// Element-wise average of means and covariances. Throws
/// Error("horizon_mismatch") when t_pred, rate or horizon differ.
PredictedTrajectory fuse(const PredictedTrajectory& motion, const PredictedTrajectory& prob);

/// Trained models for every ablation setting.
struct ModelBundle {
  ImmConfig imm;
  double rate = kDefaultSampleRate;
  int degree = kDefaultChebDegree;
  std::vector<HmmModel> hmms;  // ordered by ManeuverClass
  std::array<std::optional<ProbabilisticModel>, kNumManeuvers> class_models;
  std::optional<ProbabilisticModel> monolithic;
  std::string config_hash;
  nlohmann::json experiment;  // configuration the bundle was trained with
};

struct ImmOnlyRoute {};
struct MonolithicRoute {};
using PredictionRoute = std::variant<ImmOnlyRoute, MonolithicRoute, ManeuverClass>;

/// IMM forecast fused with the route's probabilistic forecast; the IMM-only
/// route returns the IMM forecast unchanged. Throws Error("missing_model").
PredictedTrajectory predict_vehicle(const ModelBundle& bundle, const ImmEstimate& imm,
                                    const HistorySnippet& snippet, const PredictionRoute& route,
                                    double t_f);

nlohmann::json to_json(const ProbabilisticModel& model);
ProbabilisticModel probabilistic_model_from_json(const nlohmann::json& j);

nlohmann::json to_json(const ModelBundle& bundle);
ModelBundle bundle_from_json(const nlohmann::json& j);

/// FNV-1a 64-bit digest, hex encoded.
std::string fnv1a_hex(std::string_view bytes);
/// Digest of the bundle's canonical JSON serialization.
std::string bundle_hash(const ModelBundle& bundle);

}  // namespace fwp
