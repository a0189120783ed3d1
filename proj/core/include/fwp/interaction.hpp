#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <nlohmann/json.hpp>

#include "fwp/hmm.hpp"
#include "fwp/motion.hpp"

namespace fwp {

inline constexpr double kDefaultLambda = 0.5;
inline constexpr double kDefaultDistanceFloor = 0.5;
inline constexpr std::size_t kDefaultTopK = 3;

/// Smallest Euclidean distance between the means of two trajectories at
/// synchronized steps. Throws Error("horizon_mismatch") if they differ.
double min_distance(const PredictedTrajectory& a, const PredictedTrajectory& b);
/// Closest approach of a trajectory's means to the origin.
double min_distance_to_origin(const PredictedTrajectory& a);

/// Top-K classifier output for one vehicle with the forecast under each
/// candidate maneuver (same order as `scores`).
struct VehicleCandidates {
  int vehicle_id = 0;
  std::vector<ManeuverScore> scores;
  std::vector<PredictedTrajectory> trajectories;
};

/// Individual and pairwise energies of one scene. All vehicles carry the
/// same number of candidates K.
class EnergyTable {
 public:
  EnergyTable() = default;
  /// Raw table; pairwise energies are indexed ((i*n + j)*K + k)*K + l and
  /// must be zero on the diagonal i == j.
  EnergyTable(std::size_t n, std::size_t k, double lambda, Eigen::MatrixXd hmm,
              Eigen::MatrixXd ego, std::vector<double> pairwise);

  std::size_t n() const { return n_; }
  std::size_t k() const { return k_; }
  double lambda() const { return lambda_; }
  const Eigen::MatrixXd& hmm() const { return hmm_; }
  const Eigen::MatrixXd& ego() const { return ego_; }
  double vi(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return vi_[((i * n_ + j) * k_ + k) * k_ + l];
  }
  const std::vector<double>& pairwise() const { return vi_; }

  /// E_hmm + lambda * E_ego.
  double unary(std::size_t i, std::size_t k) const { return hmm_(i, k) + lambda_ * ego_(i, k); }
  /// Both ordered terms of the pair (i, j), weighted by lambda.
  double pair(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return lambda_ * (vi(i, j, k, l) + vi(j, i, l, k));
  }

  // Optional labelling carried alongside the energies.
  std::vector<int> vehicle_ids;
  std::vector<std::vector<ManeuverClass>> candidates;
  std::vector<std::vector<PredictedTrajectory>> trajectories;

 private:
  std::size_t n_ = 0;
  std::size_t k_ = 0;
  double lambda_ = kDefaultLambda;
  Eigen::MatrixXd hmm_;
  Eigen::MatrixXd ego_;
  std::vector<double> vi_;
};

/// E_hmm = -L, E_ego = 1/max(eps, closest approach to the origin),
/// E_vi = 1/max(eps, min_distance). Throws Error("invalid_argument") when
/// vehicles carry different candidate counts or none at all, and
/// Error("horizon_mismatch") when forecasts differ in horizon.
EnergyTable build_energy_table(std::span<const VehicleCandidates> vehicles, double lambda,
                               double distance_floor = kDefaultDistanceFloor);

struct SolverStats {
  std::uint64_t nodes_expanded = 0;
  std::uint64_t bound_prunes = 0;
  std::uint64_t leaves_evaluated = 0;
};

struct SceneAssignment {
  std::vector<std::vector<std::uint8_t>> y;  // y[i][k] one-hot per vehicle
  std::vector<std::size_t> choice;           // candidate index per vehicle
  double objective = 0.0;
  SolverStats stats;
};

/// Quadratic objective of a choice vector using the literal double sum over
/// ordered vehicle pairs.
double assignment_energy(const EnergyTable& table, std::span<const std::size_t> choice);

/// Exact minimizer by depth-first branch and bound over vehicles in index
/// order. Ties resolve to the lexicographically smallest choice vector.
SceneAssignment solve_assignment(const EnergyTable& table);

/// Exhaustive scan with the same tie-break. Throws
/// Error("enumeration_bound_exceeded") when K^n > 1e6.
SceneAssignment enumerate_assignment(const EnergyTable& table);

/// Product variables z[(i*n + j)*K*K + k*K + l] = y_ik * y_jl for i != j.
std::vector<std::uint8_t> linearization_variables(const EnergyTable& table,
                                                  const std::vector<std::vector<std::uint8_t>>& y);
/// Checks z <= y_ik, z <= y_jl, z >= y_ik + y_jl - 1 and one-hot rows of y.
bool linearization_feasible(const EnergyTable& table,
                            const std::vector<std::vector<std::uint8_t>>& y,
                            std::span<const std::uint8_t> z);
/// Linear objective in (y, z).
double linear_objective(const EnergyTable& table, const std::vector<std::vector<std::uint8_t>>& y,
                        std::span<const std::uint8_t> z);

std::vector<std::vector<std::uint8_t>> one_hot(const EnergyTable& table,
                                               std::span<const std::size_t> choice);

/// Energy table, solver statistics and the chosen maneuvers as JSON.
nlohmann::json scene_debug_json(const EnergyTable& table, const SceneAssignment& assignment);

}  // namespace fwp
