#include "fwp/interaction.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "fwp/error.hpp"

namespace fwp {

namespace {

void require_same_horizon(const PredictedTrajectory& a, const PredictedTrajectory& b) {
  if (a.horizon_steps() != b.horizon_steps() || a.rate != b.rate) {
    throw Error("horizon_mismatch", "trajectories have different horizons or rates");
  }
}

}  // namespace

double min_distance(const PredictedTrajectory& a, const PredictedTrajectory& b) {
  require_same_horizon(a, b);
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t t = 0; t < a.horizon_steps(); ++t) {
    best = std::min(best, (a.means[t] - b.means[t]).norm());
  }
  return best;
}

double min_distance_to_origin(const PredictedTrajectory& a) {
  double best = std::numeric_limits<double>::infinity();
  for (const auto& m : a.means) best = std::min(best, m.norm());
  return best;
}

EnergyTable::EnergyTable(std::size_t n, std::size_t k, double lambda, Eigen::MatrixXd hmm,
                         Eigen::MatrixXd ego, std::vector<double> pairwise)
    : n_(n), k_(k), lambda_(lambda), hmm_(std::move(hmm)), ego_(std::move(ego)),
      vi_(std::move(pairwise)) {
  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(k);
  if (k == 0) throw Error("invalid_argument", "energy table needs at least one candidate");
  if (hmm_.rows() != rows || hmm_.cols() != cols || ego_.rows() != rows || ego_.cols() != cols) {
    throw Error("invalid_argument", "energy table unary blocks have the wrong shape");
  }
  if (vi_.size() != n * n * k * k) {
    throw Error("invalid_argument", "energy table pairwise block has the wrong size");
  }
  if (!std::isfinite(lambda) || lambda < 0.0) {
    throw Error("invalid_argument", "lambda must be finite and non-negative");
  }
}

EnergyTable build_energy_table(std::span<const VehicleCandidates> vehicles, double lambda,
                               double distance_floor) {
  const std::size_t n = vehicles.size();
  if (!(distance_floor > 0.0)) throw Error("invalid_argument", "distance floor must be positive");
  if (n == 0) return EnergyTable(0, 1, lambda, Eigen::MatrixXd(0, 1), Eigen::MatrixXd(0, 1), {});
  const std::size_t k = vehicles.front().scores.size();
  for (const auto& v : vehicles) {
    if (v.scores.empty() || v.scores.size() != k || v.trajectories.size() != k) {
      throw Error("invalid_argument", "every vehicle needs the same number of candidates");
    }
  }
  const auto& ref = vehicles.front().trajectories.front();
  for (const auto& v : vehicles) {
    for (const auto& t : v.trajectories) require_same_horizon(ref, t);
  }

  const auto rows = static_cast<Eigen::Index>(n);
  const auto cols = static_cast<Eigen::Index>(k);
  Eigen::MatrixXd hmm(rows, cols);
  Eigen::MatrixXd ego(rows, cols);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      const auto r = static_cast<Eigen::Index>(i);
      const auto q = static_cast<Eigen::Index>(c);
      hmm(r, q) = -vehicles[i].scores[c].log_likelihood;
      ego(r, q) = 1.0 / std::max(distance_floor, min_distance_to_origin(vehicles[i].trajectories[c]));
    }
  }
  std::vector<double> vi(n * n * k * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          const double e = 1.0 / std::max(distance_floor, min_distance(vehicles[i].trajectories[a],
                                                                       vehicles[j].trajectories[b]));
          vi[((i * n + j) * k + a) * k + b] = e;
          vi[((j * n + i) * k + b) * k + a] = e;
        }
      }
    }
  }
  EnergyTable table(n, k, lambda, std::move(hmm), std::move(ego), std::move(vi));
  for (const auto& v : vehicles) {
    table.vehicle_ids.push_back(v.vehicle_id);
    std::vector<ManeuverClass> ms;
    for (const auto& s : v.scores) ms.push_back(s.maneuver);
    table.candidates.push_back(std::move(ms));
    table.trajectories.push_back(v.trajectories);
  }
  return table;
}

double assignment_energy(const EnergyTable& table, std::span<const std::size_t> choice) {
  const std::size_t n = table.n();
  if (choice.size() != n) throw Error("invalid_argument", "choice vector has the wrong length");
  double unary = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (choice[i] >= table.k()) throw Error("invalid_argument", "candidate index out of range");
    unary += table.unary(i, choice[i]);
  }
  double pairwise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (j != i) pairwise += table.vi(i, j, choice[i], choice[j]);
    }
  }
  return unary + table.lambda() * pairwise;
}

std::vector<std::vector<std::uint8_t>> one_hot(const EnergyTable& table,
                                               std::span<const std::size_t> choice) {
  std::vector<std::vector<std::uint8_t>> y(table.n(), std::vector<std::uint8_t>(table.k(), 0));
  for (std::size_t i = 0; i < choice.size(); ++i) y[i][choice[i]] = 1;
  return y;
}

namespace {

SceneAssignment make_assignment(const EnergyTable& table, std::vector<std::size_t> choice,
                                const SolverStats& stats) {
  SceneAssignment out;
  out.objective = assignment_energy(table, choice);
  out.y = one_hot(table, choice);
  out.choice = std::move(choice);
  out.stats = stats;
  return out;
}

class BranchAndBound {
 public:
  explicit BranchAndBound(const EnergyTable& table)
      : t_(table), n_(table.n()), k_(table.k()), choice_(n_, 0) {
    // Lower bound on the pairwise cost of each still-unassigned pair.
    pair_min_.assign(n_ * n_, 0.0);
    for (std::size_t i = 0; i < n_; ++i) {
      for (std::size_t j = i + 1; j < n_; ++j) {
        double m = std::numeric_limits<double>::infinity();
        for (std::size_t a = 0; a < k_; ++a) {
          for (std::size_t b = 0; b < k_; ++b) m = std::min(m, t_.pair(i, j, a, b));
        }
        pair_min_[i * n_ + j] = m;
      }
    }
  }

  SceneAssignment run() {
    if (n_ == 0) return make_assignment(t_, {}, stats_);
    recurse(0, 0.0);
    return make_assignment(t_, best_choice_, stats_);
  }

 private:
  // Bound for depth `depth` with vehicles [0, depth) fixed at partial cost.
  double bound(std::size_t depth, double partial) const {
    double lb = partial;
    for (std::size_t i = depth; i < n_; ++i) {
      double m = std::numeric_limits<double>::infinity();
      for (std::size_t a = 0; a < k_; ++a) {
        double c = t_.unary(i, a);
        for (std::size_t j = 0; j < depth; ++j) c += t_.pair(j, i, choice_[j], a);
        m = std::min(m, c);
      }
      lb += m;
      for (std::size_t j = i + 1; j < n_; ++j) lb += pair_min_[i * n_ + j];
    }
    return lb;
  }

  bool prunable(double lb) const {
    return have_best_ && lb > best_ + 1e-9 * (1.0 + std::abs(best_));
  }

  void recurse(std::size_t depth, double partial) {
    ++stats_.nodes_expanded;
    if (depth == n_) {
      ++stats_.leaves_evaluated;
      const double e = assignment_energy(t_, choice_);
      if (!have_best_ || e < best_) {
        best_ = e;
        best_choice_ = choice_;
        have_best_ = true;
      }
      return;
    }
    for (std::size_t a = 0; a < k_; ++a) {
      choice_[depth] = a;
      double cost = partial + t_.unary(depth, a);
      for (std::size_t j = 0; j < depth; ++j) cost += t_.pair(j, depth, choice_[j], a);
      if (prunable(bound(depth + 1, cost))) {
        ++stats_.bound_prunes;
        continue;
      }
      recurse(depth + 1, cost);
    }
  }

  const EnergyTable& t_;
  std::size_t n_, k_;
  std::vector<std::size_t> choice_;
  std::vector<double> pair_min_;
  std::vector<std::size_t> best_choice_;
  double best_ = 0.0;
  bool have_best_ = false;
  SolverStats stats_;
};

}  // namespace

SceneAssignment solve_assignment(const EnergyTable& table) { return BranchAndBound(table).run(); }

SceneAssignment enumerate_assignment(const EnergyTable& table) {
  const std::size_t n = table.n();
  const std::size_t k = table.k();
  double total = 1.0;
  for (std::size_t i = 0; i < n; ++i) total *= static_cast<double>(k);
  if (total > 1e6) {
    throw Error("enumeration_bound_exceeded",
                "K^n = " + std::to_string(k) + "^" + std::to_string(n) + " exceeds 1e6");
  }
  SolverStats stats;
  std::vector<std::size_t> choice(n, 0);
  std::vector<std::size_t> best_choice = choice;
  double best = std::numeric_limits<double>::infinity();
  bool first = true;
  while (true) {
    ++stats.leaves_evaluated;
    const double e = assignment_energy(table, choice);
    if (first || e < best) {
      best = e;
      best_choice = choice;
      first = false;
    }
    // Odometer increment with the last vehicle varying fastest.
    std::size_t pos = n;
    while (pos > 0) {
      --pos;
      if (++choice[pos] < k) break;
      choice[pos] = 0;
      if (pos == 0) {
        pos = n + 1;
        break;
      }
    }
    if (n == 0 || pos == n + 1) break;
  }
  stats.nodes_expanded = stats.leaves_evaluated;
  return make_assignment(table, best_choice, stats);
}

std::vector<std::uint8_t> linearization_variables(
    const EnergyTable& table, const std::vector<std::vector<std::uint8_t>>& y) {
  const std::size_t n = table.n();
  const std::size_t k = table.k();
  std::vector<std::uint8_t> z(n * n * k * k, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          z[((i * n + j) * k + a) * k + b] = static_cast<std::uint8_t>(y[i][a] & y[j][b]);
        }
      }
    }
  }
  return z;
}

bool linearization_feasible(const EnergyTable& table,
                            const std::vector<std::vector<std::uint8_t>>& y,
                            std::span<const std::uint8_t> z) {
  const std::size_t n = table.n();
  const std::size_t k = table.k();
  if (y.size() != n || z.size() != n * n * k * k) return false;
  for (const auto& row : y) {
    if (row.size() != k) return false;
    int sum = 0;
    for (auto v : row) {
      if (v > 1) return false;
      sum += v;
    }
    if (sum != 1) return false;
  }
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          const int zz = z[((i * n + j) * k + a) * k + b];
          const int yi = y[i][a];
          const int yj = y[j][b];
          if (zz > 1 || zz > yi || zz > yj || zz < yi + yj - 1) return false;
        }
      }
    }
  }
  return true;
}

double linear_objective(const EnergyTable& table, const std::vector<std::vector<std::uint8_t>>& y,
                        std::span<const std::uint8_t> z) {
  const std::size_t n = table.n();
  const std::size_t k = table.k();
  double unary = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t a = 0; a < k; ++a) {
      if (y[i][a]) unary += table.unary(i, a);
    }
  }
  double pairwise = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          if (z[((i * n + j) * k + a) * k + b]) pairwise += table.vi(i, j, a, b);
        }
      }
    }
  }
  return unary + table.lambda() * pairwise;
}

nlohmann::json scene_debug_json(const EnergyTable& table, const SceneAssignment& assignment) {
  using nlohmann::json;
  const std::size_t n = table.n();
  const std::size_t k = table.k();
  json vehicles = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    json v;
    v["index"] = i;
    if (i < table.vehicle_ids.size()) v["vehicle_id"] = table.vehicle_ids[i];
    json cands = json::array();
    for (std::size_t a = 0; a < k; ++a) {
      json c{{"e_hmm", table.hmm()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a))},
             {"e_ego", table.ego()(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(a))}};
      if (i < table.candidates.size()) c["maneuver"] = std::string(to_string(table.candidates[i][a]));
      cands.push_back(c);
    }
    v["candidates"] = cands;
    if (i < assignment.choice.size()) {
      v["assigned"] = assignment.choice[i];
      if (i < table.candidates.size()) {
        v["assigned_maneuver"] = std::string(to_string(table.candidates[i][assignment.choice[i]]));
      }
    }
    vehicles.push_back(v);
  }
  json pairs = json::array();
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      json m = json::array();
      for (std::size_t a = 0; a < k; ++a) {
        json row = json::array();
        for (std::size_t b = 0; b < k; ++b) row.push_back(table.vi(i, j, a, b));
        m.push_back(row);
      }
      pairs.push_back({{"i", i}, {"j", j}, {"e_vi", m}});
    }
  }
  return {{"lambda", table.lambda()},
          {"n", n},
          {"k", k},
          {"vehicles", vehicles},
          {"pairwise", pairs},
          {"objective", assignment.objective},
          {"solver",
           {{"nodes_expanded", assignment.stats.nodes_expanded},
            {"bound_prunes", assignment.stats.bound_prunes},
            {"leaves_evaluated", assignment.stats.leaves_evaluated}}}};
}

}  // namespace fwp
