#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "fwp/error.hpp"
#include "fwp/interaction.hpp"
#include "helpers.hpp"

using namespace fwp;

namespace {

PredictedTrajectory line(Eigen::Vector2d start, Eigen::Vector2d velocity, std::size_t steps = 75) {
  PredictedTrajectory p;
  p.t_pred = 3.0;
  p.rate = 15.0;
  for (std::size_t k = 0; k < steps; ++k) {
    p.means.push_back(start + velocity * static_cast<double>(k + 1) / 15.0);
    p.covariances.push_back(Eigen::Matrix2d::Identity());
  }
  return p;
}

EnergyTable random_table(std::size_t n, std::size_t k, Rng& rng, double lambda = 0.7) {
  Eigen::MatrixXd hmm(n, k), ego(n, k);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < k; ++c) {
      hmm(i, c) = rng.uniform(0, 3);
      ego(i, c) = rng.uniform(0, 2);
    }
  }
  std::vector<double> vi(n * n * k * k, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      for (std::size_t a = 0; a < k; ++a) {
        for (std::size_t b = 0; b < k; ++b) {
          // Heavy-tailed so that coupling often changes the answer.
          const double u = rng.uniform();
          vi[((i * n + j) * k + a) * k + b] = u < 0.2 ? rng.uniform(0, 8) : rng.uniform(0, 0.5);
        }
      }
    }
  }
  return EnergyTable(n, k, lambda, hmm, ego, vi);
}

std::vector<VehicleCandidates> random_scene(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<VehicleCandidates> out;
  for (std::size_t i = 0; i < n; ++i) {
    VehicleCandidates v;
    v.vehicle_id = static_cast<int>(i + 1);
    for (std::size_t c = 0; c < k; ++c) {
      v.scores.push_back({maneuver_at(c), -rng.uniform(10, 200)});
      v.trajectories.push_back(line(Eigen::Vector2d(rng.uniform(-40, 40), rng.uniform(-6, 6)),
                                    Eigen::Vector2d(rng.normal(0, 4), rng.normal(0, 0.5))));
    }
    out.push_back(std::move(v));
  }
  return out;
}

std::size_t hmm_argmax(const EnergyTable& t, std::size_t i) {
  std::size_t best = 0;
  for (std::size_t c = 1; c < t.k(); ++c) {
    if (t.hmm()(i, c) < t.hmm()(i, best)) best = c;
  }
  return best;
}

}  // namespace

TEST_CASE("minimum distance between trajectories") {
  CHECK(min_distance(line({0, 0}, {5, 0}), line({0, 3.7}, {5, 0})) == doctest::Approx(3.7));
  // Crossing the same point at step 14.
  const auto a = line({-1, 0}, {15, 0});
  const auto b = line({0, -1}, {0, 15});
  CHECK(min_distance(a, b) < 1e-12);
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto p = line({rng.normal(0, 20), rng.normal(0, 5)}, {rng.normal(0, 5), rng.normal()});
    const auto q = line({rng.normal(0, 20), rng.normal(0, 5)}, {rng.normal(0, 5), rng.normal()});
    double best = 1e300;
    for (std::size_t k = 0; k < 75; ++k) best = std::min(best, (p.means[k] - q.means[k]).norm());
    CHECK(min_distance(p, q) == best);
  }
  CHECK_THROWS_AS(min_distance(line({0, 0}, {1, 0}, 75), line({0, 0}, {1, 0}, 60)), Error);
}

TEST_CASE("energy table construction") {
  Rng rng(2);
  const auto scene = random_scene(4, 3, rng);
  const auto t = build_energy_table(scene, 0.5, 0.5);
  REQUIRE(t.n() == 4);
  REQUIRE(t.k() == 3);
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t a = 0; a < 3; ++a) {
      CHECK(t.hmm()(i, a) == -scene[i].scores[a].log_likelihood);
      const double d = min_distance_to_origin(scene[i].trajectories[a]);
      CHECK(t.ego()(i, a) == doctest::Approx(1.0 / std::max(0.5, d)));
      for (std::size_t j = 0; j < 4; ++j) {
        for (std::size_t b = 0; b < 3; ++b) {
          if (i == j) {
            CHECK(t.vi(i, j, a, b) == 0.0);
            continue;
          }
          CHECK(t.vi(i, j, a, b) >= 0.0);
          CHECK(t.vi(i, j, a, b) == t.vi(j, i, b, a));
          const double dd = min_distance(scene[i].trajectories[a], scene[j].trajectories[b]);
          CHECK(t.vi(i, j, a, b) == doctest::Approx(1.0 / std::max(0.5, dd)));
        }
      }
    }
  }
  CHECK(t.candidates[2][1] == maneuver_at(1));
  CHECK(t.vehicle_ids[3] == 4);
}

TEST_CASE("a trajectory through the ego hits the distance floor") {
  VehicleCandidates v;
  v.scores = {{ManeuverClass::CutInLeft, -20.0}};
  v.trajectories = {line({-3, 0}, {15, 0})};
  const std::vector<VehicleCandidates> scene = {v};
  const auto t = build_energy_table(scene, 0.5, 0.25);
  CHECK(t.ego()(0, 0) == doctest::Approx(4.0));
}

TEST_CASE("a single vehicle picks its best individual energy") {
  Rng rng(3);
  const auto scene = random_scene(1, 3, rng);
  const auto t = build_energy_table(scene, 0.8);
  const auto sol = solve_assignment(t);
  std::size_t best = 0;
  for (std::size_t c = 1; c < 3; ++c) {
    if (t.unary(0, c) < t.unary(0, best)) best = c;
  }
  CHECK(sol.choice[0] == best);
  CHECK(enumerate_assignment(t).choice[0] == best);
}

TEST_CASE("zero lambda decouples into per-vehicle HMM argmax") {
  Rng rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const auto t = random_table(5, 3, rng, 0.0);
    const auto sol = solve_assignment(t);
    for (std::size_t i = 0; i < 5; ++i) CHECK(sol.choice[i] == hmm_argmax(t, i));
  }
}

TEST_CASE("a strong conflict flips one vehicle") {
  Eigen::MatrixXd hmm(2, 2);
  hmm << 0.0, 0.1, 0.0, 0.1;
  std::vector<double> vi(16, 0.0);
  vi[((0 * 2 + 1) * 2 + 0) * 2 + 0] = 1000.0;
  vi[((1 * 2 + 0) * 2 + 0) * 2 + 0] = 1000.0;
  const EnergyTable t(2, 2, 1.0, hmm, Eigen::MatrixXd::Zero(2, 2), vi);
  const auto sol = solve_assignment(t);
  CHECK(sol.choice == std::vector<std::size_t>{0, 1});
  CHECK(sol.objective == doctest::Approx(0.1));
  const auto all = enumerate_assignment(t);
  CHECK(all.choice == sol.choice);
}

TEST_CASE("all-zero energies return the first assignment") {
  const EnergyTable t(3, 3, 1.0, Eigen::MatrixXd::Zero(3, 3), Eigen::MatrixXd::Zero(3, 3),
                      std::vector<double>(81, 0.0));
  CHECK(solve_assignment(t).choice == std::vector<std::size_t>{0, 0, 0});
  CHECK(enumerate_assignment(t).choice == std::vector<std::size_t>{0, 0, 0});
}

TEST_CASE("branch and bound matches enumeration on random instances") {
  Rng rng(5);
  std::uint64_t pruned = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto n = static_cast<std::size_t>(rng.uniform_int(1, 5));
    const auto k = static_cast<std::size_t>(rng.uniform_int(1, 3));
    const auto t = random_table(n, k, rng, rng.uniform(0, 2));
    const auto a = solve_assignment(t);
    const auto b = enumerate_assignment(t);
    CHECK(a.objective == b.objective);
    CHECK(a.choice == b.choice);
    CHECK(std::abs(a.objective - assignment_energy(t, a.choice)) < 1e-9);
    for (const auto& row : a.y) {
      int ones = 0;
      for (auto v : row) ones += v;
      CHECK(ones == 1);
    }
    pruned += a.stats.bound_prunes;
  }
  CHECK(pruned > 0);
}

TEST_CASE("enumeration refuses huge spaces") {
  const std::size_t n = 13, k = 3;  // 3^13 > 1e6
  const EnergyTable t(n, k, 1.0, Eigen::MatrixXd::Zero(n, k), Eigen::MatrixXd::Zero(n, k),
                      std::vector<double>(n * n * k * k, 0.0));
  try {
    enumerate_assignment(t);
    FAIL("enumerated 3^13 assignments");
  } catch (const Error& e) {
    CHECK(e.code() == "enumeration_bound_exceeded");
  }
  CHECK(solve_assignment(t).choice.size() == n);
}

TEST_CASE("the linearization is exact") {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 4, k = 3;
    const auto t = random_table(n, k, rng);
    std::vector<std::size_t> choice(n);
    for (auto& c : choice) c = static_cast<std::size_t>(rng.uniform_int(0, 2));
    const auto y = one_hot(t, choice);
    const auto z = linearization_variables(t, y);
    CHECK(linearization_feasible(t, y, z));
    CHECK(linear_objective(t, y, z) == doctest::Approx(assignment_energy(t, choice)).epsilon(1e-12));
    // Flipping any off-diagonal product variable breaks a constraint.
    const auto i = static_cast<std::size_t>(rng.uniform_int(0, 3));
    const auto j = (i + static_cast<std::size_t>(rng.uniform_int(1, 3))) % n;
    const auto a = static_cast<std::size_t>(rng.uniform_int(0, 2));
    const auto b = static_cast<std::size_t>(rng.uniform_int(0, 2));
    auto bad = z;
    bad[((i * n + j) * k + a) * k + b] ^= 1;
    CHECK_FALSE(linearization_feasible(t, y, bad));
  }
}

TEST_CASE("optimization never does worse than the HMM argmax") {
  Rng rng(7);
  for (int trial = 0; trial < 200; ++trial) {
    const auto t = random_table(5, 3, rng);
    std::vector<std::size_t> greedy(5);
    for (std::size_t i = 0; i < 5; ++i) greedy[i] = hmm_argmax(t, i);
    CHECK(solve_assignment(t).objective <= assignment_energy(t, greedy) + 1e-12);
  }
}

TEST_CASE("positive scaling of every energy keeps the argmin") {
  Rng rng(8);
  for (int trial = 0; trial < 100; ++trial) {
    const auto t = random_table(4, 3, rng);
    const double s = rng.uniform(0.01, 100.0);
    std::vector<double> vi = t.pairwise();
    for (auto& v : vi) v *= s;
    const EnergyTable scaled(t.n(), t.k(), t.lambda(), t.hmm() * s, t.ego() * s, vi);
    CHECK(solve_assignment(scaled).choice == solve_assignment(t).choice);
  }
}

TEST_CASE("a far-away vehicle does not change the others") {
  Rng rng(9);
  for (int trial = 0; trial < 30; ++trial) {
    auto scene = random_scene(3, 3, rng);
    const auto base = solve_assignment(build_energy_table(scene, 2.0));
    VehicleCandidates far;
    far.vehicle_id = 99;
    for (std::size_t c = 0; c < 3; ++c) {
      far.scores.push_back({maneuver_at(c), -rng.uniform(10, 50)});
      far.trajectories.push_back(line({1e6, 0}, {rng.normal(), 0}));
    }
    scene.push_back(far);
    const auto with = solve_assignment(build_energy_table(scene, 2.0));
    for (std::size_t i = 0; i < 3; ++i) CHECK(with.choice[i] == base.choice[i]);
  }
}

TEST_CASE("debug JSON carries the table and solver trace") {
  Rng rng(10);
  const auto t = build_energy_table(random_scene(3, 2, rng), 0.5);
  const auto sol = solve_assignment(t);
  const auto j = scene_debug_json(t, sol);
  CHECK(j.contains("solver"));
  CHECK(j.dump().find("nodes_expanded") != std::string::npos);
}
