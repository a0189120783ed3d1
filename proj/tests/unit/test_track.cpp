#include <doctest.h>

#include <cmath>

#include "fwp/error.hpp"
#include "fwp/track.hpp"
#include "helpers.hpp"

using namespace fwp;
using fwp::testing::sampled_track;

namespace {

UniformTrack linear_track(std::size_t n, std::vector<ManeuverSegment> segs = {}) {
  return sampled_track(
      n, 15.0, [](double t) { return 3.0 * t - 10.0; }, [](double t) { return 0.5 * t + 1.0; },
      std::move(segs));
}

}  // namespace

TEST_CASE("six second track yields 46 unit-stride snippets") {
  const auto track = linear_track(90);
  CHECK(extract_snippets(track, 3.0, 1).size() == 46);
}

TEST_CASE("three second track yields a single snippet equal to the track") {
  const auto track = linear_track(45);
  const auto snippets = extract_snippets(track, 3.0, 1);
  REQUIRE(snippets.size() == 1);
  CHECK(snippets[0].x == track.xs());
  CHECK(snippets[0].y == track.ys());
  CHECK(snippets[0].vx == track.vxs());
  CHECK(snippets[0].vy == track.vys());
  CHECK(snippets[0].t_pred == doctest::Approx(track.time_at(44)));
  CHECK(snippets[0].end_index == 44);
}

TEST_CASE("snippet labels switch at the window whose final sample crosses the boundary") {
  const auto a = ManeuverClass::LanePassLeftForward;
  const auto b = ManeuverClass::CutInLeft;
  const auto track = linear_track(150, {{0, 75, a}, {75, 150, b}});
  const auto snippets = extract_snippets(track, 3.0, 15);
  REQUIRE(!snippets.empty());
  for (const auto& s : snippets) {
    REQUIRE(s.label.has_value());
    // Oracle: segment membership of the final sample.
    CHECK(*s.label == (s.end_index < 75 ? a : b));
  }
  CHECK(snippets[1].label == a);   // ends at 59
  CHECK(snippets[2].label == a);   // ends at 74
  CHECK(snippets[3].label == b);   // ends at 89
}

TEST_CASE("window count matches the closed form for every length and stride") {
  for (std::size_t n = 2; n <= 160; n += 7) {
    const auto track = linear_track(n);
    for (std::size_t stride = 1; stride <= 20; ++stride) {
      const std::size_t expected = n < 45 ? 0 : (n - 45) / stride + 1;
      CHECK(extract_snippets(track, 3.0, stride).size() == expected);
    }
  }
}

TEST_CASE("prediction windows carry the following ground truth") {
  const auto track = linear_track(200);
  const auto windows = extract_prediction_windows(track, 3.0, 5.0, 15);
  REQUIRE(!windows.empty());
  for (const auto& w : windows) {
    REQUIRE(w.future_x.size() == 75);
    CHECK(w.history.end_index + 75 < track.size());
    CHECK(w.future_x.front() == track.xs()[w.history.end_index + 1]);
    CHECK(w.future_y.back() == track.ys()[w.history.end_index + 75]);
  }
  CHECK(windows.size() == (200 - 45 - 75) / 15 + 1);
}

TEST_CASE("lateral inversion mirrors cut-ins and is an involution") {
  const auto track = sampled_track(
      60, 15.0, [](double t) { return t; }, [](double t) { return 3.7 - t; },
      {{0, 60, ManeuverClass::CutInLeft}});
  const auto inv = lateral_invert(track);
  REQUIRE(inv.segments().size() == 1);
  CHECK(inv.segments()[0].maneuver == ManeuverClass::CutInRight);
  for (std::size_t i = 0; i < track.size(); ++i) {
    CHECK(inv.ys()[i] == -track.ys()[i]);
    CHECK(inv.vys()[i] == -track.vys()[i]);
  }
  CHECK(inv.xs() == track.xs());
  CHECK(inv.vxs() == track.vxs());
  CHECK(lateral_invert(inv) == track);
}

TEST_CASE("drift classes are their own mirror and every class mirrors back") {
  const auto track = sampled_track(
      30, 15.0, [](double t) { return 20 - t; }, [](double t) { return 3.7 - 0.5 * t; },
      {{0, 30, ManeuverClass::DriftFront}});
  const auto inv = lateral_invert(track);
  CHECK(inv.segments()[0].maneuver == ManeuverClass::DriftFront);
  CHECK(inv.ys()[10] == -track.ys()[10]);
  for (auto m : kAllManeuvers) CHECK(mirror(mirror(m)) == m);
}

TEST_CASE("longitudinal shifts") {
  const auto track = linear_track(50, {{0, 50, ManeuverClass::OvertakeLeft}});
  CHECK(longitudinal_shift(track, 0.0) == track);
  const auto back = longitudinal_shift(longitudinal_shift(track, 2.0), -2.0);
  for (std::size_t i = 0; i < track.size(); ++i) {
    CHECK(back.xs()[i] == doctest::Approx(track.xs()[i]).epsilon(1e-14));
  }
  CHECK(back.ys() == track.ys());
  const auto shifted = longitudinal_shift(track, 4.0);
  CHECK(shifted.xs()[7] == track.xs()[7] + 4.0);
  CHECK(shifted.vxs() == track.vxs());
  CHECK(shifted.segments() == track.segments());

  const auto all = standard_shifts(track);
  REQUIRE(all.size() == 7);
  CHECK(all[0] == track);
  for (std::size_t k = 0; k < kStandardShifts.size(); ++k) {
    CHECK(all[k + 1].xs()[0] == track.xs()[0] + kStandardShifts[k]);
  }
}

TEST_CASE("track construction rejects malformed input") {
  std::vector<double> v3 = {0, 1, 2};
  std::vector<double> v2 = {0, 1};
  CHECK_THROWS_AS(UniformTrack(1, 15, 0, v3, v2, v3, v3), Error);
  CHECK_THROWS_AS(UniformTrack(1, 15, 0, {0.0}, {0.0}, {0.0}, {0.0}), Error);
  try {
    UniformTrack(1, 15, 0, v3, v3, v3, v3,
                 {{0, 2, ManeuverClass::DriftRear}, {1, 3, ManeuverClass::DriftFront}});
    FAIL("overlapping segments accepted");
  } catch (const Error& e) {
    CHECK(e.code() == "invalid_track");
  }
  CHECK_THROWS_AS(UniformTrack(1, 15, 0, v3, v3, v3, v3, {{0, 4, ManeuverClass::DriftRear}}),
                  Error);
}

TEST_CASE("velocities from positions are exact on linear motion") {
  std::vector<double> xs(40);
  for (std::size_t i = 0; i < xs.size(); ++i) xs[i] = 2.5 * static_cast<double>(i) / 15.0 - 4.0;
  const auto v = velocities_from_positions(xs, 15.0);
  for (double vi : v) CHECK(vi == doctest::Approx(2.5).epsilon(1e-12));
}

TEST_CASE("linear resampling reproduces a linear signal on the new grid") {
  const std::vector<double> times = {0.0, 0.05, 0.2, 0.33, 0.5, 1.0};
  std::vector<double> values;
  for (double t : times) values.push_back(4.0 * t + 1.0);
  const auto out = resample_linear(times, values, 15.0);
  REQUIRE(out.size() == 16);
  for (std::size_t i = 0; i < out.size(); ++i) {
    CHECK(out[i] == doctest::Approx(4.0 * static_cast<double>(i) / 15.0 + 1.0).epsilon(1e-12));
  }
}

TEST_CASE("maneuver names round trip") {
  for (auto m : kAllManeuvers) {
    const auto parsed = parse_maneuver(to_string(m));
    REQUIRE(parsed.has_value());
    CHECK(*parsed == m);
  }
  CHECK(!parse_maneuver("teleport").has_value());
  CHECK(to_string(ManeuverClass::LanePassLeftForward) == "lane_pass_left_forward");
}
