#include "fwp/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <string>

#include "fwp/error.hpp"
#include "fwp/rng.hpp"

namespace fwp {

using nlohmann::json;

ClassMix table_class_mix() {
  // Snippet counts per class of the reference dataset.
  const ClassMix counts = {9500, 10332, 10123, 12523, 1629, 2840, 1667, 3201, 1317, 553};
  double total = 0.0;
  for (double c : counts) total += c;
  ClassMix mix{};
  for (std::size_t i = 0; i < kNumManeuvers; ++i) mix[i] = counts[i] / total;
  return mix;
}

ClassMix single_class_mix(ManeuverClass m) {
  ClassMix mix{};
  mix[index_of(m)] = 1.0;
  return mix;
}

void SceneConfig::validate(double min_duration) const {
  double total = 0.0;
  for (double w : class_mix) {
    if (!(w >= 0.0) || !std::isfinite(w)) throw Error("invalid_config", "class weights must be >= 0");
    total += w;
  }
  if (std::abs(total - 1.0) > 1e-9) throw Error("invalid_config", "class weights must sum to 1");
  if (n_lanes < 1) throw Error("invalid_config", "n_lanes must be positive");
  if (!(lane_width > 0.0) || !(sample_rate > 0.0) || !(range > 0.0) || !(max_relative_speed > 1.0)) {
    throw Error("invalid_config", "lane_width, sample_rate, range must be positive and max speed > 1");
  }
  if (!(noise_std >= 0.0)) throw Error("invalid_config", "noise_std must be >= 0");
  if (!(min_spacing >= 0.0)) throw Error("invalid_config", "min_spacing must be >= 0");
  if (!(duration >= min_duration)) {
    throw Error("invalid_config", "duration must cover one history plus one horizon");
  }
  if (vehicle_count && *vehicle_count < 0) throw Error("invalid_config", "negative vehicle_count");
}

json to_json(const SceneConfig& cfg) {
  json mix = json::object();
  for (auto m : kAllManeuvers) mix[std::string(to_string(m))] = cfg.class_mix[index_of(m)];
  json j{{"n_lanes", cfg.n_lanes},
         {"lane_width", cfg.lane_width},
         {"max_relative_speed", cfg.max_relative_speed},
         {"duration", cfg.duration},
         {"sample_rate", cfg.sample_rate},
         {"traffic_density", std::string(to_string(cfg.density))},
         {"class_mix", mix},
         {"noise_std", cfg.noise_std},
         {"range", cfg.range},
         {"min_spacing", cfg.min_spacing},
         {"seed", cfg.seed}};
  if (cfg.vehicle_count) j["vehicle_count"] = *cfg.vehicle_count;
  return j;
}

SceneConfig scene_config_from_json(const json& j) {
  SceneConfig c;
  try {
    c.n_lanes = j.value("n_lanes", c.n_lanes);
    c.lane_width = j.value("lane_width", c.lane_width);
    c.max_relative_speed = j.value("max_relative_speed", c.max_relative_speed);
    c.duration = j.value("duration", c.duration);
    c.sample_rate = j.value("sample_rate", c.sample_rate);
    if (j.contains("traffic_density")) {
      c.density = parse_density(j["traffic_density"].get<std::string>());
    }
    if (j.contains("class_mix")) {
      const auto& m = j["class_mix"];
      if (m.is_string()) {
        const auto name = m.get<std::string>();
        if (name == "table") {
          c.class_mix = table_class_mix();
        } else if (auto cls = parse_maneuver(name)) {
          c.class_mix = single_class_mix(*cls);
        } else {
          throw Error("invalid_config", "unknown class_mix '" + name + "'");
        }
      } else {
        c.class_mix = ClassMix{};
        for (const auto& [key, value] : m.items()) {
          auto cls = parse_maneuver(key);
          if (!cls) throw Error("invalid_config", "unknown maneuver '" + key + "' in class_mix");
          c.class_mix[index_of(*cls)] = value.get<double>();
        }
      }
    }
    c.noise_std = j.value("noise_std", c.noise_std);
    c.range = j.value("range", c.range);
    c.min_spacing = j.value("min_spacing", c.min_spacing);
    if (j.contains("vehicle_count") && !j["vehicle_count"].is_null()) {
      c.vehicle_count = j["vehicle_count"].get<int>();
    }
    c.seed = j.value("seed", c.seed);
  } catch (const json::exception& e) {
    throw Error("invalid_config", std::string("scene config: ") + e.what());
  }
  return c;
}

namespace {

struct AccelPhase {
  double start = 0.0;
  double length = 0.0;
  double accel = 0.0;
};

struct LaneChange {
  double start = 0.0;
  double length = 1.0;
  double dy = 0.0;
};

// Ego-relative speed wave shared by a stop-and-go scene. Vehicles lag the
// ego phase in proportion to their initial longitudinal offset.
struct Oscillation {
  double amplitude = 0.0;
  double omega = 0.0;
  double ego_phase = 0.0;
  double lag_per_m = 0.0;
};

struct Template {
  double x0 = 0.0;
  double v0 = 0.0;
  double y0 = 0.0;
  std::vector<AccelPhase> accels;
  std::vector<LaneChange> lane_changes;
  double phase = 0.0;  // vehicle phase for the oscillation
};

Oscillation scene_oscillation(const SceneConfig& cfg) {
  if (cfg.density != TrafficDensity::StopAndGo) return {};
  Rng rng(mix_seed(cfg.seed, 0x05C111A7ULL));
  Oscillation o;
  o.amplitude = 4.0;  // absolute speed swings between 0 and 8 m/s
  o.omega = 2.0 * std::numbers::pi / rng.uniform(10.0, 16.0);
  o.ego_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  o.lag_per_m = rng.uniform(0.01, 0.02);
  return o;
}

struct Kinematics {
  double x, y, vx, vy;
};

Kinematics evaluate(const Template& tp, const Oscillation& osc, double t) {
  double x = tp.x0 + tp.v0 * t;
  double vx = tp.v0;
  for (const auto& a : tp.accels) {
    const double tau = std::clamp(t - a.start, 0.0, a.length);
    x += a.accel * tau * tau / 2.0 + a.accel * a.length * std::max(0.0, t - a.start - a.length);
    vx += a.accel * tau;
  }
  if (osc.amplitude > 0.0) {
    const double w = osc.omega;
    const double pv = tp.phase;
    const double pe = osc.ego_phase;
    vx += osc.amplitude * (std::sin(w * t + pv) - std::sin(w * t + pe));
    x += -osc.amplitude / w * ((std::cos(w * t + pv) - std::cos(pv)) - (std::cos(w * t + pe) - std::cos(pe)));
  }
  double y = tp.y0;
  double vy = 0.0;
  for (const auto& lc : tp.lane_changes) {
    const double s = std::clamp((t - lc.start) / lc.length, 0.0, 1.0);
    const double s2 = s * s;
    y += lc.dy * s2 * s * (10.0 - 15.0 * s + 6.0 * s2);
    vy += lc.dy * 30.0 * s2 * (1.0 - s) * (1.0 - s) / lc.length;
  }
  return {x, y, vx, vy};
}

int side_of(ManeuverClass m, Rng& rng) {
  switch (m) {
    case ManeuverClass::LanePassLeftForward:
    case ManeuverClass::LanePassLeftBack:
    case ManeuverClass::OvertakeLeft:
    case ManeuverClass::CutInLeft:
      return 1;
    case ManeuverClass::LanePassRightForward:
    case ManeuverClass::LanePassRightBack:
    case ManeuverClass::OvertakeRight:
    case ManeuverClass::CutInRight:
      return -1;
    case ManeuverClass::DriftFront:
    case ManeuverClass::DriftRear:
      return rng.uniform() < 0.5 ? 1 : -1;
  }
  return 1;
}

Template sample_template(ManeuverClass m, const SceneConfig& cfg, Rng& rng) {
  Template tp;
  const int side = side_of(m, rng);
  const double w = cfg.lane_width;
  const double dur = cfg.duration;
  // Lane passes must stay within +-range for the whole track.
  const double vmax = std::min(cfg.max_relative_speed, 0.95 * 2.0 * cfg.range / dur);
  switch (m) {
    case ManeuverClass::LanePassLeftForward:
    case ManeuverClass::LanePassRightForward:
    case ManeuverClass::LanePassLeftBack:
    case ManeuverClass::LanePassRightBack: {
      const bool forward =
          m == ManeuverClass::LanePassLeftForward || m == ManeuverClass::LanePassRightForward;
      const int lane = static_cast<int>(rng.uniform_int(1, cfg.n_lanes));
      tp.y0 = side * lane * w;
      const double speed = rng.uniform(std::min(1.0, vmax), vmax);
      tp.v0 = forward ? speed : -speed;
      const double travel = speed * dur;
      const double lo = -cfg.range + (forward ? 0.0 : travel);
      const double hi = cfg.range - (forward ? travel : 0.0);
      tp.x0 = rng.uniform(lo, std::max(lo, hi));
      break;
    }
    case ManeuverClass::OvertakeLeft:
    case ManeuverClass::OvertakeRight: {
      tp.y0 = 0.0;
      tp.x0 = rng.uniform(-30.0, -18.0);
      tp.v0 = rng.uniform(0.5, 2.5);
      const double t_lc = rng.uniform(1.0, 5.0);
      tp.lane_changes.push_back({t_lc, rng.uniform(3.0, 5.0), side * w});
      tp.accels.push_back({t_lc + rng.uniform(0.0, 1.0), rng.uniform(2.5, 4.0), rng.uniform(0.8, 1.6)});
      break;
    }
    case ManeuverClass::CutInLeft:
    case ManeuverClass::CutInRight: {
      tp.y0 = side * w;
      tp.x0 = rng.uniform(-20.0, -5.0);
      tp.v0 = rng.uniform(3.0, 6.0);
      const double merge_x = rng.uniform(5.0, 12.0);
      const double t_lc = (merge_x - tp.x0) / tp.v0;
      tp.lane_changes.push_back({t_lc, rng.uniform(3.0, 4.5), -side * w});
      const double v_final = rng.uniform(0.5, 2.0);
      const double len = rng.uniform(2.0, 4.0);
      tp.accels.push_back({t_lc, len, (v_final - tp.v0) / len});
      break;
    }
    case ManeuverClass::DriftFront:
    case ManeuverClass::DriftRear: {
      const bool front = m == ManeuverClass::DriftFront;
      tp.y0 = side * w;
      tp.x0 = front ? rng.uniform(12.0, 30.0) : rng.uniform(-30.0, -12.0);
      tp.v0 = front ? rng.uniform(-3.0, -1.0) : rng.uniform(1.0, 3.0);
      const double t_lc = rng.uniform(1.0, 5.0);
      tp.lane_changes.push_back({t_lc, rng.uniform(3.0, 5.0), -side * w});
      const double v_final = front ? rng.uniform(-0.3, 0.5) : rng.uniform(-0.5, 0.3);
      const double len = rng.uniform(2.0, 4.0);
      tp.accels.push_back({std::max(0.0, t_lc + rng.uniform(-1.0, 1.0)), len, (v_final - tp.v0) / len});
      break;
    }
  }
  return tp;
}

bool template_valid(ManeuverClass m, const Template& tp, const Oscillation& osc,
                    const SceneConfig& cfg, std::size_t n) {
  const double margin = 1.9 * cfg.noise_std;
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = evaluate(tp, osc, static_cast<double>(i) / cfg.sample_rate);
    if (std::abs(k.x) > cfg.range - margin) return false;
    if (m == ManeuverClass::DriftFront && k.x < 4.0) return false;
    if (m == ManeuverClass::DriftRear && k.x > -4.0) return false;
  }
  const auto last = evaluate(tp, osc, static_cast<double>(n - 1) / cfg.sample_rate);
  if ((m == ManeuverClass::OvertakeLeft || m == ManeuverClass::OvertakeRight) && last.x <= tp.x0) {
    return false;
  }
  return true;
}

double truncated_normal(Rng& rng) {
  for (;;) {
    const double z = rng.normal();
    if (std::abs(z) <= 1.9) return z;
  }
}

}  // namespace

UniformTrack generate_maneuver(ManeuverClass maneuver, const SceneConfig& cfg,
                               std::uint64_t seed, int vehicle_id) {
  cfg.validate(2.0 / cfg.sample_rate);
  const auto n = static_cast<std::size_t>(std::lround(cfg.duration * cfg.sample_rate)) + 1;
  const Oscillation osc = scene_oscillation(cfg);
  Rng rng(mix_seed(seed, index_of(maneuver)));
  Template tp;
  bool ok = false;
  for (int attempt = 0; attempt < 500 && !ok; ++attempt) {
    tp = sample_template(maneuver, cfg, rng);
    tp.phase = osc.ego_phase - osc.lag_per_m * tp.x0;
    ok = template_valid(maneuver, tp, osc, cfg, n);
  }
  if (!ok) {
    throw Error("invalid_config", std::string("cannot fit a ") + std::string(to_string(maneuver)) +
                                      " track inside the range for this duration");
  }
  std::vector<double> xs(n), ys(n), vxs(n), vys(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto k = evaluate(tp, osc, static_cast<double>(i) / cfg.sample_rate);
    xs[i] = k.x;
    ys[i] = k.y;
    vxs[i] = k.vx;
    vys[i] = k.vy;
  }
  if (cfg.noise_std > 0.0) {
    for (std::size_t i = 0; i < n; ++i) {
      xs[i] += cfg.noise_std * truncated_normal(rng);
      ys[i] += cfg.noise_std * truncated_normal(rng);
    }
  }
  return UniformTrack(vehicle_id, cfg.sample_rate, 0.0, std::move(xs), std::move(ys),
                      std::move(vxs), std::move(vys), {{0, n, maneuver}});
}

std::vector<UniformTrack> generate_scene(const SceneConfig& cfg) {
  cfg.validate();
  Rng rng(mix_seed(cfg.seed, 0x5CE4EULL));
  const int count = cfg.vehicle_count
                        ? *cfg.vehicle_count
                        : static_cast<int>(cfg.density == TrafficDensity::StopAndGo
                                               ? rng.uniform_int(5, 8)
                                               : rng.uniform_int(3, 6));
  struct Slot {
    long lane;
    double x;
  };
  std::vector<Slot> taken = {{0, 0.0}};  // the ego vehicle
  std::vector<UniformTrack> tracks;
  for (int v = 0; v < count; ++v) {
    bool placed = false;
    for (int attempt = 0; attempt < 60 && !placed; ++attempt) {
      double u = rng.uniform();
      std::size_t cls = 0;
      for (; cls + 1 < kNumManeuvers; ++cls) {
        if (u < cfg.class_mix[cls]) break;
        u -= cfg.class_mix[cls];
      }
      while (cfg.class_mix[cls] == 0.0 && cls > 0) --cls;  // rounding at the top end
      const std::uint64_t track_seed = mix_seed(cfg.seed, 1000 + 64 * static_cast<std::uint64_t>(v) +
                                                              static_cast<std::uint64_t>(attempt));
      UniformTrack track = generate_maneuver(maneuver_at(cls), cfg, track_seed, v + 1);
      const Slot slot{std::lround(track.ys().front() / cfg.lane_width), track.xs().front()};
      const bool clear = std::none_of(taken.begin(), taken.end(), [&](const Slot& s) {
        return s.lane == slot.lane && std::abs(s.x - slot.x) < cfg.min_spacing;
      });
      if (clear) {
        taken.push_back(slot);
        tracks.push_back(std::move(track));
        placed = true;
      }
    }
    if (!placed) {
      throw Error("infeasible_packing", "could not place vehicle " + std::to_string(v + 1) + " of " +
                                            std::to_string(count) + " without overlap");
    }
  }
  return tracks;
}

std::vector<UniformTrack> augment(std::span<const UniformTrack> tracks) {
  std::vector<UniformTrack> out;
  out.reserve(tracks.size() * 14);
  for (const auto& t : tracks) {
    for (auto& s : standard_shifts(t)) out.push_back(std::move(s));
    for (auto& s : standard_shifts(lateral_invert(t))) out.push_back(std::move(s));
  }
  return out;
}

json to_json(const DatasetSpec& spec) {
  return {{"n_scenes", spec.n_scenes},
          {"stop_and_go_fraction", spec.stop_and_go_fraction},
          {"master_seed", spec.master_seed},
          {"scene", to_json(spec.scene)}};
}

DatasetSpec dataset_spec_from_json(const json& j) {
  DatasetSpec s;
  try {
    s.n_scenes = j.value("n_scenes", s.n_scenes);
    s.stop_and_go_fraction = j.value("stop_and_go_fraction", s.stop_and_go_fraction);
    s.master_seed = j.value("master_seed", s.master_seed);
  } catch (const json::exception& e) {
    throw Error("invalid_config", std::string("dataset spec: ") + e.what());
  }
  if (j.contains("scene")) s.scene = scene_config_from_json(j["scene"]);
  if (s.n_scenes < 0) throw Error("invalid_config", "n_scenes must be >= 0");
  if (!(s.stop_and_go_fraction >= 0.0 && s.stop_and_go_fraction <= 1.0)) {
    throw Error("invalid_config", "stop_and_go_fraction must lie in [0, 1]");
  }
  return s;
}

namespace {

bool is_stop_and_go(const DatasetSpec& spec, int i) {
  if (spec.stop_and_go_fraction <= 0.0) return false;
  const long every = std::max(1L, std::lround(1.0 / spec.stop_and_go_fraction));
  return i % every == every - 1;
}

std::string sequence_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "seq_%04d", i);
  return buf;
}

}  // namespace

Dataset generate_dataset(const DatasetSpec& spec) {
  Dataset out;
  out.reserve(static_cast<std::size_t>(spec.n_scenes));
  for (int i = 0; i < spec.n_scenes; ++i) {
    SceneConfig cfg = spec.scene;
    cfg.seed = mix_seed(spec.master_seed, static_cast<std::uint64_t>(i));
    cfg.density = is_stop_and_go(spec, i) ? TrafficDensity::StopAndGo : TrafficDensity::FreeFlow;
    out.push_back(Scene{sequence_name(i), cfg.density, generate_scene(cfg)});
  }
  return out;
}

json dataset_manifest(const DatasetSpec& spec) {
  json seeds = json::array();
  for (int i = 0; i < spec.n_scenes; ++i) {
    seeds.push_back({{"sequence_id", sequence_name(i)},
                     {"seed", mix_seed(spec.master_seed, static_cast<std::uint64_t>(i))}});
  }
  return {{"generator", "fwp-synthetic-1"}, {"spec", to_json(spec)}, {"scene_seeds", seeds}};
}

}  // namespace fwp
