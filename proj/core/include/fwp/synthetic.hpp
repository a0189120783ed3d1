#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <nlohmann/json.hpp>

#include "fwp/dataset_io.hpp"
#include "fwp/maneuver.hpp"
#include "fwp/track.hpp"

namespace fwp {

using ClassMix = std::array<double, kNumManeuvers>;

/// Class weights proportional to the snippet counts of the reference
/// freeway dataset (lane passes dominate, rear drifts are rarest).
ClassMix table_class_mix();
/// Weight 1 on a single class.
ClassMix single_class_mix(ManeuverClass m);

struct SceneConfig {
  int n_lanes = 3;                 // per side of the ego lane
  double lane_width = 3.7;         // m; left lanes have positive y
  double max_relative_speed = 8.0; // m/s, bound on |vx| at the start of a track
  double duration = 15.0;          // s
  double sample_rate = kDefaultSampleRate;
  TrafficDensity density = TrafficDensity::FreeFlow;
  ClassMix class_mix = table_class_mix();
  double noise_std = 0.15;         // m, truncated at +-1.9 sigma
  double range = 40.0;             // m, |x| bound for every sample
  double min_spacing = 5.0;        // m, same-lane initial gap (ego included)
  std::optional<int> vehicle_count;
  std::uint64_t seed = 0;

  /// Throws Error("invalid_config") on negative or non-normalized weights,
  /// non-positive sizes, or a duration shorter than `min_duration`.
  void validate(double min_duration = 8.0) const;
};

nlohmann::json to_json(const SceneConfig& cfg);
/// Missing keys keep their defaults. "class_mix" is either "table", a
/// maneuver name, or an object of weights keyed by maneuver name.
SceneConfig scene_config_from_json(const nlohmann::json& j);

/// One labelled track of the given class, starting at t = 0. The same
/// (class, cfg, seed) always yields the same track.
UniformTrack generate_maneuver(ManeuverClass maneuver, const SceneConfig& cfg,
                               std::uint64_t seed, int vehicle_id = 0);

/// One scene of cfg.density with non-overlapping initial lane slots.
/// Throws Error("infeasible_packing") when the vehicles cannot be placed.
std::vector<UniformTrack> generate_scene(const SceneConfig& cfg);

/// Every track, its six longitudinal shifts, its lateral mirror and the
/// mirror's six shifts: 14 tracks per input, originals first.
std::vector<UniformTrack> augment(std::span<const UniformTrack> tracks);

struct DatasetSpec {
  int n_scenes = 40;
  double stop_and_go_fraction = 0.25;
  std::uint64_t master_seed = 0;
  SceneConfig scene;
};

nlohmann::json to_json(const DatasetSpec& spec);
DatasetSpec dataset_spec_from_json(const nlohmann::json& j);

/// Scene i is generated with seed mix_seed(master_seed, i) and named
/// "seq_%04d". Every n-th scene (n = round(1/fraction)) is stop-and-go.
Dataset generate_dataset(const DatasetSpec& spec);
/// Provenance manifest: spec plus the seed of every scene.
nlohmann::json dataset_manifest(const DatasetSpec& spec);

}  // namespace fwp
