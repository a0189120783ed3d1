#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "fwp/track.hpp"

namespace fwp {

enum class TrafficDensity { FreeFlow, StopAndGo };

std::string_view to_string(TrafficDensity density);
TrafficDensity parse_density(std::string_view name);

/// One recorded sequence: every surround track shares the sequence clock.
struct Scene {
  std::string sequence_id;
  TrafficDensity density = TrafficDensity::FreeFlow;
  std::vector<UniformTrack> tracks;
};

using Dataset = std::vector<Scene>;

/// Writes one JSON object per (sequence, vehicle, frame):
/// {"sequence_id","vehicle_id","frame","t","x","y","maneuver"}.
void write_dataset_jsonl(std::ostream& out, const Dataset& dataset);

/// Parses the JSON-lines format. Tracks are resampled to `rate` by linear
/// interpolation, velocities are recomputed from positions, and consecutive
/// equal labels become maneuver segments (null labels leave gaps).
Dataset read_dataset_jsonl(std::istream& in, double rate = kDefaultSampleRate);

/// Re-derives velocities from positions exactly as ingestion does, so
/// in-memory and file-loaded datasets see identical inputs.
UniformTrack normalize_track(const UniformTrack& track);
Dataset normalize_dataset(const Dataset& dataset);

/// Directory layout: <dir>/dataset.jsonl plus optional <dir>/manifest.json
/// (traffic density per sequence). A path to a .jsonl file is also accepted.
Dataset load_dataset(const std::filesystem::path& path, double rate = kDefaultSampleRate);
void save_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                  const nlohmann::json& manifest);

std::string read_text_file(const std::filesystem::path& path);
void write_text_file(const std::filesystem::path& path, std::string_view text);
nlohmann::json read_json_file(const std::filesystem::path& path);

}  // namespace fwp
