#include "fwp/dataset_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include "fwp/error.hpp"
#include "fwp/log.hpp"

namespace fwp {

using nlohmann::json;

std::string_view to_string(TrafficDensity density) {
  return density == TrafficDensity::StopAndGo ? "stop_and_go" : "free_flow";
}

TrafficDensity parse_density(std::string_view name) {
  if (name == "free_flow") return TrafficDensity::FreeFlow;
  if (name == "stop_and_go") return TrafficDensity::StopAndGo;
  throw Error("invalid_config", "unknown traffic density '" + std::string(name) + "'");
}

void write_dataset_jsonl(std::ostream& out, const Dataset& dataset) {
  for (const auto& scene : dataset) {
    for (const auto& track : scene.tracks) {
      for (std::size_t i = 0; i < track.size(); ++i) {
        const double t = track.time_at(i);
        json rec;
        rec["sequence_id"] = scene.sequence_id;
        rec["vehicle_id"] = track.vehicle_id();
        rec["frame"] = std::lround(t * track.sample_rate());
        rec["t"] = t;
        rec["x"] = track.xs()[i];
        rec["y"] = track.ys()[i];
        const auto label = track.label_at(i);
        rec["maneuver"] = label ? json(std::string(to_string(*label))) : json(nullptr);
        out << rec.dump() << '\n';
      }
    }
  }
}

namespace {

struct RawSample {
  long frame;
  double t, x, y;
  std::optional<ManeuverClass> label;
};

std::vector<ManeuverSegment> segments_from_labels(
    const std::vector<std::optional<ManeuverClass>>& labels) {
  std::vector<ManeuverSegment> segments;
  std::size_t i = 0;
  while (i < labels.size()) {
    if (!labels[i]) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < labels.size() && labels[j] == labels[i]) ++j;
    segments.push_back({i, j, *labels[i]});
    i = j;
  }
  return segments;
}

UniformTrack build_track(int vehicle_id, std::vector<RawSample> samples, double rate) {
  std::sort(samples.begin(), samples.end(),
            [](const RawSample& a, const RawSample& b) { return a.frame < b.frame; });
  std::vector<double> ts, xs, ys;
  for (const auto& s : samples) {
    ts.push_back(s.t);
    xs.push_back(s.x);
    ys.push_back(s.y);
  }
  bool uniform = true;
  for (std::size_t i = 1; i < samples.size(); ++i) {
    uniform = uniform && samples[i].frame == samples[i - 1].frame + 1 &&
              std::abs(ts[i] - ts[i - 1] - 1.0 / rate) < 1e-6;
  }
  std::vector<double> rx = uniform ? xs : resample_linear(ts, xs, rate);
  std::vector<double> ry = uniform ? ys : resample_linear(ts, ys, rate);
  std::vector<std::optional<ManeuverClass>> labels(rx.size());
  std::size_t j = 0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    const double t = ts.front() + static_cast<double>(i) / rate;
    while (j + 1 < ts.size() && std::abs(ts[j + 1] - t) <= std::abs(ts[j] - t)) ++j;
    labels[i] = samples[j].label;
  }
  auto vx = velocities_from_positions(rx, rate);
  auto vy = velocities_from_positions(ry, rate);
  return UniformTrack(vehicle_id, rate, ts.front(), std::move(rx), std::move(ry), std::move(vx),
                      std::move(vy), segments_from_labels(labels));
}

}  // namespace

Dataset read_dataset_jsonl(std::istream& in, double rate) {
  std::vector<std::string> order;
  std::map<std::string, std::map<int, std::vector<RawSample>>> grouped;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    json rec;
    try {
      rec = json::parse(line);
      RawSample s;
      const std::string seq = rec.at("sequence_id").get<std::string>();
      const int vid = rec.at("vehicle_id").get<int>();
      s.frame = rec.at("frame").get<long>();
      s.t = rec.contains("t") && !rec["t"].is_null() ? rec["t"].get<double>()
                                                     : static_cast<double>(s.frame) / rate;
      s.x = rec.at("x").get<double>();
      s.y = rec.at("y").get<double>();
      if (rec.contains("maneuver") && !rec["maneuver"].is_null()) {
        const auto name = rec["maneuver"].get<std::string>();
        s.label = parse_maneuver(name);
        if (!s.label) {
          throw Error("invalid_dataset", "unknown maneuver '" + name + "'");
        }
      }
      if (!grouped.contains(seq)) order.push_back(seq);
      grouped[seq][vid].push_back(s);
    } catch (const json::exception& e) {
      throw Error("invalid_dataset",
                  "line " + std::to_string(line_no) + ": " + std::string(e.what()));
    }
  }
  Dataset dataset;
  for (const auto& seq : order) {
    Scene scene;
    scene.sequence_id = seq;
    for (auto& [vid, samples] : grouped[seq]) {
      if (samples.size() < 2) {
        log_warning("dropping single-sample track " + seq + "/" + std::to_string(vid));
        continue;
      }
      scene.tracks.push_back(build_track(vid, std::move(samples), rate));
    }
    dataset.push_back(std::move(scene));
  }
  return dataset;
}

UniformTrack normalize_track(const UniformTrack& track) {
  return UniformTrack(track.vehicle_id(), track.sample_rate(), track.t0(), track.xs(),
                      track.ys(), velocities_from_positions(track.xs(), track.sample_rate()),
                      velocities_from_positions(track.ys(), track.sample_rate()),
                      track.segments());
}

Dataset normalize_dataset(const Dataset& dataset) {
  Dataset out = dataset;
  for (auto& scene : out) {
    for (auto& track : scene.tracks) track = normalize_track(track);
  }
  return out;
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io_error", "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, std::string_view text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("io_error", "cannot write " + path.string());
  out << text;
}

json read_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::exception& e) {
    throw Error("invalid_json", path.string() + ": " + e.what());
  }
}

Dataset load_dataset(const std::filesystem::path& path, double rate) {
  std::filesystem::path jsonl = path;
  std::filesystem::path manifest;
  if (std::filesystem::is_directory(path)) {
    jsonl = path / "dataset.jsonl";
    manifest = path / "manifest.json";
  }
  std::ifstream in(jsonl);
  if (!in) throw Error("io_error", "cannot open dataset " + jsonl.string());
  Dataset dataset = read_dataset_jsonl(in, rate);
  if (!manifest.empty() && std::filesystem::exists(manifest)) {
    const json m = read_json_file(manifest);
    std::map<std::string, TrafficDensity> density;
    if (m.contains("scenes")) {
      for (const auto& s : m["scenes"]) {
        density[s.at("sequence_id").get<std::string>()] =
            parse_density(s.at("density").get<std::string>());
      }
    }
    for (auto& scene : dataset) {
      if (auto it = density.find(scene.sequence_id); it != density.end()) {
        scene.density = it->second;
      }
    }
  }
  return dataset;
}

void save_dataset(const std::filesystem::path& dir, const Dataset& dataset,
                  const nlohmann::json& manifest) {
  std::filesystem::create_directories(dir);
  std::ostringstream ss;
  write_dataset_jsonl(ss, dataset);
  write_text_file(dir / "dataset.jsonl", ss.str());
  json m = manifest;
  json scenes = json::array();
  for (const auto& scene : dataset) {
    scenes.push_back({{"sequence_id", scene.sequence_id},
                      {"density", std::string(to_string(scene.density))},
                      {"vehicles", scene.tracks.size()}});
  }
  m["scenes"] = scenes;
  write_text_file(dir / "manifest.json", m.dump(2) + "\n");
}

}  // namespace fwp
