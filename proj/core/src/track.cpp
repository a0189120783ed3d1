#include "fwp/track.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "fwp/error.hpp"

namespace fwp {

UniformTrack::UniformTrack(int vehicle_id, double sample_rate, double t0,
                           std::vector<double> xs, std::vector<double> ys,
                           std::vector<double> vxs, std::vector<double> vys,
                           std::vector<ManeuverSegment> segments)
    : vehicle_id_(vehicle_id),
      sample_rate_(sample_rate),
      t0_(t0),
      xs_(std::move(xs)),
      ys_(std::move(ys)),
      vxs_(std::move(vxs)),
      vys_(std::move(vys)),
      segments_(std::move(segments)) {
  if (!(sample_rate_ > 0.0)) throw Error("invalid_track", "sample rate must be positive");
  const std::size_t n = xs_.size();
  if (n < 2 || ys_.size() != n || vxs_.size() != n || vys_.size() != n) {
    throw Error("invalid_track", "track arrays must have equal length >= 2");
  }
  std::sort(segments_.begin(), segments_.end(),
            [](const auto& a, const auto& b) { return a.start < b.start; });
  std::size_t previous_end = 0;
  for (const auto& seg : segments_) {
    if (seg.start >= seg.end || seg.end > n || seg.start < previous_end) {
      throw Error("invalid_track", "maneuver segments overlap or exceed the track (vehicle " +
                                       std::to_string(vehicle_id_) + ")");
    }
    previous_end = seg.end;
  }
}

std::optional<ManeuverClass> UniformTrack::label_at(std::size_t index) const {
  for (const auto& seg : segments_) {
    if (seg.contains(index)) return seg.maneuver;
  }
  return std::nullopt;
}

std::size_t samples_for(double seconds, double rate) {
  return static_cast<std::size_t>(std::lround(seconds * rate));
}

namespace {

HistorySnippet make_snippet(const UniformTrack& track, std::size_t end, std::size_t n_h) {
  const std::size_t begin = end + 1 - n_h;
  auto slice = [&](const std::vector<double>& v) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(begin),
                               v.begin() + static_cast<std::ptrdiff_t>(end + 1));
  };
  HistorySnippet s;
  s.vehicle_id = track.vehicle_id();
  s.t_pred = track.time_at(end);
  s.end_index = end;
  s.x = slice(track.xs());
  s.y = slice(track.ys());
  s.vx = slice(track.vxs());
  s.vy = slice(track.vys());
  s.label = track.label_at(end);
  return s;
}

}  // namespace

std::vector<HistorySnippet> extract_snippets(const UniformTrack& track, double t_h,
                                             std::size_t stride) {
  if (stride == 0) throw Error("invalid_argument", "stride must be >= 1");
  const std::size_t n_h = samples_for(t_h, track.sample_rate());
  std::vector<HistorySnippet> out;
  if (n_h == 0 || track.size() < n_h) return out;
  for (std::size_t end = n_h - 1; end < track.size(); end += stride) {
    out.push_back(make_snippet(track, end, n_h));
  }
  return out;
}

std::vector<PredictionWindow> extract_prediction_windows(const UniformTrack& track,
                                                         double t_h, double t_f,
                                                         std::size_t stride) {
  if (stride == 0) throw Error("invalid_argument", "stride must be >= 1");
  const std::size_t n_h = samples_for(t_h, track.sample_rate());
  const std::size_t n_f = samples_for(t_f, track.sample_rate());
  std::vector<PredictionWindow> out;
  if (n_h == 0 || track.size() < n_h + n_f) return out;
  for (std::size_t end = n_h - 1; end + n_f < track.size(); end += stride) {
    PredictionWindow w;
    w.history = make_snippet(track, end, n_h);
    const auto first = static_cast<std::ptrdiff_t>(end + 1);
    const auto last = static_cast<std::ptrdiff_t>(end + 1 + n_f);
    w.future_x.assign(track.xs().begin() + first, track.xs().begin() + last);
    w.future_y.assign(track.ys().begin() + first, track.ys().begin() + last);
    w.future_vx.assign(track.vxs().begin() + first, track.vxs().begin() + last);
    w.future_vy.assign(track.vys().begin() + first, track.vys().begin() + last);
    out.push_back(std::move(w));
  }
  return out;
}

UniformTrack lateral_invert(const UniformTrack& track) {
  auto negate = [](std::vector<double> v) {
    for (double& e : v) e = -e;
    return v;
  };
  std::vector<ManeuverSegment> segments = track.segments();
  for (auto& seg : segments) seg.maneuver = mirror(seg.maneuver);
  return UniformTrack(track.vehicle_id(), track.sample_rate(), track.t0(), track.xs(),
                      negate(track.ys()), track.vxs(), negate(track.vys()),
                      std::move(segments));
}

UniformTrack longitudinal_shift(const UniformTrack& track, double offset) {
  std::vector<double> xs = track.xs();
  for (double& x : xs) x += offset;
  return UniformTrack(track.vehicle_id(), track.sample_rate(), track.t0(), std::move(xs),
                      track.ys(), track.vxs(), track.vys(), track.segments());
}

std::vector<UniformTrack> standard_shifts(const UniformTrack& track) {
  std::vector<UniformTrack> out;
  out.reserve(kStandardShifts.size() + 1);
  out.push_back(track);
  for (double offset : kStandardShifts) out.push_back(longitudinal_shift(track, offset));
  return out;
}

std::vector<double> velocities_from_positions(std::span<const double> positions, double rate) {
  const std::size_t n = positions.size();
  std::vector<double> raw(n, 0.0);
  if (n < 2) return raw;
  raw.front() = (positions[1] - positions[0]) * rate;
  raw.back() = (positions[n - 1] - positions[n - 2]) * rate;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    raw[i] = (positions[i + 1] - positions[i - 1]) * rate * 0.5;
  }
  std::vector<double> smooth(n, 0.0);
  constexpr std::size_t kHalf = 2;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t half = std::min({kHalf, i, n - 1 - i});
    double sum = 0.0;
    for (std::size_t j = i - half; j <= i + half; ++j) sum += raw[j];
    smooth[i] = sum / static_cast<double>(2 * half + 1);
  }
  return smooth;
}

std::vector<double> resample_linear(std::span<const double> times,
                                    std::span<const double> values, double rate) {
  if (times.size() != values.size() || times.empty()) {
    throw Error("invalid_argument", "resample_linear: mismatched or empty input");
  }
  for (std::size_t i = 1; i < times.size(); ++i) {
    if (!(times[i] > times[i - 1])) {
      throw Error("invalid_argument", "resample_linear: times must be strictly increasing");
    }
  }
  const double span = times.back() - times.front();
  const auto n = static_cast<std::size_t>(std::floor(span * rate + 1e-9)) + 1;
  std::vector<double> out(n);
  std::size_t j = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = times.front() + static_cast<double>(i) / rate;
    while (j + 2 < times.size() && times[j + 1] < t) ++j;
    if (times.size() == 1) {
      out[i] = values[0];
      continue;
    }
    const double w = std::clamp((t - times[j]) / (times[j + 1] - times[j]), 0.0, 1.0);
    out[i] = values[j] + w * (values[j + 1] - values[j]);
  }
  return out;
}

}  // namespace fwp
