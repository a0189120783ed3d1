#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "fwp/maneuver.hpp"

namespace fwp {

inline constexpr double kDefaultSampleRate = 15.0;

/// Labelled index range [start, end) of a track.
struct ManeuverSegment {
  std::size_t start = 0;
  std::size_t end = 0;
  ManeuverClass maneuver = ManeuverClass::LanePassLeftForward;

  bool contains(std::size_t index) const { return index >= start && index < end; }
  bool operator==(const ManeuverSegment&) const = default;
};

/// Fixed-rate ground-plane track of one vehicle in the ego frame. Sample i
/// is at time t0 + i / sample_rate. Immutable once constructed.
class UniformTrack {
 public:
  /// Throws Error("invalid_track") when the arrays differ in length, hold
  /// fewer than two samples, or the segments overlap / leave the range.
  UniformTrack(int vehicle_id, double sample_rate, double t0, std::vector<double> xs,
               std::vector<double> ys, std::vector<double> vxs, std::vector<double> vys,
               std::vector<ManeuverSegment> segments = {});

  int vehicle_id() const { return vehicle_id_; }
  double sample_rate() const { return sample_rate_; }
  double dt() const { return 1.0 / sample_rate_; }
  double t0() const { return t0_; }
  std::size_t size() const { return xs_.size(); }
  double time_at(std::size_t i) const { return t0_ + static_cast<double>(i) / sample_rate_; }

  const std::vector<double>& xs() const { return xs_; }
  const std::vector<double>& ys() const { return ys_; }
  const std::vector<double>& vxs() const { return vxs_; }
  const std::vector<double>& vys() const { return vys_; }
  const std::vector<ManeuverSegment>& segments() const { return segments_; }

  std::optional<ManeuverClass> label_at(std::size_t index) const;

  bool operator==(const UniformTrack&) const = default;

 private:
  int vehicle_id_;
  double sample_rate_;
  double t0_;
  std::vector<double> xs_, ys_, vxs_, vys_;
  std::vector<ManeuverSegment> segments_;
};

/// Fixed-length history window ending at t_pred. Positions are ego-relative.
struct HistorySnippet {
  int vehicle_id = 0;
  double t_pred = 0.0;
  std::size_t end_index = 0;  // index of the final sample within the source track
  std::vector<double> x, y, vx, vy;
  std::optional<ManeuverClass> label;

  std::size_t size() const { return x.size(); }
};

/// History snippet paired with the ground-truth future that follows it.
struct PredictionWindow {
  HistorySnippet history;
  std::vector<double> future_x, future_y, future_vx, future_vy;
};

std::size_t samples_for(double seconds, double rate);

/// Windows of t_h seconds ending at samples n_h-1, n_h-1+stride, ... Each
/// carries the label of the segment containing its final sample. A track
/// shorter than one window yields an empty list.
std::vector<HistorySnippet> extract_snippets(const UniformTrack& track, double t_h,
                                             std::size_t stride);

/// Like extract_snippets, but only windows followed by t_f seconds of
/// ground truth are emitted.
std::vector<PredictionWindow> extract_prediction_windows(const UniformTrack& track,
                                                         double t_h, double t_f,
                                                         std::size_t stride);

/// Mirror across the longitudinal axis: y and vy negated, labels mirrored.
UniformTrack lateral_invert(const UniformTrack& track);

UniformTrack longitudinal_shift(const UniformTrack& track, double offset);

inline constexpr std::array<double, 6> kStandardShifts = {2.0, -2.0, 4.0, -4.0, 6.0, -6.0};

/// The original track followed by its six standard longitudinal shifts.
std::vector<UniformTrack> standard_shifts(const UniformTrack& track);

/// Central finite differences (one-sided at the ends) smoothed by a centred
/// 5-sample moving average that shrinks near the boundaries.
std::vector<double> velocities_from_positions(std::span<const double> positions, double rate);

/// Linear interpolation of (times, values) onto t0 + i/rate covering
/// [times.front(), times.back()]. Times must be strictly increasing.
std::vector<double> resample_linear(std::span<const double> times,
                                    std::span<const double> values, double rate);

}  // namespace fwp
