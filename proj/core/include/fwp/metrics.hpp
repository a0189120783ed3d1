#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "fwp/maneuver.hpp"

namespace fwp {

/// Prediction index of the horizon mark h seconds ahead: round(h*rate) - 1.
std::size_t horizon_index(double horizon_seconds, double rate);

/// One evaluated snippet: predicted and true positions at every horizon
/// mark, plus the maneuver the pipeline assigned (if any).
struct SnippetRecord {
  std::string sequence_id;
  int vehicle_id = 0;
  std::size_t end_index = 0;
  double t_pred = 0.0;
  bool stop_and_go = false;
  std::optional<ManeuverClass> label;
  std::optional<ManeuverClass> assigned;
  std::vector<Eigen::Vector2d> predicted;  // one per horizon mark
  std::vector<Eigen::Vector2d> truth;
  std::vector<Eigen::Matrix2d> predicted_cov;  // optional, parallel to predicted

  /// Euclidean deviation at horizon mark h.
  double error(std::size_t h) const { return (predicted[h] - truth[h]).norm(); }
};

struct MetricsReport {
  std::vector<double> horizons;     // seconds
  std::vector<double> mean_ae;      // m, per horizon (NaN when empty)
  std::vector<double> median_ae;
  std::vector<double> mean_ae_x;    // per-axis absolute deviations
  std::vector<double> mean_ae_y;
  std::optional<double> accuracy;   // percent; empty when nothing was classified
  std::optional<double> exec_time;  // s per frame; empty unless measured
  std::size_t count = 0;
};

/// Mean of values summed in sorted order, so the result does not depend on
/// the order of the input.
double stable_mean(std::vector<double> values);
double median(std::vector<double> values);

/// Aggregates records; accuracy counts records that carry both a label and
/// an assigned maneuver.
MetricsReport compute_report(std::span<const SnippetRecord> records,
                             std::span<const double> horizons);

enum class Subset { All, OvertakeCutIn, StopAndGo };
std::string_view to_string(Subset subset);
bool in_subset(const SnippetRecord& record, Subset subset);
std::vector<SnippetRecord> filter_subset(std::span<const SnippetRecord> records, Subset subset);

}  // namespace fwp
