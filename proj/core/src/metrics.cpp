#include "fwp/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "fwp/error.hpp"

namespace fwp {

std::size_t horizon_index(double horizon_seconds, double rate) {
  const long steps = std::lround(horizon_seconds * rate);
  if (steps < 1) throw Error("invalid_argument", "horizon shorter than one sample");
  return static_cast<std::size_t>(steps - 1);
}

double stable_mean(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  double sum = 0.0;
  for (double v : values) sum += v;
  return sum / static_cast<double>(values.size());
}

double median(std::vector<double> values) {
  if (values.empty()) return std::numeric_limits<double>::quiet_NaN();
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  return n % 2 == 1 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

MetricsReport compute_report(std::span<const SnippetRecord> records,
                             std::span<const double> horizons) {
  MetricsReport r;
  r.horizons.assign(horizons.begin(), horizons.end());
  r.count = records.size();
  for (std::size_t h = 0; h < horizons.size(); ++h) {
    std::vector<double> e, ex, ey;
    e.reserve(records.size());
    for (const auto& rec : records) {
      if (rec.predicted.size() != horizons.size() || rec.truth.size() != horizons.size()) {
        throw Error("invalid_argument", "record does not cover every horizon");
      }
      e.push_back(rec.error(h));
      ex.push_back(std::abs(rec.predicted[h].x() - rec.truth[h].x()));
      ey.push_back(std::abs(rec.predicted[h].y() - rec.truth[h].y()));
    }
    r.mean_ae.push_back(stable_mean(e));
    r.median_ae.push_back(median(e));
    r.mean_ae_x.push_back(stable_mean(ex));
    r.mean_ae_y.push_back(stable_mean(ey));
  }
  std::size_t classified = 0;
  std::size_t correct = 0;
  for (const auto& rec : records) {
    if (rec.label && rec.assigned) {
      ++classified;
      if (*rec.label == *rec.assigned) ++correct;
    }
  }
  if (classified > 0) {
    r.accuracy = 100.0 * static_cast<double>(correct) / static_cast<double>(classified);
  }
  return r;
}

std::string_view to_string(Subset subset) {
  switch (subset) {
    case Subset::All: return "all";
    case Subset::OvertakeCutIn: return "overtake_cut_in";
    case Subset::StopAndGo: return "stop_and_go";
  }
  return "all";
}

bool in_subset(const SnippetRecord& record, Subset subset) {
  switch (subset) {
    case Subset::All: return true;
    case Subset::OvertakeCutIn: return record.label && is_overtake_or_cut_in(*record.label);
    case Subset::StopAndGo: return record.stop_and_go;
  }
  return false;
}

std::vector<SnippetRecord> filter_subset(std::span<const SnippetRecord> records, Subset subset) {
  std::vector<SnippetRecord> out;
  for (const auto& r : records) {
    if (in_subset(r, subset)) out.push_back(r);
  }
  return out;
}

}  // namespace fwp
