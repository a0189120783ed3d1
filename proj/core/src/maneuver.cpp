#include "fwp/maneuver.hpp"

namespace fwp {
namespace {

constexpr std::array<std::string_view, kNumManeuvers> kNames = {
    "lane_pass_left_forward", "lane_pass_left_back", "lane_pass_right_forward",
    "lane_pass_right_back",   "overtake_left",       "overtake_right",
    "cut_in_left",            "cut_in_right",        "drift_front",
    "drift_rear",
};

}  // namespace

std::string_view to_string(ManeuverClass m) { return kNames[index_of(m)]; }

std::optional<ManeuverClass> parse_maneuver(std::string_view name) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (kNames[i] == name) return maneuver_at(i);
  }
  return std::nullopt;
}

}  // namespace fwp
