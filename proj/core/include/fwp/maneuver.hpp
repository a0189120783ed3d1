#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>

namespace fwp {

/// Surround-vehicle maneuver classes, defined in the ego frame
/// (x longitudinal/forward, y lateral/left).
enum class ManeuverClass : std::uint8_t {
  LanePassLeftForward = 0,
  LanePassLeftBack,
  LanePassRightForward,
  LanePassRightBack,
  OvertakeLeft,
  OvertakeRight,
  CutInLeft,
  CutInRight,
  DriftFront,
  DriftRear,
};

inline constexpr std::size_t kNumManeuvers = 10;

inline constexpr std::array<ManeuverClass, kNumManeuvers> kAllManeuvers = {
    ManeuverClass::LanePassLeftForward, ManeuverClass::LanePassLeftBack,
    ManeuverClass::LanePassRightForward, ManeuverClass::LanePassRightBack,
    ManeuverClass::OvertakeLeft,        ManeuverClass::OvertakeRight,
    ManeuverClass::CutInLeft,           ManeuverClass::CutInRight,
    ManeuverClass::DriftFront,          ManeuverClass::DriftRear,
};

constexpr std::size_t index_of(ManeuverClass m) { return static_cast<std::size_t>(m); }

constexpr ManeuverClass maneuver_at(std::size_t index) {
  return kAllManeuvers.at(index);
}

/// Left/right mirror image of a maneuver. Drift classes map to themselves.
constexpr ManeuverClass mirror(ManeuverClass m) {
  switch (m) {
    case ManeuverClass::LanePassLeftForward: return ManeuverClass::LanePassRightForward;
    case ManeuverClass::LanePassLeftBack: return ManeuverClass::LanePassRightBack;
    case ManeuverClass::LanePassRightForward: return ManeuverClass::LanePassLeftForward;
    case ManeuverClass::LanePassRightBack: return ManeuverClass::LanePassLeftBack;
    case ManeuverClass::OvertakeLeft: return ManeuverClass::OvertakeRight;
    case ManeuverClass::OvertakeRight: return ManeuverClass::OvertakeLeft;
    case ManeuverClass::CutInLeft: return ManeuverClass::CutInRight;
    case ManeuverClass::CutInRight: return ManeuverClass::CutInLeft;
    case ManeuverClass::DriftFront: return ManeuverClass::DriftFront;
    case ManeuverClass::DriftRear: return ManeuverClass::DriftRear;
  }
  return m;
}

constexpr bool is_overtake_or_cut_in(ManeuverClass m) {
  return m == ManeuverClass::OvertakeLeft || m == ManeuverClass::OvertakeRight ||
         m == ManeuverClass::CutInLeft || m == ManeuverClass::CutInRight;
}

/// snake_case name used in dataset files, e.g. "lane_pass_left_forward".
std::string_view to_string(ManeuverClass m);

std::optional<ManeuverClass> parse_maneuver(std::string_view name);

}  // namespace fwp
