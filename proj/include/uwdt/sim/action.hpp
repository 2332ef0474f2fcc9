#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace uwdt {

// High-level driving actions in their canonical index order.
enum class Action : std::uint8_t { llc = 0, rlc = 1, acc = 2, dec = 3, cruise = 4 };

inline constexpr int kNumActions = 5;
// Token id used for the "previous action" slot before the first step.
inline constexpr int kPaddingActionId = 5;

inline constexpr std::array<Action, kNumActions> kAllActions{Action::llc, Action::rlc, Action::acc, Action::dec,
                                                             Action::cruise};

constexpr int index_of(Action a) { return static_cast<int>(a); }
constexpr bool is_lane_change(Action a) { return a == Action::llc || a == Action::rlc; }

constexpr std::string_view name_of(Action a) {
  switch (a) {
    case Action::llc: return "llc";
    case Action::rlc: return "rlc";
    case Action::acc: return "acc";
    case Action::dec: return "dec";
    case Action::cruise: return "cruise";
  }
  return "?";
}

inline std::optional<Action> action_from_index(int i) {
  if (i < 0 || i >= kNumActions) return std::nullopt;
  return static_cast<Action>(i);
}

}  // namespace uwdt
