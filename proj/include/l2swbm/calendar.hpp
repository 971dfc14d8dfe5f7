#pragma once

#include <compare>
#include <string>
#include <string_view>

namespace l2swbm {

inline constexpr const char* kArtifactName = "l2swbm";
inline constexpr const char* kArtifactVersion = "0.1.0";
inline constexpr int kSchemaVersion = 1;

struct YearMonth {
  int year = 1970;
  int month = 1;  // 1..12

  constexpr int ordinal() const { return year * 12 + (month - 1); }
  static constexpr YearMonth from_ordinal(int ord) {
    return YearMonth{ord >= 0 ? ord / 12 : (ord - 11) / 12, ((ord % 12) + 12) % 12 + 1};
  }
  constexpr YearMonth plus(int months) const { return from_ordinal(ordinal() + months); }
  constexpr int months_until(YearMonth other) const { return other.ordinal() - ordinal(); }

  constexpr bool operator==(const YearMonth&) const = default;
  constexpr auto operator<=>(const YearMonth& o) const { return ordinal() <=> o.ordinal(); }

  // "YYYY-MM"
  std::string str() const;
  static YearMonth parse(std::string_view text);
};

// Analysis period: T months starting at `start`.
struct AnalysisSpan {
  YearMonth start;
  int months = 0;

  YearMonth end() const { return start.plus(months - 1); }
  bool operator==(const AnalysisSpan&) const = default;
};

// Calendar month (1..12) of 1-based time index t for a period starting at
// `start`: ((start_month - 1 + t - 1) mod 12) + 1.
constexpr int calendar_month(YearMonth start, int t) {
  return ((start.month - 1 + t - 1) % 12) + 1;
}

// Water-balance component kinds. H is the lake level.
enum class Component { P, E, R, I, Q, D, H };

char component_char(Component c);
Component parse_component(std::string_view text);

// Components carried as latent monthly totals.
inline constexpr Component kLatentComponents[] = {Component::P, Component::E, Component::R,
                                                  Component::Q, Component::D};

// Rolling window length w or the cumulative marker.
struct Window {
  bool cumulative = false;
  int width = 1;

  static constexpr Window rolling(int w) { return Window{false, w}; }
  static constexpr Window cumulative_window() { return Window{true, 0}; }
  bool operator==(const Window&) const = default;
  std::string str() const;  // "C" or the width
};

}  // namespace l2swbm
