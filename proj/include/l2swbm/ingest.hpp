#pragma once

// Loading, validation and alignment of monthly hydrologic series.

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "l2swbm/calendar.hpp"

namespace l2swbm {

// How a series file is to be interpreted. Units must already be mm over the
// lake surface; nothing is converted.
struct SeriesDeclaration {
  std::string lake;
  Component component = Component::P;
  int source = 1;
  std::string units = "mm";
  std::filesystem::path path;
};

// One source's monthly series for one component of one lake. Gap-free in
// time; missing months are empty entries.
struct ComponentSeries {
  std::string lake;
  Component component = Component::P;
  int source = 1;
  YearMonth start;
  std::vector<std::optional<double>> values;

  std::size_t size() const { return values.size(); }
  YearMonth end() const { return start.plus(static_cast<int>(values.size()) - 1); }
  bool available(std::size_t i) const { return values[i].has_value(); }
  std::vector<bool> mask() const;
  std::size_t available_count() const;
  // Value at a calendar month, empty if outside the series or masked.
  std::optional<double> at(YearMonth ym) const;
};

ComponentSeries parse_series(std::istream& in, const SeriesDeclaration& decl,
                             const std::string& display_name = "<stream>");
ComponentSeries load_series(const std::filesystem::path& path, const SeriesDeclaration& decl);
ComponentSeries load_series(const SeriesDeclaration& decl);

// Emits `year,month,value` with a blank value for masked months. Values use
// the shortest representation that round-trips exactly.
void write_series_csv(std::ostream& out, const ComponentSeries& series);
void write_series_csv(const std::filesystem::path& path, const ComponentSeries& series);

// Observed change in storage by start month j (rolling) or month t
// (cumulative).
struct DeltaHObservations {
  std::string lake;
  Window window;
  std::vector<std::optional<double>> values;
};

// Rolling: value[j] = level[j+w] - level[j], j = 1..T-w+1.
// Cumulative: value[t] = level[t+1] - level[1], t = 1..T.
// Levels must cover span.start .. span.start + T.
DeltaHObservations delta_h(const ComponentSeries& levels, Window window, AnalysisSpan span);

struct AlignedSeries {
  std::string lake;
  Component component = Component::P;
  int source = 1;
  // T entries for component series, T+1 for levels (beginning of months
  // start .. start+T).
  std::vector<std::optional<double>> values;

  std::size_t masked_count() const;
};

struct AlignedTable {
  AnalysisSpan span;
  std::vector<AlignedSeries> series;
  std::vector<std::string> warnings;

  const AlignedSeries* find(const std::string& lake, Component c, int source = 1) const;
  std::vector<const AlignedSeries*> sources(const std::string& lake, Component c) const;
};

// Puts every series on the analysis calendar. Entries outside a series'
// native range are masked; series with no overlap are dropped with a warning.
AlignedTable align(const std::vector<ComponentSeries>& series_set, AnalysisSpan span);

}  // namespace l2swbm
