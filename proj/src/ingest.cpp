#include "l2swbm/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <map>
#include <sstream>

#include "l2swbm/errors.hpp"

namespace l2swbm {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_commas(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t pos = 0;
  while (true) {
    auto comma = line.find(',', pos);
    out.push_back(trim(line.substr(pos, comma == std::string_view::npos ? line.npos : comma - pos)));
    if (comma == std::string_view::npos) break;
    pos = comma + 1;
  }
  return out;
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
  auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc{} && res.ptr == s.data() + s.size();
}

std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::vector<bool> ComponentSeries::mask() const {
  std::vector<bool> m(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) m[i] = values[i].has_value();
  return m;
}

std::size_t ComponentSeries::available_count() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](const auto& v) { return v.has_value(); }));
}

std::optional<double> ComponentSeries::at(YearMonth ym) const {
  int offset = start.months_until(ym);
  if (offset < 0 || offset >= static_cast<int>(values.size())) return std::nullopt;
  return values[static_cast<std::size_t>(offset)];
}

ComponentSeries parse_series(std::istream& in, const SeriesDeclaration& decl,
                             const std::string& display_name) {
  if (decl.units != "mm") {
    throw UnitError(display_name + ": declared units '" + decl.units +
                    "' are not supported; convert to mm over lake surface first");
  }
  std::string line;
  std::size_t row = 0;
  int unit_column = -1;
  bool have_header = false;
  std::map<int, std::optional<double>> by_month;

  while (std::getline(in, line)) {
    ++row;
    auto view = trim(line);
    if (view.empty() || view.front() == '#') continue;
    auto fields = split_commas(view);
    if (!have_header) {
      if (fields.size() < 3 || fields[0] != "year" || fields[1] != "month" || fields[2] != "value") {
        throw ParseError(display_name, row, "expected header 'year,month,value'");
      }
      for (std::size_t i = 3; i < fields.size(); ++i) {
        if (fields[i] == "unit" || fields[i] == "units") unit_column = static_cast<int>(i);
      }
      have_header = true;
      continue;
    }
    if (fields.size() < 3) throw ParseError(display_name, row, "expected at least 3 fields");
    YearMonth ym;
    if (!parse_number(fields[0], ym.year) || !parse_number(fields[1], ym.month) || ym.month < 1 ||
        ym.month > 12) {
      throw ParseError(display_name, row, "malformed year/month");
    }
    std::optional<double> value;
    if (!fields[2].empty()) {
      double v = 0.0;
      if (!parse_number(fields[2], v)) throw ParseError(display_name, row, "malformed value");
      value = v;
    }
    if (unit_column >= 0 && static_cast<std::size_t>(unit_column) < fields.size()) {
      auto unit = fields[static_cast<std::size_t>(unit_column)];
      if (!unit.empty() && unit != "mm") {
        throw UnitError(display_name + ": row " + std::to_string(row) + ": unit '" +
                        std::string(unit) + "' is not mm");
      }
    }
    if (!by_month.emplace(ym.ordinal(), value).second) {
      throw DuplicateKeyError(display_name + ": row " + std::to_string(row) + ": duplicate month " +
                              ym.str());
    }
  }
  if (!have_header) throw ParseError(display_name, row, "missing header");
  if (by_month.empty()) throw ParseError(display_name, row, "no data rows");

  ComponentSeries s;
  s.lake = decl.lake;
  s.component = decl.component;
  s.source = decl.source;
  int first = by_month.begin()->first;
  int last = by_month.rbegin()->first;
  s.start = YearMonth::from_ordinal(first);
  s.values.assign(static_cast<std::size_t>(last - first + 1), std::nullopt);
  for (const auto& [ord, v] : by_month) s.values[static_cast<std::size_t>(ord - first)] = v;
  return s;
}

ComponentSeries load_series(const std::filesystem::path& path, const SeriesDeclaration& decl) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open series file " + path.string());
  return parse_series(in, decl, path.string());
}

ComponentSeries load_series(const SeriesDeclaration& decl) { return load_series(decl.path, decl); }

void write_series_csv(std::ostream& out, const ComponentSeries& series) {
  out << "year,month,value\n";
  for (std::size_t i = 0; i < series.values.size(); ++i) {
    YearMonth ym = series.start.plus(static_cast<int>(i));
    out << ym.year << ',' << ym.month << ',';
    if (series.values[i]) out << format_double(*series.values[i]);
    out << '\n';
  }
}

void write_series_csv(const std::filesystem::path& path, const ComponentSeries& series) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_series_csv(out, series);
}

DeltaHObservations delta_h(const ComponentSeries& levels, Window window, AnalysisSpan span) {
  if (span.months < 1) throw SpanError("analysis span must contain at least one month");
  if (!window.cumulative && (window.width < 1 || window.width > span.months)) {
    throw SpanError("window of " + std::to_string(window.width) + " months does not fit a " +
                    std::to_string(span.months) + "-month analysis span");
  }
  // Need beginning-of-month levels for start .. start+T.
  YearMonth need_last = span.start.plus(span.months);
  if (levels.values.empty() || levels.start > span.start) {
    throw SpanError("level series for " + levels.lake + " does not cover " + span.start.str() +
                    "; first missing month " + span.start.str());
  }
  if (levels.end() < need_last) {
    throw SpanError("level series for " + levels.lake + " ends at " + levels.end().str() +
                    "; first missing month " + levels.end().plus(1).str());
  }

  auto level = [&](int k) { return levels.at(span.start.plus(k - 1)); };  // k = 1..T+1

  DeltaHObservations out;
  out.lake = levels.lake;
  out.window = window;
  const int T = span.months;
  if (window.cumulative) {
    out.values.resize(static_cast<std::size_t>(T));
    auto base = level(1);
    for (int t = 1; t <= T; ++t) {
      auto end = level(t + 1);
      if (base && end) out.values[static_cast<std::size_t>(t - 1)] = *end - *base;
    }
  } else {
    const int w = window.width;
    out.values.resize(static_cast<std::size_t>(T - w + 1));
    for (int j = 1; j <= T - w + 1; ++j) {
      auto a = level(j);
      auto b = level(j + w);
      if (a && b) out.values[static_cast<std::size_t>(j - 1)] = *b - *a;
    }
  }
  return out;
}

std::size_t AlignedSeries::masked_count() const {
  return static_cast<std::size_t>(
      std::count_if(values.begin(), values.end(), [](const auto& v) { return !v.has_value(); }));
}

const AlignedSeries* AlignedTable::find(const std::string& lake, Component c, int source) const {
  for (const auto& s : series) {
    if (s.lake == lake && s.component == c && s.source == source) return &s;
  }
  return nullptr;
}

std::vector<const AlignedSeries*> AlignedTable::sources(const std::string& lake, Component c) const {
  std::vector<const AlignedSeries*> out;
  for (const auto& s : series) {
    if (s.lake == lake && s.component == c) out.push_back(&s);
  }
  std::sort(out.begin(), out.end(), [](auto* a, auto* b) { return a->source < b->source; });
  return out;
}

AlignedTable align(const std::vector<ComponentSeries>& series_set, AnalysisSpan span) {
  AlignedTable table;
  table.span = span;
  for (const auto& s : series_set) {
    const int n = span.months + (s.component == Component::H ? 1 : 0);
    for (const auto& existing : table.series) {
      if (existing.lake == s.lake && existing.component == s.component && existing.source == s.source) {
        throw DuplicateKeyError("duplicate series " + s.lake + "/" + component_char(s.component) + "/" +
                                std::to_string(s.source));
      }
    }
    AlignedSeries a;
    a.lake = s.lake;
    a.component = s.component;
    a.source = s.source;
    a.values.resize(static_cast<std::size_t>(n));
    std::size_t present = 0;
    for (int k = 0; k < n; ++k) {
      a.values[static_cast<std::size_t>(k)] = s.at(span.start.plus(k));
      if (a.values[static_cast<std::size_t>(k)]) ++present;
    }
    if (present == 0) {
      table.warnings.push_back("series " + s.lake + "/" + component_char(s.component) + "/" +
                               std::to_string(s.source) + " (" + s.start.str() + ".." + s.end().str() +
                               ") has no data in the analysis span; dropped");
      continue;
    }
    table.series.push_back(std::move(a));
  }
  return table;
}

}  // namespace l2swbm
