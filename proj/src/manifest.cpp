#include "l2swbm/manifest.hpp"

#include <algorithm>
#include <fstream>

#include "l2swbm/errors.hpp"

namespace l2swbm {

using nlohmann::json;

std::filesystem::path RunManifest::resolve(const std::filesystem::path& p) const {
  return p.is_absolute() ? p : base_dir / p;
}

void RunManifest::validate() const {
  if (span.months < 1) throw ConfigError("analysis span must contain at least one month");
  if (lakes.empty()) throw ConfigError("manifest lists no lakes");
  if (history.end < history.start) throw ConfigError("history end precedes its start");
  for (const auto& d : series) {
    if (std::find_if(lakes.begin(), lakes.end(), [&](const LakeSpec& l) { return l.name == d.lake; }) ==
        lakes.end()) {
      throw ConfigError("series " + d.path.string() + " names unknown lake " + d.lake);
    }
    if (!std::filesystem::exists(resolve(d.path))) throw ConfigError("series file not found: " + resolve(d.path).string());
  }
  sampler.validate();
}

std::vector<ComponentSeries> RunManifest::load_series_set() const {
  std::vector<ComponentSeries> out;
  for (const auto& d : series) out.push_back(load_series(resolve(d.path), d));
  return out;
}

AlignedTable RunManifest::aligned() const { return align(load_series_set(), span); }

std::vector<ComponentSeries> RunManifest::history_series() const {
  std::vector<ComponentSeries> out;
  for (const auto& d : series) {
    if (d.source != history.source || d.component == Component::H || d.component == Component::I) continue;
    auto s = clip(load_series(resolve(d.path), d), history.start, history.end);
    if (!s.values.empty()) out.push_back(std::move(s));
  }
  return out;
}

std::vector<std::string> RunManifest::lake_names() const {
  std::vector<std::string> out;
  for (const auto& l : lakes) out.push_back(l.name);
  return out;
}

ComponentSeries clip(const ComponentSeries& s, YearMonth from, YearMonth to) {
  ComponentSeries out = s;
  out.values.clear();
  const YearMonth lo = std::max(from, s.start);
  const YearMonth hi = s.values.empty() ? lo.plus(-1) : std::min(to, s.end());
  out.start = lo;
  for (YearMonth ym = lo; ym <= hi; ym = ym.plus(1)) {
    out.values.push_back(s.values[static_cast<std::size_t>(s.start.months_until(ym))]);
  }
  return out;
}

json to_json(const RunManifest& m) {
  json series = json::array();
  for (const auto& d : m.series) {
    series.push_back({{"lake", d.lake},
                      {"component", std::string(1, component_char(d.component))},
                      {"source", d.source},
                      {"units", d.units},
                      {"path", d.path.generic_string()}});
  }
  json lakes = json::array();
  for (const auto& l : m.lakes) lakes.push_back({{"name", l.name}, {"inflow_scale", l.inflow_scale}});
  return json{{"schema_version", kSchemaVersion},
              {"analysis_span", to_json(m.span)},
              {"lakes", lakes},
              {"series", series},
              {"history", {{"start", m.history.start.str()}, {"end", m.history.end.str()}, {"source", m.history.source}}},
              {"priors", m.priors.generic_string()},
              {"sampler", to_json(m.sampler)},
              {"monitored", m.monitored},
              {"out", m.out.generic_string()},
              {"seed", m.seed}};
}

RunManifest manifest_from_json(const json& j, const std::filesystem::path& base_dir) {
  RunManifest m;
  m.base_dir = base_dir;
  try {
    if (j.value("schema_version", 0) != kSchemaVersion) {
      throw ConfigError("unsupported manifest schema_version (expected " + std::to_string(kSchemaVersion) + ")");
    }
    if (j.contains("analysis_span")) m.span = span_from_json(j.at("analysis_span"));
    if (j.contains("lakes")) m.lakes = lakes_from_json(j.at("lakes"));
    for (const auto& s : j.at("series")) {
      SeriesDeclaration d;
      d.lake = s.at("lake").get<std::string>();
      d.component = parse_component(s.at("component").get<std::string>());
      d.source = s.value("source", 1);
      d.units = s.value("units", std::string("mm"));
      d.path = s.at("path").get<std::string>();
      m.series.push_back(std::move(d));
    }
    if (j.contains("history")) {
      const auto& h = j.at("history");
      m.history.start = YearMonth::parse(h.value("start", m.history.start.str()));
      m.history.end = YearMonth::parse(h.value("end", m.history.end.str()));
      m.history.source = h.value("source", m.history.source);
    }
    m.priors = j.value("priors", m.priors.generic_string());
    m.out = j.value("out", m.out.generic_string());
    m.seed = j.value("seed", m.seed);
    m.monitored = j.value("monitored", m.monitored);
    if (j.contains("sampler")) m.sampler = sampler_settings_from_json(j.at("sampler"));
    m.sampler.seed = m.seed;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed manifest: ") + e.what());
  }
  return m;
}

RunManifest load_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open manifest " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
  return manifest_from_json(j, std::filesystem::absolute(path).parent_path());
}

void save_manifest(const RunManifest& m, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << to_json(m).dump(2) << "\n";
}

}  // namespace l2swbm
