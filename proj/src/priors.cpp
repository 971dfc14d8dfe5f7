#include "l2swbm/priors.hpp"

#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

namespace l2swbm {

using nlohmann::json;

PriorFamily family_for(Component c) {
  switch (c) {
    case Component::P: return PriorFamily::Gamma;
    case Component::R: return PriorFamily::LogNormal;
    case Component::E:
    case Component::Q:
    case Component::D: return PriorFamily::Normal;
    default: break;
  }
  throw ConfigError(std::string("component ") + component_char(c) + " has no prior family");
}

PriorFamily family_of(const PriorRecord& r) {
  if (std::holds_alternative<NormalPrior>(r)) return PriorFamily::Normal;
  if (std::holds_alternative<GammaPrior>(r)) return PriorFamily::Gamma;
  return PriorFamily::LogNormal;
}

const char* family_name(PriorFamily f) {
  switch (f) {
    case PriorFamily::Normal: return "normal";
    case PriorFamily::Gamma: return "gamma";
    case PriorFamily::LogNormal: return "lognormal";
  }
  return "?";
}

double prior_mean(const PriorRecord& r) {
  if (auto* n = std::get_if<NormalPrior>(&r)) return n->mean;
  if (auto* g = std::get_if<GammaPrior>(&r)) return g->shape / g->rate;
  const auto& ln = std::get<LogNormalPrior>(r);
  return std::exp(ln.log_mean);
}

PriorFitError::PriorFitError(std::string lake, Component component, int month, const std::string& what)
    : ConfigError("prior fit failed for " + lake + "/" + component_char(component) + "/month " +
                  std::to_string(month) + ": " + what),
      lake_(std::move(lake)),
      component_(component),
      month_(month) {}

namespace {

struct Moments {
  double mean = 0.0;
  double variance = 0.0;  // unbiased
};

Moments sample_moments(std::span<const double> xs) {
  Moments m;
  for (double x : xs) m.mean += x;
  m.mean /= static_cast<double>(xs.size());
  double ss = 0.0;
  for (double x : xs) ss += (x - m.mean) * (x - m.mean);
  m.variance = ss / static_cast<double>(xs.size() - 1);
  return m;
}

void require_positive(std::span<const double> xs) {
  for (double x : xs) {
    if (!(x > 0.0)) throw DomainError("history contains non-positive value " + std::to_string(x));
  }
}

}  // namespace

NormalPrior fit_normal(std::span<const double> history, double precision_scale) {
  if (history.size() < 2) throw DegenerateHistoryError("need at least 2 values");
  auto m = sample_moments(history);
  if (!(m.variance > 0.0)) throw DegenerateHistoryError("zero variance");
  return NormalPrior{m.mean, precision_scale / m.variance};
}

GammaPrior fit_gamma_thom(std::span<const double> history) {
  require_positive(history);
  if (history.size() < 2) throw DegenerateHistoryError("need at least 2 values");
  double mean = 0.0;
  double mean_log = 0.0;
  for (double x : history) {
    mean += x;
    mean_log += std::log(x);
  }
  mean /= static_cast<double>(history.size());
  mean_log /= static_cast<double>(history.size());
  const double phi = std::log(mean) - mean_log;
  if (!(phi > 0.0)) throw DegenerateHistoryError("log correction is not positive (constant history)");
  const double shape = (1.0 / (4.0 * phi)) * (1.0 + std::sqrt(1.0 + 4.0 * phi / 3.0));
  return GammaPrior{shape, shape / mean};
}

LogNormalPrior fit_lognormal(std::span<const double> history) {
  require_positive(history);
  if (history.size() < 2) throw DegenerateHistoryError("need at least 2 values");
  std::vector<double> logs(history.size());
  for (std::size_t i = 0; i < history.size(); ++i) logs[i] = std::log(history[i]);
  auto m = sample_moments(logs);
  if (!(m.variance > 0.0)) throw DegenerateHistoryError("zero log-variance");
  return LogNormalPrior{m.mean, 1.0 / m.variance};
}

double FitRules::scale_for(Component c) const {
  auto it = precision_scale.find(c);
  return it == precision_scale.end() ? 1.0 : it->second;
}

void PriorSpec::set(const std::string& lake, Component c, int month, PriorRecord record) {
  cells_[Key{lake, c, month}] = record;
}

const PriorRecord* PriorSpec::find(const std::string& lake, Component c, int month) const {
  auto it = cells_.find(Key{lake, c, month});
  return it == cells_.end() ? nullptr : &it->second;
}

const PriorRecord& PriorSpec::at(const std::string& lake, Component c, int month) const {
  if (auto* r = find(lake, c, month)) return *r;
  throw BuildError("missing prior cell " + lake + "/" + component_char(c) + "/month " +
                   std::to_string(month));
}

std::vector<std::string> PriorSpec::lakes() const {
  std::set<std::string> names;
  for (const auto& [k, _] : cells_) names.insert(k.lake);
  return {names.begin(), names.end()};
}

void PriorSpec::validate() const {
  std::map<std::pair<std::string, Component>, int> counts;
  for (const auto& [k, rec] : cells_) {
    if (k.month < 1 || k.month > 12) throw ConfigError("prior month out of range");
    if (family_of(rec) != family_for(k.component)) {
      throw ConfigError("prior " + k.lake + "/" + component_char(k.component) + " has family " +
                        family_name(family_of(rec)) + ", expected " +
                        family_name(family_for(k.component)));
    }
    ++counts[{k.lake, k.component}];
  }
  for (const auto& [key, n] : counts) {
    if (n != 12) {
      throw ConfigError("prior " + key.first + "/" + component_char(key.second) + " has " +
                        std::to_string(n) + " calendar-month cells, expected 12");
    }
  }
}

std::string PriorSpec::to_json() const {
  json priors = json::object();
  for (const auto& [k, rec] : cells_) {
    json cell;
    cell["family"] = family_name(family_of(rec));
    std::visit(
        [&](const auto& r) {
          using T = std::decay_t<decltype(r)>;
          if constexpr (std::is_same_v<T, NormalPrior>) {
            cell["mean"] = r.mean;
            cell["precision"] = r.precision;
          } else if constexpr (std::is_same_v<T, GammaPrior>) {
            cell["shape"] = r.shape;
            cell["rate"] = r.rate;
          } else {
            cell["log_mean"] = r.log_mean;
            cell["log_precision"] = r.log_precision;
          }
        },
        rec);
    priors[k.lake][std::string(1, component_char(k.component))][std::to_string(k.month)] = cell;
  }
  json doc;
  doc["schema_version"] = kSchemaVersion;
  doc["artifact"] = kArtifactName;
  doc["version"] = kArtifactVersion;
  doc["priors"] = priors;
  return doc.dump(2) + "\n";
}

PriorSpec PriorSpec::from_json(const std::string& text) {
  json doc;
  try {
    doc = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("prior spec is not valid JSON: ") + e.what());
  }
  if (doc.value("schema_version", 0) != kSchemaVersion) {
    throw ConfigError("prior spec schema_version must be " + std::to_string(kSchemaVersion));
  }
  PriorSpec spec;
  try {
    for (const auto& [lake, comps] : doc.at("priors").items()) {
      for (const auto& [comp, months] : comps.items()) {
        Component c = parse_component(comp);
        for (const auto& [month, cell] : months.items()) {
          int m = std::stoi(month);
          std::string fam = cell.at("family").get<std::string>();
          if (fam == "normal") {
            spec.set(lake, c, m, NormalPrior{cell.at("mean").get<double>(), cell.at("precision").get<double>()});
          } else if (fam == "gamma") {
            spec.set(lake, c, m, GammaPrior{cell.at("shape").get<double>(), cell.at("rate").get<double>()});
          } else if (fam == "lognormal") {
            spec.set(lake, c, m,
                     LogNormalPrior{cell.at("log_mean").get<double>(), cell.at("log_precision").get<double>()});
          } else {
            throw ConfigError("unknown prior family '" + fam + "'");
          }
        }
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed prior spec: ") + e.what());
  }
  spec.validate();
  return spec;
}

void PriorSpec::save(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << to_json();
}

PriorSpec PriorSpec::load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open prior spec " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return from_json(ss.str());
}

PriorSpec fit_all(const std::vector<ComponentSeries>& history, const FitRules& rules,
                  std::vector<std::string>* warnings) {
  PriorSpec spec;
  std::set<std::pair<std::string, Component>> seen;
  for (const auto& series : history) {
    if (series.component == Component::H || series.component == Component::I) continue;
    if (!seen.insert({series.lake, series.component}).second) {
      throw DuplicateKeyError("more than one history series for " + series.lake + "/" +
                              component_char(series.component));
    }
    std::array<std::vector<double>, 12> by_month;
    for (std::size_t i = 0; i < series.values.size(); ++i) {
      if (!series.values[i]) continue;
      int month = series.start.plus(static_cast<int>(i)).month;
      by_month[static_cast<std::size_t>(month - 1)].push_back(*series.values[i]);
    }
    for (int month = 1; month <= 12; ++month) {
      const auto& xs = by_month[static_cast<std::size_t>(month - 1)];
      if (warnings && xs.size() < rules.min_points_warning) {
        warnings->push_back(series.lake + "/" + component_char(series.component) + "/month " +
                            std::to_string(month) + ": only " + std::to_string(xs.size()) +
                            " historical values");
      }
      try {
        switch (family_for(series.component)) {
          case PriorFamily::Gamma:
            spec.set(series.lake, series.component, month, fit_gamma_thom(xs));
            break;
          case PriorFamily::LogNormal:
            spec.set(series.lake, series.component, month, fit_lognormal(xs));
            break;
          case PriorFamily::Normal:
            spec.set(series.lake, series.component, month, fit_normal(xs, rules.scale_for(series.component)));
            break;
        }
      } catch (const PriorFitError&) {
        throw;
      } catch (const ConfigError& e) {
        throw PriorFitError(series.lake, series.component, month, e.what());
      }
    }
  }
  return spec;
}

}  // namespace l2swbm
