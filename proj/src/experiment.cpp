#include "l2swbm/experiment.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <set>

#include "l2swbm/errors.hpp"
#include "l2swbm/model.hpp"
#include "l2swbm/sampler.hpp"

namespace l2swbm {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

bool summarised(const std::string& name) {
  if (name.size() > 2 && name[1] == '[' && std::string("PERIQD").find(name[0]) != std::string::npos) return true;
  return name.rfind("tau_y[", 0) == 0 || name.rfind("tau_dH[", 0) == 0;
}

bool is_flow(const std::string& name) { return name.rfind("Q[", 0) == 0 || name.rfind("I[", 0) == 0; }

json to_json(const PosteriorSummary& s) { return json::array({s.mean, s.sd, s.q025, s.q500, s.q975}); }

PosteriorSummary summary_from_json(const json& j) {
  return PosteriorSummary{j.at(0).get<double>(), j.at(1).get<double>(), j.at(2).get<double>(), j.at(3).get<double>(),
                          j.at(4).get<double>()};
}

json opt_json(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }
std::optional<double> opt_from(const json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

std::ofstream open_csv(const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  return out;
}

}  // namespace

void DesignMatrix::validate() const {
  std::set<std::string> seen;
  for (const auto& m : models) {
    m.validate();
    if (!seen.insert(m.id).second) throw ConfigError("duplicate model id in design: " + m.id);
  }
  settings.validate();
  for (const auto& [a, b] : comparisons) {
    if (!seen.count(a) || !seen.count(b)) throw ConfigError("comparison " + a + " vs " + b + " names a model outside the design");
  }
}

DesignMatrix canonical_design(AnalysisSpan span, const std::vector<LakeSpec>& lakes) {
  DesignMatrix d;
  for (const char* prefix : {"", "f"}) {
    d.models.push_back(config_from_id(std::string(prefix) + "PROT", span, lakes));
    for (const char* w : {"01", "12"}) {
      for (const char* e : {"N", "F", "H"}) {
        for (const char* b : {"F", "H"}) {
          d.models.push_back(config_from_id(std::string(prefix) + w + e + b, span, lakes));
        }
      }
    }
  }
  d.comparisons.emplace_back("PROT", "f12FF");
  return d;
}

json to_json(const DesignMatrix& d) {
  json models = json::array();
  for (const auto& m : d.models) models.push_back(to_json(m));
  json cmp = json::array();
  for (const auto& [a, b] : d.comparisons) cmp.push_back({a, b});
  return json{{"schema_version", kSchemaVersion}, {"models", models}, {"sampler", to_json(d.settings)}, {"comparisons", cmp}};
}

DesignMatrix design_from_json(const json& j, AnalysisSpan default_span, const std::vector<LakeSpec>& default_lakes,
                              const SamplerSettings& defaults) {
  DesignMatrix d;
  d.settings = defaults;
  try {
    if (j.contains("schema_version") && j.at("schema_version").get<int>() != kSchemaVersion) {
      throw ConfigError("unsupported design schema_version");
    }
    for (const auto& m : j.at("models")) d.models.push_back(model_config_from_json(m, default_span, default_lakes));
    if (j.contains("sampler")) {
      json s = to_json(defaults);
      s.update(j.at("sampler"));
      if (!j.at("sampler").contains("burn_in")) s.erase("burn_in");
      d.settings = sampler_settings_from_json(s, defaults);
    }
    if (j.contains("comparisons")) {
      for (const auto& c : j.at("comparisons")) d.comparisons.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed design: ") + e.what());
  }
  d.validate();
  return d;
}

const ParameterSummary* ModelResult::find(const std::string& name) const {
  for (const auto& s : summaries) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

const ModelResult* ExperimentReport::find(const std::string& id) const {
  for (const auto& m : models) {
    if (m.id == id) return &m;
  }
  return nullptr;
}

ModelResult run_model(const ModelConfig& config, const SamplerSettings& settings, const ExperimentResources& res,
                      SampleStore* keep) {
  ModelResult r;
  r.id = config.id;
  try {
    const Network net = build_network(config, *res.priors, *res.data);
    r.counts = net.counts();
    SamplerSettings s = settings;
    if (!res.restart_root.empty()) s.restart_dir = res.restart_root / config.id;
    SampleStore store = run(net, s);
    r.seconds = store.total_seconds;
    r.trajectory = psrf_trajectory(store);
    if (store.failed()) {
      r.failed = true;
      r.reason = store.failure_reason();
    } else {
      if (store.chains() >= 2) {
        const PsrfReport p = psrf(store);
        r.max_r50 = p.max_r50;
        r.max_r975 = p.max_r975;
        r.above_threshold = p.above_threshold;
      }
      r.dic = dic(net, store, res.dic_draws);
      if (res.posterior_predictive) {
        std::vector<int> windows;
        for (int w : res.closure_windows) {
          if (w <= config.span.months) windows.push_back(w);
        }
        r.closure = closure(net, store, closure_observations(*res.data, net.lakes(), windows), settings.seed);
      }
      for (std::size_t p = 0; p < store.params(); ++p) {
        if (summarised(store.names()[p])) r.summaries.push_back({store.names()[p], summarize(store.all_draws(p))});
      }
    }
    if (keep) *keep = std::move(store);
  } catch (const Error& e) {
    r.failed = true;
    r.reason = e.what();
  } catch (const std::exception& e) {
    r.failed = true;
    r.reason = std::string("internal error: ") + e.what();
  }
  return r;
}

ExperimentReport run_design(const DesignMatrix& design, const ExperimentResources& res) {
  design.validate();
  if (!res.data || !res.priors) throw ConfigError("experiment needs data and priors");
  ExperimentReport rep;
  rep.seed = design.settings.seed;
  rep.settings = design.settings;
  rep.comparisons = design.comparisons;
  for (const auto& m : design.models) {
    if (res.progress) res.progress("running " + m.id);
    rep.models.push_back(run_model(m, design.settings, res));
    if (res.progress) {
      const auto& r = rep.models.back();
      res.progress(r.failed ? m.id + " failed: " + r.reason
                            : m.id + " done in " + fmt(std::round(r.seconds * 10.0) / 10.0) + " s");
    }
  }
  return rep;
}

std::vector<ComparisonRow> compare(const ExperimentReport& report, const std::string& baseline,
                                   const std::string& candidate, const std::vector<std::string>& parameters) {
  const ModelResult* a = report.find(baseline);
  const ModelResult* b = report.find(candidate);
  if (!a) throw ComparisonError("model " + baseline + " is not in the report");
  if (!b) throw ComparisonError("model " + candidate + " is not in the report");
  if (a->failed) throw ComparisonError("model " + baseline + " failed: " + a->reason);
  if (b->failed) throw ComparisonError("model " + candidate + " failed: " + b->reason);
  std::vector<std::string> names = parameters;
  if (names.empty()) {
    for (const auto& s : a->summaries) {
      if (s.name.rfind("Q[", 0) == 0) names.push_back(s.name);
    }
  }
  std::vector<ComparisonRow> rows;
  for (const auto& n : names) {
    const ParameterSummary* pa = a->find(n);
    const ParameterSummary* pb = b->find(n);
    if (!pa) throw ComparisonError("parameter " + n + " is not monitored in model " + baseline);
    if (!pb) throw ComparisonError("parameter " + n + " is not monitored in model " + candidate);
    ComparisonRow row{n, pa->stats, pb->stats, 1.0};
    row.sd_ratio = pa->stats.sd == pb->stats.sd ? 1.0 : pb->stats.sd / pa->stats.sd;
    rows.push_back(row);
  }
  return rows;
}

json to_json(const ExperimentReport& r) {
  json models = json::array();
  for (const auto& m : r.models) {
    json jm{{"id", m.id},
            {"failed", m.failed},
            {"reason", m.reason},
            {"counts", {m.counts.stochastic, m.counts.deterministic, m.counts.observed}}};
    if (!m.failed) {
      jm["dic"] = {{"mean_deviance", m.dic.mean_deviance}, {"pd", m.dic.pd}, {"dic", m.dic.dic}, {"draws", m.dic.draws_used}};
      jm["psrf"] = {{"max_r50", m.max_r50}, {"max_r975", m.max_r975}, {"above_threshold", m.above_threshold}};
      if (m.closure) {
        json cells = json::array();
        for (const auto& c : m.closure->cells) {
          json bands = json::array();
          for (const auto& b : c.bands) bands.push_back({b.start, b.lower, b.median, b.upper, opt_json(b.observed)});
          cells.push_back({{"lake", c.lake},
                           {"window", c.window},
                           {"inside", c.inside},
                           {"available", c.available},
                           {"denominator", c.denominator},
                           {"percent", opt_json(c.percent)},
                           {"bands", bands}});
        }
        jm["closure"] = {{"level", m.closure->level}, {"cells", cells}};
      }
      json sums = json::object();
      for (const auto& s : m.summaries) sums[s.name] = to_json(s.stats);
      jm["summaries"] = sums;
      json order = json::array();
      for (const auto& s : m.summaries) order.push_back(s.name);
      jm["summary_order"] = order;
    }
    json traj = json::array();
    for (const auto& t : m.trajectory) traj.push_back({t.iteration, t.max_r50, t.max_r975, t.skipped, t.note});
    jm["trajectory"] = traj;
    models.push_back(std::move(jm));
  }
  json cmp = json::array();
  for (const auto& [a, b] : r.comparisons) cmp.push_back({a, b});
  return json{{"schema_version", kSchemaVersion},
              {"artifact", kArtifactName},
              {"version", kArtifactVersion},
              {"seed", r.seed},
              {"sampler", to_json(r.settings)},
              {"comparisons", cmp},
              {"models", models}};
}

ExperimentReport report_from_json(const json& j) {
  ExperimentReport r;
  try {
    if (j.at("schema_version").get<int>() != kSchemaVersion) throw ConfigError("unsupported report schema_version");
    r.seed = j.at("seed").get<std::uint64_t>();
    r.settings = sampler_settings_from_json(j.at("sampler"));
    for (const auto& c : j.at("comparisons")) r.comparisons.emplace_back(c.at(0).get<std::string>(), c.at(1).get<std::string>());
    for (const auto& jm : j.at("models")) {
      ModelResult m;
      m.id = jm.at("id").get<std::string>();
      m.failed = jm.at("failed").get<bool>();
      m.reason = jm.at("reason").get<std::string>();
      const auto& c = jm.at("counts");
      m.counts = NodeCounts{c.at(0).get<std::size_t>(), c.at(1).get<std::size_t>(), c.at(2).get<std::size_t>()};
      if (!m.failed) {
        const auto& d = jm.at("dic");
        m.dic = DicScore{d.at("mean_deviance").get<double>(), d.at("pd").get<double>(), d.at("dic").get<double>(),
                         d.at("draws").get<std::size_t>()};
        const auto& p = jm.at("psrf");
        m.max_r50 = p.at("max_r50").get<double>();
        m.max_r975 = p.at("max_r975").get<double>();
        m.above_threshold = p.at("above_threshold").get<std::vector<std::string>>();
        if (jm.contains("closure")) {
          ClosureReport cr;
          cr.level = jm.at("closure").at("level").get<double>();
          for (const auto& jc : jm.at("closure").at("cells")) {
            ClosureCell cell;
            cell.lake = jc.at("lake").get<std::string>();
            cell.window = jc.at("window").get<int>();
            cell.inside = jc.at("inside").get<std::size_t>();
            cell.available = jc.at("available").get<std::size_t>();
            cell.denominator = jc.at("denominator").get<std::size_t>();
            cell.percent = opt_from(jc.at("percent"));
            for (const auto& b : jc.at("bands")) {
              cell.bands.push_back(ClosureBand{b.at(0).get<int>(), b.at(1).get<double>(), b.at(2).get<double>(),
                                               b.at(3).get<double>(), opt_from(b.at(4))});
            }
            cr.cells.push_back(std::move(cell));
          }
          m.closure = std::move(cr);
        }
        const auto& sums = jm.at("summaries");
        for (const auto& n : jm.at("summary_order")) {
          const auto name = n.get<std::string>();
          m.summaries.push_back({name, summary_from_json(sums.at(name))});
        }
      }
      for (const auto& t : jm.at("trajectory")) {
        m.trajectory.push_back(TrajectoryPoint{t.at(0).get<long>(), t.at(1).get<double>(), t.at(2).get<double>(),
                                               t.at(3).get<bool>(), t.at(4).get<std::string>()});
      }
      r.models.push_back(std::move(m));
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed report: ") + e.what());
  }
  return r;
}

void write_model_outputs(const ModelResult& m, std::uint64_t seed, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string prov = provenance_line(m.id, seed);
  {
    auto out = open_csv(dir / "psrf_trajectory.csv");
    out << prov << "\niteration,max_r50,max_r975\n";
    for (const auto& t : m.trajectory) {
      if (t.skipped) continue;
      out << t.iteration << ',' << fmt(t.max_r50) << ',' << fmt(t.max_r975) << '\n';
    }
  }
  if (m.closure) {
    auto out = open_csv(dir / "closure_bands.csv");
    out << prov << "\nlake,window,start,lower,median,upper,observed\n";
    for (const auto& c : m.closure->cells) {
      for (const auto& b : c.bands) {
        out << c.lake << ',' << c.window << ',' << b.start << ',' << fmt(b.lower) << ',' << fmt(b.median) << ','
            << fmt(b.upper) << ',' << (b.observed ? fmt(*b.observed) : "") << '\n';
      }
    }
  }
  {
    auto out = open_csv(dir / "flows.csv");
    out << prov << "\nparameter,mean,sd,q025,q500,q975\n";
    for (const auto& s : m.summaries) {
      if (!is_flow(s.name)) continue;
      out << '"' << s.name << "\"," << fmt(s.stats.mean) << ',' << fmt(s.stats.sd) << ',' << fmt(s.stats.q025) << ','
          << fmt(s.stats.q500) << ',' << fmt(s.stats.q975) << '\n';
    }
  }
}

void write_report(const ExperimentReport& r, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const std::string prov = provenance_line("design", r.seed);
  {
    auto out = open_csv(dir / "models.csv");
    out << prov << "\nmodel,status,reason,stochastic,deterministic,observed\n";
    for (const auto& m : r.models) {
      out << m.id << ',' << (m.failed ? "failed" : "ok") << ",\"" << m.reason << "\"," << m.counts.stochastic << ','
          << m.counts.deterministic << ',' << m.counts.observed << '\n';
    }
  }
  {
    auto out = open_csv(dir / "closure.csv");
    out << prov << "\nmodel,lake,window,inside,available,denominator,percent\n";
    for (const auto& m : r.models) {
      if (m.failed || !m.closure) continue;
      for (const auto& c : m.closure->cells) {
        out << m.id << ',' << c.lake << ',' << c.window << ',' << c.inside << ',' << c.available << ','
            << c.denominator << ',' << (c.percent ? fmt(*c.percent) : "NA") << '\n';
      }
    }
  }
  {
    auto out = open_csv(dir / "dic.csv");
    out << prov << "\nmodel,mean_deviance,pd,dic,draws\n";
    for (const auto& m : r.models) {
      if (m.failed) continue;
      out << m.id << ',' << fmt(m.dic.mean_deviance) << ',' << fmt(m.dic.pd) << ',' << fmt(m.dic.dic) << ','
          << m.dic.draws_used << '\n';
    }
  }
  {
    auto out = open_csv(dir / "convergence.csv");
    out << prov << "\nmodel,max_r50,max_r975,count_above_1.1,above_1.1\n";
    for (const auto& m : r.models) {
      if (m.failed) continue;
      std::string names;
      for (const auto& n : m.above_threshold) names += (names.empty() ? "" : ";") + n;
      out << m.id << ',' << fmt(m.max_r50) << ',' << fmt(m.max_r975) << ',' << m.above_threshold.size() << ",\""
          << names << "\"\n";
    }
  }
  {
    // Wall-clock figures live only here and in timing.json.
    auto out = open_csv(dir / "timing.csv");
    out << prov << "\nmodel,seconds,iterations,chains\n";
    json t = json::object();
    for (const auto& m : r.models) {
      out << m.id << ',' << fmt(m.seconds) << ',' << r.settings.iterations << ',' << r.settings.chains << '\n';
      t[m.id] = m.seconds;
    }
    std::ofstream(dir / "timing.json") << json{{"schema_version", kSchemaVersion}, {"seed", r.seed}, {"seconds", t}}.dump(2)
                                       << "\n";
  }
  for (const auto& [a, b] : r.comparisons) {
    const ModelResult* ma = r.find(a);
    const ModelResult* mb = r.find(b);
    if (!ma || !mb || ma->failed || mb->failed) continue;
    auto out = open_csv(dir / ("comparison_" + a + "_vs_" + b + ".csv"));
    out << prov << "\nparameter," << a << "_mean," << a << "_sd," << a << "_q025," << a << "_q975," << b << "_mean," << b
        << "_sd," << b << "_q025," << b << "_q975,sd_ratio\n";
    std::vector<std::string> names;
    for (const auto& s : ma->summaries) {
      if (s.name.size() > 1 && s.name[1] == '[' && mb->find(s.name)) names.push_back(s.name);
    }
    for (const auto& row : compare(r, a, b, names)) {
      out << '"' << row.parameter << "\"," << fmt(row.baseline.mean) << ',' << fmt(row.baseline.sd) << ','
          << fmt(row.baseline.q025) << ',' << fmt(row.baseline.q975) << ',' << fmt(row.candidate.mean) << ','
          << fmt(row.candidate.sd) << ',' << fmt(row.candidate.q025) << ',' << fmt(row.candidate.q975) << ','
          << fmt(row.sd_ratio) << '\n';
    }
  }
  for (const auto& m : r.models) {
    if (!m.failed) write_model_outputs(m, r.seed, dir / "models" / m.id);
  }
  std::ofstream(dir / "report.json") << to_json(r).dump(1) << "\n";
}

ExperimentReport read_report(const std::filesystem::path& dir) {
  std::ifstream in(dir / "report.json");
  if (!in) throw ConfigError("no report.json in " + dir.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("report.json: ") + e.what());
  }
  ExperimentReport r = report_from_json(j);
  std::ifstream tin(dir / "timing.json");
  if (tin) {
    const json t = json::parse(tin, nullptr, false);
    if (!t.is_discarded() && t.contains("seconds")) {
      for (auto& m : r.models) m.seconds = t.at("seconds").value(m.id, 0.0);
    }
  }
  return r;
}

}  // namespace l2swbm
