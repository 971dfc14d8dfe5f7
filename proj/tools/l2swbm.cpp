// Command-line entry point. Exit codes: 0 success, 1 runtime failure,
// 2 configuration or validation failure.

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "l2swbm/diagnostics.hpp"
#include "l2swbm/errors.hpp"
#include "l2swbm/experiment.hpp"
#include "l2swbm/manifest.hpp"
#include "l2swbm/model.hpp"
#include "l2swbm/priors.hpp"
#include "l2swbm/sampler.hpp"
#include "l2swbm/synthetic.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace l2swbm;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitRuntime = 1;
constexpr int kExitConfig = 2;

struct SamplerFlags {
  std::optional<long> k;
  std::optional<int> chains;
  std::optional<std::uint64_t> seed;
  std::optional<long> burn_in;
  std::optional<int> retain;
  std::optional<long> checkpoint;
  long stop_after = 0;
  bool resume = false;
  int threads = 0;
};

void add_sampler_flags(CLI::App* cmd, SamplerFlags& f) {
  cmd->add_option("--k", f.k, "MCMC iterations per chain");
  cmd->add_option("--chains", f.chains, "number of chains");
  cmd->add_option("--seed", f.seed, "master seed (overrides the manifest)");
  cmd->add_option("--burn-in", f.burn_in, "burn-in iterations (default K/2)");
  cmd->add_option("--retain", f.retain, "retained draws per chain");
  cmd->add_option("--checkpoint-interval", f.checkpoint, "iterations between convergence checkpoints");
  cmd->add_option("--threads", f.threads, "worker threads for chains (default L2SWBM_THREADS or all cores)");
  cmd->add_flag("--resume", f.resume, "continue from restart files in the output directory");
  cmd->add_option("--stop-after", f.stop_after, "abort after this many iterations (testing)")->group("");
}

SamplerSettings apply(const SamplerFlags& f, SamplerSettings s, std::uint64_t seed) {
  s.seed = f.seed.value_or(seed);
  if (f.k) {
    s.iterations = *f.k;
    if (!f.burn_in) s.burn_in = *f.k / 2;
  }
  if (f.chains) s.chains = *f.chains;
  if (f.burn_in) s.burn_in = *f.burn_in;
  if (f.retain) s.retained_per_chain = *f.retain;
  if (f.checkpoint) s.checkpoint_interval = *f.checkpoint;
  s.stop_after = f.stop_after;
  s.resume = f.resume;
  s.threads = f.threads;
  s.validate();
  return s;
}

// Refuses to reuse a populated output directory without --force (or
// --resume, which needs the restart files inside it).
void prepare_out(const fs::path& out, bool force, bool resume) {
  if (fs::exists(out) && !fs::is_empty(out)) {
    if (resume) return;
    if (!force) throw ConfigError("output directory " + out.string() + " exists; pass --force to overwrite");
    fs::remove_all(out);
  }
  fs::create_directories(out);
}

std::string fmt(double v) {
  char buf[64];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string valid_ids() {
  std::string s;
  for (const auto& m : canonical_design().models) s += (s.empty() ? "" : " ") + m.id;
  return s;
}

ModelConfig resolve_model(const std::string& id, const RunManifest& m) {
  try {
    ModelConfig c = config_from_id(id, m.span, m.lakes);
    c.monitored = m.monitored;
    return c;
  } catch (const ConfigError& e) {
    throw ConfigError(std::string(e.what()) + "; valid ids: " + valid_ids());
  }
}

PriorSpec load_priors(const RunManifest& m) {
  const fs::path p = m.resolve(m.priors);
  if (!fs::exists(p)) throw ConfigError("prior file " + p.string() + " not found; run fit-priors first");
  return PriorSpec::load(p.string());
}

FitRules load_rules(const std::string& path) {
  FitRules rules;
  if (path.empty()) return rules;
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open rules file " + path);
  try {
    const json j = json::parse(in);
    if (j.contains("precision_scale")) {
      rules.precision_scale.clear();
      for (const auto& [k, v] : j.at("precision_scale").items()) rules.precision_scale[parse_component(k)] = v.get<double>();
    }
    rules.min_points_warning = j.value("min_points_warning", rules.min_points_warning);
  } catch (const json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return rules;
}

int cmd_synth(const fs::path& out, std::uint64_t seed, bool force) {
  prepare_out(out, force, false);
  SyntheticOptions o;
  o.seed = seed;
  write_synthetic(generate_synthetic(o), out, seed);
  std::cout << "wrote synthetic fixture to " << out.string() << "\n";
  return kExitOk;
}

int cmd_fit_priors(const fs::path& manifest_path, const std::string& rules_path, const std::string& out_arg, bool force) {
  const RunManifest m = load_manifest(manifest_path);
  m.validate();
  const fs::path out = out_arg.empty() ? m.resolve(m.priors) : fs::path(out_arg);
  if (fs::exists(out) && !force) throw ConfigError(out.string() + " exists; pass --force to overwrite");
  std::vector<std::string> warnings;
  const PriorSpec spec = fit_all(m.history_series(), load_rules(rules_path), &warnings);
  spec.validate();
  for (const auto& w : warnings) std::cerr << "warning: " << w << "\n";
  spec.save(out.string());
  std::cout << "wrote " << spec.size() << " prior cells to " << out.string() << "\n";
  return kExitOk;
}

int cmd_run(const fs::path& manifest_path, const std::string& model_id, const SamplerFlags& flags, bool no_ppc,
            const std::string& out_arg, bool force, const std::vector<std::string>& monitor) {
  RunManifest m = load_manifest(manifest_path);
  if (!monitor.empty()) m.monitored = monitor;
  m.sampler = apply(flags, m.sampler, m.seed);
  m.validate();
  const ModelConfig config = resolve_model(model_id, m);
  const PriorSpec priors = load_priors(m);
  const AlignedTable data = m.aligned();
  for (const auto& w : data.warnings) std::cerr << "warning: " << w << "\n";

  const fs::path out = out_arg.empty() ? m.resolve(m.out) / config.id : fs::path(out_arg);
  prepare_out(out, force, flags.resume);

  ExperimentResources res;
  res.data = &data;
  res.priors = &priors;
  res.posterior_predictive = !no_ppc;
  SamplerSettings s = m.sampler;
  s.restart_dir = out / "restart";
  SampleStore store;
  std::cerr << "running " << config.id << " (" << s.iterations << " iterations x " << s.chains << " chains)\n";
  const ModelResult r = run_model(config, s, res, &store);
  if (store.params() > 0) save_store(store, out, m.monitored);
  write_model_outputs(r, s.seed, out);

  json diag{{"schema_version", kSchemaVersion},
            {"artifact", kArtifactName},
            {"version", kArtifactVersion},
            {"model", config.id},
            {"seed", s.seed},
            {"config", to_json(config)},
            {"failed", r.failed},
            {"reason", r.reason},
            {"counts", {{"stochastic", r.counts.stochastic}, {"deterministic", r.counts.deterministic}, {"observed", r.counts.observed}}}};
  if (!r.failed) {
    diag["dic"] = {{"mean_deviance", r.dic.mean_deviance}, {"pd", r.dic.pd}, {"dic", r.dic.dic}, {"draws", r.dic.draws_used}};
    diag["psrf"] = {{"max_r50", r.max_r50}, {"max_r975", r.max_r975}, {"above_threshold", r.above_threshold}};
    if (r.closure) {
      std::ofstream c(out / "closure.csv");
      c << provenance_line(config.id, s.seed) << "\nlake,window,inside,available,denominator,percent\n";
      json cells = json::array();
      for (const auto& cell : r.closure->cells) {
        c << cell.lake << ',' << cell.window << ',' << cell.inside << ',' << cell.available << ',' << cell.denominator
          << ',' << (cell.percent ? fmt(*cell.percent) : "NA") << '\n';
        cells.push_back({{"lake", cell.lake}, {"window", cell.window}, {"percent", cell.percent ? json(*cell.percent) : json(nullptr)}});
      }
      diag["closure"] = cells;
    }
  }
  std::ofstream(out / "diagnostics.json") << diag.dump(2) << "\n";

  if (r.failed) {
    std::cerr << "error: model " << config.id << " failed: " << r.reason << "\n";
    return kExitRuntime;
  }
  std::cout << config.id << ": DIC " << fmt(r.dic.dic) << ", pD " << fmt(r.dic.pd) << ", max R50 " << fmt(r.max_r50)
            << ", sampling " << fmt(std::round(r.seconds * 100.0) / 100.0) << " s\n";
  if (r.closure) {
    for (const auto& cell : r.closure->cells) {
      std::cout << "  closure " << cell.lake << " w=" << cell.window << ": "
                << (cell.percent ? fmt(std::round(*cell.percent * 10.0) / 10.0) + "%" : std::string("n/a")) << "\n";
    }
  }
  return kExitOk;
}

int cmd_experiment(const fs::path& manifest_path, const std::string& design_path, bool canonical,
                   const SamplerFlags& flags, bool no_ppc, const std::string& out_arg, bool force) {
  RunManifest m = load_manifest(manifest_path);
  m.sampler = apply(flags, m.sampler, m.seed);
  m.validate();
  if (canonical == !design_path.empty()) throw ConfigError("pass exactly one of --design or --canonical");
  DesignMatrix design;
  if (canonical) {
    design = canonical_design(m.span, m.lakes);
    design.settings = m.sampler;
  } else {
    std::ifstream in(design_path);
    if (!in) throw ConfigError("cannot open design " + design_path);
    json j;
    try {
      j = json::parse(in);
    } catch (const json::exception& e) {
      throw ConfigError(design_path + ": " + e.what());
    }
    design = design_from_json(j, m.span, m.lakes, m.sampler);
    if (flags.k || flags.chains || flags.seed || flags.burn_in || flags.retain || flags.checkpoint) design.settings = apply(flags, design.settings, design.settings.seed);
    design.settings.stop_after = flags.stop_after;
    design.settings.resume = flags.resume;
    design.settings.threads = flags.threads;
  }
  for (auto& c : design.models) c.monitored = m.monitored;
  design.validate();
  const PriorSpec priors = load_priors(m);
  const AlignedTable data = m.aligned();

  const fs::path out = out_arg.empty() ? m.resolve(m.out) / "experiment" : fs::path(out_arg);
  prepare_out(out, force, flags.resume);
  ExperimentResources res;
  res.data = &data;
  res.priors = &priors;
  res.posterior_predictive = !no_ppc;
  res.restart_root = out / "restart";
  res.progress = [](const std::string& msg) { std::cerr << msg << "\n"; };
  const ExperimentReport report = run_design(design, res);
  write_report(report, out);

  std::cout << "model    status  DIC          maxR50   seconds\n";
  int failures = 0;
  for (const auto& r : report.models) {
    char line[160];
    if (r.failed) {
      ++failures;
      std::snprintf(line, sizeof line, "%-8s failed  %s", r.id.c_str(), r.reason.c_str());
    } else {
      std::snprintf(line, sizeof line, "%-8s ok      %-12.1f %-8.3f %.1f", r.id.c_str(), r.dic.dic, r.max_r50, r.seconds);
    }
    std::cout << line << "\n";
  }
  std::cout << "report written to " << out.string() << "\n";
  return failures == 0 ? kExitOk : kExitRuntime;
}

int cmd_dot(const fs::path& manifest_path, const std::string& model_id) {
  const RunManifest m = load_manifest(manifest_path);
  m.validate();
  const ModelConfig config = resolve_model(model_id, m);
  const Network net = build_network(config, load_priors(m), m.aligned());
  std::cout << net.to_dot();
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bayesian large-lake water balance inference and experiment harness"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kArtifactName) + " " + kArtifactVersion);

  fs::path manifest = "manifest.json";
  std::string out;
  bool force = false;
  bool no_ppc = false;
  std::string model;
  std::string design;
  bool canonical = false;
  std::string rules;
  std::uint64_t synth_seed = 20050101;
  std::vector<std::string> monitor;
  SamplerFlags flags;

  auto* synth = app.add_subcommand("synth", "write the synthetic two-lake fixture");
  synth->add_option("--out", out, "fixture directory")->required();
  synth->add_option("--seed", synth_seed, "generator seed");
  synth->add_flag("--force", force, "overwrite an existing directory");

  auto* fit = app.add_subcommand("fit-priors", "fit calendar-month priors from the manifest's history");
  fit->add_option("--manifest", manifest, "run manifest")->check(CLI::ExistingFile);
  fit->add_option("--rules", rules, "JSON fitting rules")->check(CLI::ExistingFile);
  fit->add_option("--out", out, "prior file (default: the manifest's priors path)");
  fit->add_flag("--force", force, "overwrite an existing prior file");

  auto* run = app.add_subcommand("run", "sample and diagnose one model");
  run->add_option("--manifest", manifest, "run manifest")->check(CLI::ExistingFile);
  run->add_option("--model", model, "model id, e.g. PROT or f12FF")->required();
  run->add_option("--out", out, "output directory");
  run->add_flag("--force", force, "overwrite an existing output directory");
  run->add_flag("--no-ppc", no_ppc, "skip posterior-predictive closure");
  run->add_option("--monitor", monitor, "node name patterns to persist")->group("");
  add_sampler_flags(run, flags);

  auto* exp = app.add_subcommand("experiment", "run a design of model variants");
  exp->add_option("--manifest", manifest, "run manifest")->check(CLI::ExistingFile);
  exp->add_option("--design", design, "design JSON")->check(CLI::ExistingFile);
  exp->add_flag("--canonical", canonical, "the full 26-model design");
  exp->add_option("--out", out, "report directory");
  exp->add_flag("--force", force, "overwrite an existing report directory");
  exp->add_flag("--no-ppc", no_ppc, "skip posterior-predictive closure");
  add_sampler_flags(exp, flags);

  auto* dot = app.add_subcommand("dot", "print a model's graph in DOT format");
  dot->add_option("--manifest", manifest, "run manifest")->check(CLI::ExistingFile);
  dot->add_option("--model", model, "model id")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*synth) return cmd_synth(out, synth_seed, force);
    if (*fit) return cmd_fit_priors(manifest, rules, out, force);
    if (*run) return cmd_run(manifest, model, flags, no_ppc, out, force, monitor);
    if (*exp) return cmd_experiment(manifest, design, canonical, flags, no_ppc, out, force);
    if (*dot) return cmd_dot(manifest, model);
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitRuntime;
  }
  return kExitRuntime;
}
