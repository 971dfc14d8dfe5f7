#include "l2swbm/sample_store.hpp"

#include <charconv>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "l2swbm/calendar.hpp"
#include "l2swbm/errors.hpp"

namespace l2swbm {

using nlohmann::json;

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError(path.string() + ": " + e.what());
  }
}

}  // namespace

void SamplerSettings::validate() const {
  if (iterations < 1) throw ConfigError("iterations must be positive");
  if (chains < 1) throw ConfigError("chains must be positive");
  if (burn_in < 0 || burn_in >= iterations) throw ConfigError("burn-in must be in [0, iterations)");
  if (retained_per_chain < 1 || retained_per_chain > iterations - burn_in) {
    throw ConfigError("retained draws per chain must be in [1, iterations - burn-in]");
  }
  if (!(slice_width > 0.0)) throw ConfigError("slice width must be positive");
  if (slice_max_steps < 1) throw ConfigError("slice step budget must be positive");
  if (checkpoint_interval < 1) throw ConfigError("checkpoint interval must be positive");
  if (stop_after < 0) throw ConfigError("stop_after must be non-negative");
}

std::vector<long> SamplerSettings::retained_iterations() const {
  const long stride = (iterations - burn_in) / retained_per_chain;
  std::vector<long> out(static_cast<std::size_t>(retained_per_chain));
  for (int d = 0; d < retained_per_chain; ++d) {
    out[static_cast<std::size_t>(d)] = iterations - static_cast<long>(retained_per_chain - 1 - d) * stride;
  }
  return out;
}

int SamplerSettings::resolved_threads() const {
  if (threads > 0) return threads;
  if (const char* env = std::getenv("L2SWBM_THREADS")) {
    int v = std::atoi(env);
    if (v > 0) return v;
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

json to_json(const SamplerSettings& s) {
  return json{{"iterations", s.iterations},
              {"chains", s.chains},
              {"burn_in", s.burn_in},
              {"retained_per_chain", s.retained_per_chain},
              {"seed", s.seed},
              {"slice_width", s.slice_width},
              {"slice_max_steps", s.slice_max_steps},
              {"checkpoint_interval", s.checkpoint_interval}};
}

SamplerSettings sampler_settings_from_json(const json& j, SamplerSettings base) {
  try {
    base.iterations = j.value("iterations", base.iterations);
    base.chains = j.value("chains", base.chains);
    base.burn_in = j.contains("burn_in") ? j.at("burn_in").get<long>() : base.iterations / 2;
    base.retained_per_chain = j.value("retained_per_chain", base.retained_per_chain);
    base.seed = j.value("seed", base.seed);
    base.slice_width = j.value("slice_width", base.slice_width);
    base.slice_max_steps = j.value("slice_max_steps", base.slice_max_steps);
    base.checkpoint_interval = j.value("checkpoint_interval", base.checkpoint_interval);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed sampler settings: ") + e.what());
  }
  base.validate();
  return base;
}

SampleStore::SampleStore(std::vector<NodeIndex> nodes, std::vector<std::string> names, int chains, int draws)
    : nodes_(std::move(nodes)), names_(std::move(names)), chains_(chains), draws_(draws) {
  data_.assign(names_.size() * static_cast<std::size_t>(chains) * static_cast<std::size_t>(draws), 0.0);
  for (std::size_t i = 0; i < names_.size(); ++i) index_.emplace(names_[i], i);
}

std::optional<std::size_t> SampleStore::index_of(std::string_view name) const {
  auto it = index_.find(std::string(name));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::size_t SampleStore::at(std::string_view name) const {
  if (auto i = index_of(name)) return *i;
  throw ComparisonError("parameter " + std::string(name) + " is not monitored in model " + model_id);
}

bool SampleStore::failed() const {
  for (const auto& s : status) {
    if (s.failed) return true;
  }
  return false;
}

std::string SampleStore::failure_reason() const {
  for (std::size_t c = 0; c < status.size(); ++c) {
    if (status[c].failed) return "chain " + std::to_string(c) + ": " + status[c].reason;
  }
  return {};
}

std::string file_stem(std::string_view name) {
  std::string out;
  for (char ch : name) {
    if (ch == '[' || ch == ',') {
      out += '_';
    } else if (ch != ']') {
      out += ch;
    }
  }
  return out;
}

std::string provenance_line(const std::string& model_id, std::uint64_t seed) {
  return std::string("# artifact=") + kArtifactName + " version=" + kArtifactVersion + " model=" + model_id +
         " seed=" + std::to_string(seed);
}

void save_store(const SampleStore& store, const std::filesystem::path& dir, const std::vector<std::string>& patterns) {
  std::filesystem::create_directories(dir / "samples");
  json params = json::array();
  for (std::size_t p = 0; p < store.params(); ++p) {
    const auto& name = store.names()[p];
    bool keep = false;
    for (const auto& pat : patterns) keep = keep || glob_match(pat, name);
    if (!keep) continue;
    params.push_back({{"name", name}, {"file", "samples/" + file_stem(name) + ".csv"}});
    std::ofstream out(dir / "samples" / (file_stem(name) + ".csv"));
    if (!out) throw Error("cannot write samples for " + name);
    out << provenance_line(store.model_id, store.settings.seed) << "\n";
    out << "chain,draw_index,value\n";
    for (int c = 0; c < store.chains(); ++c) {
      auto d = store.draws(p, c);
      for (std::size_t k = 0; k < d.size(); ++k) out << c << ',' << k << ',' << fmt(d[k]) << '\n';
    }
  }
  json status = json::array();
  for (const auto& s : store.status) {
    status.push_back({{"failed", s.failed}, {"reason", s.reason}, {"iterations_done", s.iterations_done}});
  }
  json manifest{{"schema_version", kSchemaVersion},
                {"artifact", kArtifactName},
                {"version", kArtifactVersion},
                {"model", store.model_id},
                {"seed", store.settings.seed},
                {"settings", to_json(store.settings)},
                {"chains", store.chains()},
                {"draws_per_chain", store.draws()},
                {"iterations", store.iterations},
                {"chain_status", status},
                {"parameters", params}};
  std::ofstream(dir / "manifest.json") << manifest.dump(2) << "\n";
  json chain_seconds = json::array();
  for (const auto& s : store.status) chain_seconds.push_back(s.seconds);
  json timing{{"schema_version", kSchemaVersion},
              {"model", store.model_id},
              {"seed", store.settings.seed},
              {"chain_seconds", chain_seconds},
              {"total_seconds", store.total_seconds}};
  std::ofstream(dir / "timing.json") << timing.dump(2) << "\n";
}

SampleStore load_store(const std::filesystem::path& dir) {
  const json m = read_json(dir / "manifest.json");
  if (m.value("schema_version", 0) != kSchemaVersion) throw ConfigError("unsupported sample store schema");
  std::vector<std::string> names;
  std::vector<std::string> files;
  for (const auto& p : m.at("parameters")) {
    names.push_back(p.at("name").get<std::string>());
    files.push_back(p.at("file").get<std::string>());
  }
  const int chains = m.at("chains").get<int>();
  const int draws = m.at("draws_per_chain").get<int>();
  SampleStore store(std::vector<NodeIndex>(names.size(), kNoNode), names, chains, draws);
  store.model_id = m.at("model").get<std::string>();
  store.settings = sampler_settings_from_json(m.at("settings"));
  store.iterations = m.at("iterations").get<std::vector<long>>();
  for (const auto& s : m.at("chain_status")) {
    ChainStatus cs;
    cs.failed = s.at("failed").get<bool>();
    cs.reason = s.at("reason").get<std::string>();
    cs.iterations_done = s.at("iterations_done").get<long>();
    store.status.push_back(cs);
  }
  if (std::filesystem::exists(dir / "timing.json")) {
    const json t = read_json(dir / "timing.json");
    store.total_seconds = t.value("total_seconds", 0.0);
    const auto secs = t.value("chain_seconds", std::vector<double>{});
    for (std::size_t c = 0; c < secs.size() && c < store.status.size(); ++c) store.status[c].seconds = secs[c];
  }
  for (std::size_t p = 0; p < names.size(); ++p) {
    std::ifstream in(dir / files[p]);
    if (!in) throw ConfigError("missing sample file " + files[p]);
    std::string line;
    std::size_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty() || line[0] == '#' || line.rfind("chain,", 0) == 0) continue;
      int c = 0;
      std::size_t k = 0;
      double v = 0.0;
      const char* b = line.data();
      const char* e = b + line.size();
      auto r1 = std::from_chars(b, e, c);
      auto r2 = std::from_chars(r1.ptr + 1, e, k);
      auto r3 = std::from_chars(r2.ptr + 1, e, v);
      if (r1.ec != std::errc{} || r2.ec != std::errc{} || r3.ec != std::errc{} || c < 0 || c >= chains ||
          k >= static_cast<std::size_t>(draws)) {
        throw ParseError((dir / files[p]).string(), row, "malformed draw");
      }
      store.draws(p, c)[k] = v;
    }
  }
  return store;
}

}  // namespace l2swbm
