#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include <json.hpp>

#include "l2swbm/network.hpp"

namespace l2swbm {

struct SamplerSettings {
  long iterations = 50000;
  int chains = 3;
  long burn_in = 25000;
  int retained_per_chain = 1000;
  std::uint64_t seed = 1;
  double slice_width = 20.0;
  int slice_max_steps = 50;
  long checkpoint_interval = 10000;
  // Directory for per-chain restart state (chain<k>.restart) and elapsed
  // seconds (chain<k>.timing); empty disables them.
  std::filesystem::path restart_dir;
  bool resume = false;
  // Abort every chain after this iteration (0 = never). Simulates an
  // interruption; a restart file is written first.
  long stop_after = 0;
  // Worker threads for chains; 0 reads L2SWBM_THREADS, falling back to the
  // hardware concurrency.
  int threads = 0;

  // burn_in < K and retained_per_chain <= K - burn_in, all counts positive.
  void validate() const;
  // Iteration stamps of retained draws (1-based, ascending, last equals K).
  std::vector<long> retained_iterations() const;
  int resolved_threads() const;
};

nlohmann::json to_json(const SamplerSettings& s);
SamplerSettings sampler_settings_from_json(const nlohmann::json& j, SamplerSettings base = {});

// Per-chain Welford moments of the draws used by one convergence checkpoint:
// the last half of the iterations up to `iteration`, thinned to 1,000.
struct CheckpointMoments {
  long iteration = 0;
  long stride = 0;
  int target = 1000;
  std::vector<double> count;  // [param * chains + chain]
  std::vector<double> mean;
  std::vector<double> m2;
};

struct ChainStatus {
  bool failed = false;
  std::string reason;
  double seconds = 0.0;
  long iterations_done = 0;
};

// Retained draws of the recorded nodes, laid out [param][chain][draw].
class SampleStore {
 public:
  SampleStore() = default;
  SampleStore(std::vector<NodeIndex> nodes, std::vector<std::string> names, int chains, int draws);

  std::size_t params() const { return names_.size(); }
  int chains() const { return chains_; }
  int draws() const { return draws_; }
  const std::vector<std::string>& names() const { return names_; }
  const std::vector<NodeIndex>& nodes() const { return nodes_; }
  std::optional<std::size_t> index_of(std::string_view name) const;
  std::size_t at(std::string_view name) const;  // throws ComparisonError

  std::span<double> draws(std::size_t param, int chain) {
    return {data_.data() + (param * static_cast<std::size_t>(chains_) + static_cast<std::size_t>(chain)) *
                               static_cast<std::size_t>(draws_),
            static_cast<std::size_t>(draws_)};
  }
  std::span<const double> draws(std::size_t param, int chain) const {
    return {data_.data() + (param * static_cast<std::size_t>(chains_) + static_cast<std::size_t>(chain)) *
                               static_cast<std::size_t>(draws_),
            static_cast<std::size_t>(draws_)};
  }
  // All chains of one parameter, chain-major.
  std::span<const double> all_draws(std::size_t param) const {
    return {data_.data() + param * static_cast<std::size_t>(chains_) * static_cast<std::size_t>(draws_),
            static_cast<std::size_t>(chains_) * static_cast<std::size_t>(draws_)};
  }

  bool failed() const;
  std::string failure_reason() const;

  std::string model_id;
  SamplerSettings settings;
  std::vector<long> iterations;  // stamp of each retained draw
  std::vector<ChainStatus> status;
  double total_seconds = 0.0;
  std::vector<CheckpointMoments> checkpoints;  // convergence checkpoints
  std::vector<std::size_t> psrf_params;        // parameter positions covered by checkpoints

 private:
  std::vector<NodeIndex> nodes_;
  std::vector<std::string> names_;
  std::unordered_map<std::string, std::size_t> index_;
  int chains_ = 0;
  int draws_ = 0;
  std::vector<double> data_;
};

// Directory layout: manifest.json (settings, parameter list, iteration
// stamps), timing.json (wall-clock seconds), and samples/<name>.csv with
// rows `chain,draw_index,value` for every parameter matching `patterns`.
void save_store(const SampleStore& store, const std::filesystem::path& dir,
                const std::vector<std::string>& patterns = {"*"});
// Reads the parameters persisted by save_store.
SampleStore load_store(const std::filesystem::path& dir);

// File-system safe form of a node name, e.g. "Q[SUP,10]" -> "Q_SUP_10".
std::string file_stem(std::string_view node_name);

// Leading comment line carried by every CSV artifact.
std::string provenance_line(const std::string& model_id, std::uint64_t seed);

}  // namespace l2swbm
