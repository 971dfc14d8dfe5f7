#pragma once

// Run manifest: everything a command needs to reproduce a run. Relative
// paths are resolved against the directory holding the manifest file.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "l2swbm/ingest.hpp"
#include "l2swbm/model_config.hpp"
#include "l2swbm/sample_store.hpp"

namespace l2swbm {

// Months and source number used to fit priors.
struct HistorySpec {
  YearMonth start{1950, 1};
  YearMonth end{2004, 12};
  int source = 1;
};

struct RunManifest {
  std::filesystem::path base_dir;  // not serialised
  AnalysisSpan span{{2005, 1}, 120};
  std::vector<LakeSpec> lakes{{"SUP", 0.7}, {"MHU", 0.7}};
  std::vector<SeriesDeclaration> series;  // paths relative to base_dir
  HistorySpec history;
  std::filesystem::path priors = "priors.json";
  SamplerSettings sampler;
  std::filesystem::path out = "out";
  std::uint64_t seed = 1;
  std::vector<std::string> monitored{"*"};

  std::filesystem::path resolve(const std::filesystem::path& p) const;
  // Throws ConfigError for unresolvable series files or inconsistent fields.
  void validate() const;

  std::vector<ComponentSeries> load_series_set() const;
  AlignedTable aligned() const;
  // The history source of every latent component, clipped to the history
  // months.
  std::vector<ComponentSeries> history_series() const;
  std::vector<std::string> lake_names() const;
};

nlohmann::json to_json(const RunManifest& m);
RunManifest manifest_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
RunManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const RunManifest& m, const std::filesystem::path& path);

// Entries of `s` from `from` through `to` inclusive; empty when disjoint.
ComponentSeries clip(const ComponentSeries& s, YearMonth from, YearMonth to);

}  // namespace l2swbm
