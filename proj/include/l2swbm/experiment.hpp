#pragma once

// Factorial experiment over model variants: build, sample, diagnose and
// tabulate each configuration in isolation.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "l2swbm/diagnostics.hpp"
#include "l2swbm/ingest.hpp"
#include "l2swbm/model_config.hpp"
#include "l2swbm/priors.hpp"
#include "l2swbm/sample_store.hpp"

namespace l2swbm {

struct DesignMatrix {
  std::vector<ModelConfig> models;
  SamplerSettings settings;
  // Baseline/candidate pairs tabulated side by side.
  std::vector<std::pair<std::string, std::string>> comparisons;

  // Ids must be unique; throws ConfigError.
  void validate() const;
};

// PROT, 01NF..12HH, then the constrained-flow-bias copies of all 13.
DesignMatrix canonical_design(AnalysisSpan span = {{2005, 1}, 120},
                              const std::vector<LakeSpec>& lakes = {{"SUP", 0.7}, {"MHU", 0.7}});

nlohmann::json to_json(const DesignMatrix& d);
// Accepts {"models": [id | config object, ...], "sampler": {...},
// "comparisons": [[a, b], ...]}.
DesignMatrix design_from_json(const nlohmann::json& j, AnalysisSpan default_span,
                              const std::vector<LakeSpec>& default_lakes, const SamplerSettings& defaults = {});

struct ParameterSummary {
  std::string name;
  PosteriorSummary stats;
  bool operator==(const ParameterSummary&) const = default;
};

struct ModelResult {
  std::string id;
  bool failed = false;
  std::string reason;
  NodeCounts counts;
  std::optional<ClosureReport> closure;  // empty when predictive checks are off
  DicScore dic;
  double max_r50 = 0.0;
  double max_r975 = 0.0;
  std::vector<std::string> above_threshold;
  std::vector<TrajectoryPoint> trajectory;
  std::vector<ParameterSummary> summaries;  // latent components and precisions
  double seconds = 0.0;                     // sampling wall-clock only; never serialised in report.json

  const ParameterSummary* find(const std::string& name) const;
};

struct ExperimentReport {
  std::uint64_t seed = 0;
  SamplerSettings settings;
  std::vector<ModelResult> models;
  std::vector<std::pair<std::string, std::string>> comparisons;

  const ModelResult* find(const std::string& id) const;
};

struct ExperimentResources {
  const AlignedTable* data = nullptr;
  const PriorSpec* priors = nullptr;
  bool posterior_predictive = true;
  std::vector<int> closure_windows{1, 12, 60};
  int dic_draws = 1000;
  // Per-model restart directories are created below this root when set.
  std::filesystem::path restart_root;
  std::function<void(const std::string&)> progress;
};

// Builds, samples and diagnoses one model. When `keep` is given the sample
// store is moved into it. Failures are reported in the result.
ModelResult run_model(const ModelConfig& config, const SamplerSettings& settings, const ExperimentResources& res,
                      SampleStore* keep = nullptr);

ExperimentReport run_design(const DesignMatrix& design, const ExperimentResources& res);

struct ComparisonRow {
  std::string parameter;
  PosteriorSummary baseline;
  PosteriorSummary candidate;
  double sd_ratio = 1.0;  // candidate / baseline
};

// Parameters default to every channel-flow summary of the baseline. Throws
// ComparisonError naming a missing model or parameter.
std::vector<ComparisonRow> compare(const ExperimentReport& report, const std::string& baseline,
                                   const std::string& candidate, const std::vector<std::string>& parameters = {});

nlohmann::json to_json(const ExperimentReport& r);
ExperimentReport report_from_json(const nlohmann::json& j);

// closure.csv, dic.csv, convergence.csv, models.csv, timing.csv,
// comparison_<a>_vs_<b>.csv, report.json, and per-model plot data under
// models/<id>/.
void write_report(const ExperimentReport& r, const std::filesystem::path& dir);
ExperimentReport read_report(const std::filesystem::path& dir);

// Per-model plot data: psrf_trajectory.csv, closure_bands.csv, flows.csv.
void write_model_outputs(const ModelResult& m, std::uint64_t seed, const std::filesystem::path& dir);

}  // namespace l2swbm
