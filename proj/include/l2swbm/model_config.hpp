#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "l2swbm/calendar.hpp"

namespace l2swbm {

enum class ProcessErrorStructure { None, FixedSeasonal, Hierarchical };
enum class BiasStructure { FixedSeasonal, Hierarchical };

struct LakeSpec {
  std::string name;
  // Scales the upstream lake's outflow into this lake's inflow (surface-area
  // ratio). Ignored for the most upstream lake, whose inflow is zero.
  double inflow_scale = 0.7;
  bool operator==(const LakeSpec&) const = default;
};

struct GammaHyper {
  double shape = 1.0;
  double rate = 1.0;
  bool operator==(const GammaHyper&) const = default;
};

// Fixed hyperprior constants of the model family.
struct Hyperpriors {
  GammaHyper delta_h_precision{0.01, 0.01};
  GammaHyper observation_precision{0.1, 0.1};
  GammaHyper seasonal_precision{0.05, 0.05};  // tau_eps and tau_eta in hierarchical structures
  double seasonal_mean_precision = 0.01;      // eps_c and eta_c priors N(0, .)
  double constrained_bias_precision = 0.25;   // eta_c prior for Q and D when constrained
  bool operator==(const Hyperpriors&) const = default;
};

struct ModelConfig {
  std::string id;
  Window window = Window::rolling(1);
  ProcessErrorStructure process_error = ProcessErrorStructure::None;
  BiasStructure bias = BiasStructure::FixedSeasonal;
  bool constrained_flow_bias = false;
  AnalysisSpan span{{2005, 1}, 120};
  std::vector<LakeSpec> lakes{{"SUP", 0.7}, {"MHU", 0.7}};  // upstream -> downstream
  // Node patterns recorded by the sampler; "*" means every stochastic node and
  // every inflow node.
  std::vector<std::string> monitored{"*"};
  Hyperpriors hyper;

  // Throws ConfigError when fields are inconsistent.
  void validate() const;
  bool operator==(const ModelConfig&) const = default;
};

// Label implied by the structural fields: [f](PROT | ww N|F|H F|H), e.g.
// "f12FF", "01NH", "PROT". Cumulative variants other than the prototype use
// "C" in place of the window digits.
std::string structural_id(const ModelConfig& c);

// Inverse of structural_id; span and lakes come from the arguments.
ModelConfig config_from_id(const std::string& id, AnalysisSpan span,
                           std::vector<LakeSpec> lakes = {{"SUP", 0.7}, {"MHU", 0.7}});

const char* to_string(ProcessErrorStructure p);
const char* to_string(BiasStructure b);

nlohmann::json to_json(const ModelConfig& c);
ModelConfig model_config_from_json(const nlohmann::json& j, AnalysisSpan default_span,
                                   const std::vector<LakeSpec>& default_lakes);
nlohmann::json to_json(const AnalysisSpan& s);
AnalysisSpan span_from_json(const nlohmann::json& j);
std::vector<LakeSpec> lakes_from_json(const nlohmann::json& j);

}  // namespace l2swbm
