#include "l2swbm/model_config.hpp"

#include <cctype>
#include <cstdio>

#include "l2swbm/errors.hpp"

namespace l2swbm {

using nlohmann::json;

const char* to_string(ProcessErrorStructure p) {
  switch (p) {
    case ProcessErrorStructure::None: return "none";
    case ProcessErrorStructure::FixedSeasonal: return "fixed";
    case ProcessErrorStructure::Hierarchical: return "hierarchical";
  }
  return "?";
}

const char* to_string(BiasStructure b) {
  return b == BiasStructure::FixedSeasonal ? "fixed" : "hierarchical";
}

std::string structural_id(const ModelConfig& c) {
  std::string id = c.constrained_flow_bias ? "f" : "";
  if (c.window.cumulative && c.process_error == ProcessErrorStructure::None &&
      c.bias == BiasStructure::FixedSeasonal) {
    return id + "PROT";
  }
  if (c.window.cumulative) {
    id += "C";
  } else {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%02d", c.window.width);
    id += buf;
  }
  id += c.process_error == ProcessErrorStructure::None           ? 'N'
        : c.process_error == ProcessErrorStructure::FixedSeasonal ? 'F'
                                                                  : 'H';
  id += c.bias == BiasStructure::FixedSeasonal ? 'F' : 'H';
  return id;
}

ModelConfig config_from_id(const std::string& id, AnalysisSpan span, std::vector<LakeSpec> lakes) {
  ModelConfig c;
  c.span = span;
  c.lakes = std::move(lakes);
  std::string_view rest = id;
  if (!rest.empty() && rest.front() == 'f') {
    c.constrained_flow_bias = true;
    rest.remove_prefix(1);
  }
  auto bad = [&]() { return ConfigError("unrecognised model id '" + id + "'"); };
  if (rest == "PROT") {
    c.window = Window::cumulative_window();
  } else {
    if (rest.empty()) throw bad();
    if (rest.front() == 'C') {
      c.window = Window::cumulative_window();
      rest.remove_prefix(1);
    } else {
      std::size_t digits = 0;
      while (digits < rest.size() && std::isdigit(static_cast<unsigned char>(rest[digits]))) ++digits;
      if (digits == 0) throw bad();
      c.window = Window::rolling(std::stoi(std::string(rest.substr(0, digits))));
      rest.remove_prefix(digits);
    }
    if (rest.size() != 2) throw bad();
    switch (rest[0]) {
      case 'N': c.process_error = ProcessErrorStructure::None; break;
      case 'F': c.process_error = ProcessErrorStructure::FixedSeasonal; break;
      case 'H': c.process_error = ProcessErrorStructure::Hierarchical; break;
      default: throw bad();
    }
    switch (rest[1]) {
      case 'F': c.bias = BiasStructure::FixedSeasonal; break;
      case 'H': c.bias = BiasStructure::Hierarchical; break;
      default: throw bad();
    }
  }
  c.id = structural_id(c);
  if (c.id != id) throw bad();
  c.validate();
  return c;
}

void ModelConfig::validate() const {
  if (span.months < 1) throw ConfigError("analysis span must contain at least one month");
  if (!window.cumulative && (window.width < 1 || window.width > span.months)) {
    throw ConfigError("model " + id + ": rolling window " + std::to_string(window.width) +
                      " must be in 1.." + std::to_string(span.months));
  }
  if (lakes.empty()) throw ConfigError("model " + id + ": no lakes configured");
  if (id != structural_id(*this)) {
    throw ConfigError("model id '" + id + "' does not match its structure (expected '" +
                      structural_id(*this) + "')");
  }
}

json to_json(const AnalysisSpan& s) { return json{{"start", s.start.str()}, {"months", s.months}}; }

AnalysisSpan span_from_json(const json& j) {
  try {
    return AnalysisSpan{YearMonth::parse(j.at("start").get<std::string>()), j.at("months").get<int>()};
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed analysis_span: ") + e.what());
  }
}

std::vector<LakeSpec> lakes_from_json(const json& j) {
  std::vector<LakeSpec> out;
  try {
    for (const auto& item : j) {
      if (item.is_string()) {
        out.push_back(LakeSpec{item.get<std::string>(), 0.7});
      } else {
        out.push_back(LakeSpec{item.at("name").get<std::string>(), item.value("inflow_scale", 0.7)});
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed lakes list: ") + e.what());
  }
  return out;
}

json to_json(const ModelConfig& c) {
  json lakes = json::array();
  for (const auto& l : c.lakes) lakes.push_back({{"name", l.name}, {"inflow_scale", l.inflow_scale}});
  json hyper = {
      {"delta_h_precision", {c.hyper.delta_h_precision.shape, c.hyper.delta_h_precision.rate}},
      {"observation_precision", {c.hyper.observation_precision.shape, c.hyper.observation_precision.rate}},
      {"seasonal_precision", {c.hyper.seasonal_precision.shape, c.hyper.seasonal_precision.rate}},
      {"seasonal_mean_precision", c.hyper.seasonal_mean_precision},
      {"constrained_bias_precision", c.hyper.constrained_bias_precision},
  };
  json j;
  j["schema_version"] = kSchemaVersion;
  j["id"] = c.id;
  if (c.window.cumulative) {
    j["window"] = "C";
  } else {
    j["window"] = c.window.width;
  }
  j["process_error"] = to_string(c.process_error);
  j["bias"] = to_string(c.bias);
  j["constrained_flow_bias"] = c.constrained_flow_bias;
  j["analysis_span"] = to_json(c.span);
  j["lakes"] = lakes;
  j["monitored"] = c.monitored;
  j["hyperpriors"] = hyper;
  return j;
}

ModelConfig model_config_from_json(const json& j, AnalysisSpan default_span,
                                   const std::vector<LakeSpec>& default_lakes) {
  if (j.is_string()) return config_from_id(j.get<std::string>(), default_span, default_lakes);
  try {
    ModelConfig c;
    c.span = j.contains("analysis_span") ? span_from_json(j.at("analysis_span")) : default_span;
    c.lakes = j.contains("lakes") ? lakes_from_json(j.at("lakes")) : default_lakes;
    if (j.contains("window")) {
      const auto& w = j.at("window");
      if (w.is_string() && w.get<std::string>() == "C") {
        c.window = Window::cumulative_window();
      } else {
        c.window = Window::rolling(w.get<int>());
      }
      std::string pe = j.value("process_error", "none");
      if (pe == "none") c.process_error = ProcessErrorStructure::None;
      else if (pe == "fixed") c.process_error = ProcessErrorStructure::FixedSeasonal;
      else if (pe == "hierarchical") c.process_error = ProcessErrorStructure::Hierarchical;
      else throw ConfigError("unknown process_error '" + pe + "'");
      std::string b = j.value("bias", "fixed");
      if (b == "fixed") c.bias = BiasStructure::FixedSeasonal;
      else if (b == "hierarchical") c.bias = BiasStructure::Hierarchical;
      else throw ConfigError("unknown bias '" + b + "'");
      c.constrained_flow_bias = j.value("constrained_flow_bias", false);
      c.id = j.value("id", structural_id(c));
    } else {
      ModelConfig from_id = config_from_id(j.at("id").get<std::string>(), c.span, c.lakes);
      from_id.span = c.span;
      from_id.lakes = c.lakes;
      c = from_id;
    }
    if (j.contains("monitored")) c.monitored = j.at("monitored").get<std::vector<std::string>>();
    if (j.contains("hyperpriors")) {
      const auto& h = j.at("hyperpriors");
      auto gamma = [&](const char* key, GammaHyper& out) {
        if (h.contains(key)) out = GammaHyper{h.at(key).at(0).get<double>(), h.at(key).at(1).get<double>()};
      };
      gamma("delta_h_precision", c.hyper.delta_h_precision);
      gamma("observation_precision", c.hyper.observation_precision);
      gamma("seasonal_precision", c.hyper.seasonal_precision);
      c.hyper.seasonal_mean_precision = h.value("seasonal_mean_precision", c.hyper.seasonal_mean_precision);
      c.hyper.constrained_bias_precision =
          h.value("constrained_bias_precision", c.hyper.constrained_bias_precision);
    }
    c.validate();
    return c;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed model config: ") + e.what());
  }
}

}  // namespace l2swbm
