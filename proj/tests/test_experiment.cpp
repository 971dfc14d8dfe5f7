#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "l2swbm/errors.hpp"
#include "l2swbm/experiment.hpp"
#include "l2swbm/model_config.hpp"
#include "support.hpp"

using namespace l2swbm;

namespace {

const AnalysisSpan kSpan{{2005, 1}, 36};

SamplerSettings quick() {
  SamplerSettings s;
  s.iterations = 400;
  s.burn_in = 200;
  s.chains = 2;
  s.retained_per_chain = 50;
  s.checkpoint_interval = 400;
  s.threads = 1;
  s.seed = 11;
  return s;
}

ExperimentReport small_report(const std::vector<std::string>& ids) {
  static const AlignedTable table = test::fixture_table(kSpan);
  nlohmann::json j{{"models", ids}};
  DesignMatrix d = design_from_json(j, kSpan, {{"SUP", 0.7}, {"MHU", 0.7}}, quick());
  ExperimentResources res;
  res.data = &table;
  res.priors = &test::fixture_priors();
  res.closure_windows = {1, 12};
  res.dic_draws = 100;
  return run_design(d, res);
}

std::string slurp(const std::filesystem::path& p) {
  std::ifstream in(p);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

}  // namespace

TEST_CASE("model ids map to structural fields and back") {
  const auto f = config_from_id("f12FF", kSpan);
  CHECK(f.window == Window::rolling(12));
  CHECK(f.process_error == ProcessErrorStructure::FixedSeasonal);
  CHECK(f.bias == BiasStructure::FixedSeasonal);
  CHECK(f.constrained_flow_bias);
  const auto n = config_from_id("01NH", kSpan);
  CHECK(n.window == Window::rolling(1));
  CHECK(n.process_error == ProcessErrorStructure::None);
  CHECK(n.bias == BiasStructure::Hierarchical);
  CHECK_FALSE(n.constrained_flow_bias);
  const auto p = config_from_id("PROT", kSpan);
  CHECK(p.window.cumulative);
  CHECK(p.process_error == ProcessErrorStructure::None);
  for (const std::string id : {"PROT", "fPROT", "01HH", "12NF", "f01FH", "CHF", "24NH"}) {
    CHECK(structural_id(config_from_id(id, kSpan)) == id);
  }
  for (const std::string bad : {"", "13XF", "12F", "g12FF", "PROTX", "00NF", "12FFF"}) {
    CAPTURE(bad);
    CHECK_THROWS_AS(config_from_id(bad, kSpan), ConfigError);
  }
}

TEST_CASE("canonical design has the 26 models") {
  const auto d = canonical_design(kSpan);
  REQUIRE(d.models.size() == 26);
  std::set<std::string> ids;
  for (const auto& m : d.models) ids.insert(m.id);
  CHECK(ids.size() == 26);
  for (const std::string id : {"PROT", "fPROT", "01NF", "01HH", "12NF", "12HH", "f01NF", "f12HH"}) {
    CHECK(ids.count(id) == 1);
  }
  CHECK(d.models.front().id == "PROT");
  int constrained = 0;
  for (const auto& m : d.models) constrained += m.constrained_flow_bias;
  CHECK(constrained == 13);
  CHECK_NOTHROW(d.validate());
}

TEST_CASE("model configuration JSON round-trips") {
  ModelConfig c = config_from_id("f12HF", kSpan);
  c.monitored = {"Q[*", "tau_dH[*"};
  c.hyper.delta_h_precision = {2.0, 3.0};
  const auto back = model_config_from_json(to_json(c), {{2010, 1}, 12}, {});
  CHECK(back == c);
}

TEST_CASE("design JSON accepts ids, objects and sampler overrides") {
  const auto j = nlohmann::json::parse(R"({
    "models": ["01NF", {"window": 12, "process_error": "fixed", "bias": "hierarchical"}],
    "sampler": {"iterations": 6000, "chains": 2},
    "comparisons": [["01NF", "12FH"]]
  })");
  const auto d = design_from_json(j, kSpan, {{"SUP", 0.7}, {"MHU", 0.7}});
  REQUIRE(d.models.size() == 2);
  CHECK(d.models[1].id == "12FH");
  CHECK(d.models[1].window == Window::rolling(12));
  CHECK(d.models[1].bias == BiasStructure::Hierarchical);
  CHECK(d.settings.iterations == 6000);
  CHECK(d.settings.burn_in == 3000);
  CHECK(d.settings.chains == 2);
  const auto back = design_from_json(to_json(d), kSpan, {});
  CHECK(back.models == d.models);
  CHECK(back.comparisons == d.comparisons);

  CHECK_THROWS_AS(design_from_json(nlohmann::json{{"models", {"01NF", "01NF"}}}, kSpan, {}), ConfigError);
  CHECK_THROWS_AS(design_from_json(nlohmann::json{{"models", {"01NF"}}, {"comparisons", {{"01NF", "PROT"}}}}, kSpan, {}),
                  ConfigError);
  CHECK_THROWS_AS(design_from_json(nlohmann::json{{"models", {"zz"}}}, kSpan, {}), ConfigError);
  // Labels must describe the structure they name.
  CHECK_THROWS_AS(design_from_json(nlohmann::json::parse(R"({"models": [{"id": "12FF", "window": 1}]})"), kSpan, {}),
                  ConfigError);
}

TEST_CASE("experiment report round-trips and compares") {
  const auto r = small_report({"01NF", "12FF", "f12FF"});
  REQUIRE(r.models.size() == 3);
  for (const auto& m : r.models) {
    CAPTURE(m.id);
    CHECK_FALSE(m.failed);
    REQUIRE(m.closure.has_value());
    CHECK(m.closure->find("SUP", 12)->denominator == 25);
    CHECK(m.find("Q[SUP,3]") != nullptr);
    CHECK(m.find("tau_dH[MHU]") != nullptr);
    CHECK(std::isfinite(m.dic.dic));
  }

  const auto back = report_from_json(to_json(r));
  CHECK(to_json(back) == to_json(r));
  CHECK(to_json(r).dump().find("seconds") == std::string::npos);

  const auto self = compare(r, "12FF", "12FF");
  CHECK(self.size() == 72);
  for (const auto& row : self) CHECK(row.sd_ratio == 1.0);
  const auto rows = compare(r, "12FF", "f12FF", {"Q[SUP,1]", "P[MHU,4]"});
  REQUIRE(rows.size() == 2);
  CHECK(rows[0].sd_ratio == doctest::Approx(rows[0].candidate.sd / rows[0].baseline.sd));
  CHECK_THROWS_AS(compare(r, "12FF", "PROT"), ComparisonError);
  CHECK_THROWS_AS(compare(r, "12FF", "f12FF", {"Q[SUP,99]"}), ComparisonError);

  const auto dir = test::scratch_dir("report");
  write_report(r, dir);
  for (const auto* f : {"models.csv", "closure.csv", "dic.csv", "convergence.csv", "timing.csv", "timing.json",
                        "report.json", "models/12FF/flows.csv", "models/12FF/psrf_trajectory.csv",
                        "models/12FF/closure_bands.csv"}) {
    CAPTURE(f);
    CHECK(std::filesystem::exists(dir / f));
  }
  CHECK(slurp(dir / "closure.csv").rfind(provenance_line("design", r.seed), 0) == 0);
  const auto loaded = read_report(dir);
  CHECK(to_json(loaded) == to_json(r));
  CHECK(loaded.models[0].seconds == doctest::Approx(r.models[0].seconds).epsilon(1e-6));
}

TEST_CASE("models are evaluated in isolation") {
  const auto both = small_report({"01NF", "12FF"});
  const auto alone = small_report({"12FF"});
  CHECK(to_json(both).at("models").at(1) == to_json(alone).at("models").at(0));
}

TEST_CASE("a failing model is recorded without stopping the design") {
  const AlignedTable table = test::fixture_table(kSpan);
  nlohmann::json j{{"models", {"01NF", "12FF"}}};
  SamplerSettings s = quick();
  s.slice_width = 1e-6;
  s.slice_max_steps = 2;
  DesignMatrix d = design_from_json(j, kSpan, {{"SUP", 0.7}, {"MHU", 0.7}}, s);
  ExperimentResources res;
  res.data = &table;
  res.priors = &test::fixture_priors();
  const auto r = run_design(d, res);
  REQUIRE(r.models.size() == 2);
  for (const auto& m : r.models) {
    CHECK(m.failed);
    CHECK_FALSE(m.reason.empty());
  }
}
