#include <doctest.h>

#include <cmath>
#include <map>
#include <set>

#include "l2swbm/errors.hpp"
#include "l2swbm/experiment.hpp"
#include "l2swbm/model.hpp"
#include "l2swbm/network.hpp"
#include "l2swbm/sampler.hpp"
#include "support.hpp"

using namespace l2swbm;

namespace {

const AnalysisSpan kSpan{{2005, 1}, 120};

Network fixture_network(const std::string& id, AnalysisSpan span = kSpan) {
  return build_network(config_from_id(id, span, {{"SUP", 0.7}, {"MHU", 0.7}}), test::fixture_priors(),
                       test::fixture_table(span));
}

Network tiny_network(const std::string& id) {
  const AnalysisSpan span{{2005, 1}, 2};
  return build_network(config_from_id(id, span, {{"SUP", 0.7}}), test::fixture_priors(), test::one_lake_table(span));
}

}  // namespace

TEST_CASE("two-node log joint is hand-evaluable") {
  NetworkBuilder b;
  const NodeIndex x = b.add_normal(generic_id("x"), Affine{0.0, {}}, PrecisionRef{1.0, kNoNode});
  b.add_observed(generic_id("y"), Affine{0.0, {{x, 1.0}}}, PrecisionRef{1.0, kNoNode}, 0.0);
  const Network net = std::move(b).finish();
  LatentState s = net.blank_state();
  CHECK(net.log_joint(s) == doctest::Approx(-1.83788).epsilon(1e-5));
  const auto fc = std::get<NormalConditional>(net.full_conditional(x, s));
  CHECK(fc.mean == doctest::Approx(0.0));
  CHECK(fc.precision == doctest::Approx(2.0));
}

TEST_CASE("conjugate normal update of the textbook toy") {
  NetworkBuilder b;
  const NodeIndex x = b.add_normal(generic_id("x"), Affine{0.0, {}}, PrecisionRef{1.0, kNoNode});
  b.add_observed(generic_id("y"), Affine{0.0, {{x, 1.0}}}, PrecisionRef{1.0, kNoNode}, 2.0);
  const Network net = std::move(b).finish();
  const auto fc = std::get<NormalConditional>(net.full_conditional(x, net.blank_state()));
  CHECK(fc.mean == doctest::Approx(1.0));
  CHECK(fc.precision == doctest::Approx(2.0));
}

TEST_CASE("gamma precision update adds half-counts and half squared residuals") {
  NetworkBuilder b;
  const NodeIndex tau = b.add_gamma(generic_id("tau"), 0.1, 0.1);
  const NodeIndex mu = b.add_normal(generic_id("mu"), Affine{0.0, {}}, PrecisionRef{1.0, kNoNode});
  const std::vector<double> ys{1.0, -2.0, 0.5, 4.0};
  for (std::size_t k = 0; k < ys.size(); ++k) {
    b.add_observed(generic_id("y" + std::to_string(k)), Affine{0.0, {{mu, 1.0}}}, PrecisionRef{1.0, tau}, ys[k]);
  }
  const Network net = std::move(b).finish();
  LatentState s = net.blank_state();
  net.set_value(tau, 2.0, s);
  net.set_value(mu, 0.25, s);
  const auto g = std::get<GammaConditional>(net.full_conditional(tau, s));
  double ss = 0.0;
  for (double y : ys) ss += (y - 0.25) * (y - 0.25);
  CHECK(g.shape == doctest::Approx(0.1 + 2.0));
  CHECK(g.rate == doctest::Approx(0.1 + ss / 2.0));
}

TEST_CASE("support violations give negative infinity") {
  const Network net = fixture_network("12FF");
  LatentState s = init_state(net, 0, 1);
  CHECK(std::isfinite(net.log_joint(s)));
  s.value[static_cast<std::size_t>(net.at("P[SUP,5]"))] = -1.0;
  CHECK(net.log_joint(s) == -INFINITY);
  s = init_state(net, 0, 1);
  s.value[static_cast<std::size_t>(net.at("tau_dH[MHU]"))] = 0.0;
  CHECK(net.log_joint(s) == -INFINITY);
}

TEST_CASE("builder rejects dangling and observed parents and unusable precisions") {
  NetworkBuilder b;
  const NodeIndex x = b.add_normal(generic_id("x"), Affine{0.0, {}}, PrecisionRef{1.0, kNoNode});
  const NodeIndex y = b.add_observed(generic_id("y"), Affine{0.0, {{x, 1.0}}}, PrecisionRef{1.0, kNoNode}, 1.0);
  CHECK_THROWS_AS(b.add_normal(generic_id("z"), Affine{0.0, {{99, 1.0}}}, PrecisionRef{1.0, kNoNode}), BuildError);
  CHECK_THROWS_AS(b.add_normal(generic_id("z"), Affine{0.0, {{y, 1.0}}}, PrecisionRef{1.0, kNoNode}), BuildError);
  CHECK_THROWS_AS(b.add_normal(generic_id("z"), Affine{0.0, {}}, PrecisionRef{1.0, x}), BuildError);
  CHECK_THROWS_AS(b.add_normal(generic_id("x"), Affine{0.0, {}}, PrecisionRef{1.0, kNoNode}), BuildError);
}

TEST_CASE("a lognormal node used as a precision cannot be scheduled") {
  NetworkBuilder b;
  const NodeIndex g = b.add_gamma(generic_id("g"), 1.0, 1.0);
  const NodeIndex mu = b.add_normal(generic_id("mu"), Affine{0.0, {{g, 1.0}}}, PrecisionRef{1.0, g});
  b.add_observed(generic_id("y"), Affine{0.0, {{mu, 1.0}}}, PrecisionRef{1.0, kNoNode}, 1.0);
  // g is both a precision and inside a mean: no exact kernel exists.
  CHECK_THROWS_AS(std::move(b).finish(), ScheduleError);
}

TEST_CASE("every canonical configuration builds with the closed-form node counts") {
  const auto table = test::fixture_table(kSpan);
  for (const auto& cfg : canonical_design(kSpan).models) {
    CAPTURE(cfg.id);
    const Network net = build_network(cfg, test::fixture_priors(), table);
    CHECK(net.counts() == expected_counts(cfg, table));
    std::multiset<NodeIndex> planned;
    for (const auto& e : net.update_plan()) planned.insert(e.node);
    std::size_t stochastic = 0;
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (net.node(static_cast<NodeIndex>(i)).kind != NodeKind::Stochastic) continue;
      ++stochastic;
      CHECK(planned.count(static_cast<NodeIndex>(i)) == 1);
    }
    CHECK(planned.size() == stochastic);
    for (int chain = 0; chain < 3; ++chain) CHECK(std::isfinite(net.log_joint(init_state(net, chain, 3))));
  }
}

TEST_CASE("one-month fixed-bias model has 1200 component nodes") {
  const Network net = fixture_network("01NF");
  int theta = 0;
  for (const auto& n : net.nodes()) theta += n.id.symbol == Symbol::Theta;
  CHECK(theta == 1200);
}

TEST_CASE("constrained flow bias changes only channel-flow and diversion bias priors") {
  for (const auto& [plain, constrained] : std::vector<std::pair<std::string, std::string>>{
           {"12FF", "f12FF"}, {"01HH", "f01HH"}, {"PROT", "fPROT"}}) {
    CAPTURE(plain);
    const Network a = fixture_network(plain);
    const Network b = fixture_network(constrained);
    REQUIRE(a.counts() == b.counts());
    REQUIRE(a.size() == b.size());
    int changed = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
      const Node& x = a.node(static_cast<NodeIndex>(i));
      const Node& y = b.node(static_cast<NodeIndex>(i));
      REQUIRE(x.name == y.name);
      CHECK(x.kind == y.kind);
      CHECK(x.family == y.family);
      CHECK(x.p1 == y.p1);
      CHECK(x.p2 == y.p2);
      CHECK(x.datum == y.datum);
      CHECK(x.mean.constant == y.mean.constant);
      CHECK(x.mean.terms.size() == y.mean.terms.size());
      CHECK(x.precision.node == y.precision.node);
      const bool flow_bias = x.id.symbol == Symbol::EtaC &&
                             (x.id.component == Component::Q || x.id.component == Component::D);
      if (flow_bias) {
        CHECK(x.precision.constant == 0.01);
        CHECK(y.precision.constant == 0.25);
        ++changed;
      } else {
        CHECK(x.precision.constant == y.precision.constant);
      }
    }
    CHECK(changed > 0);
  }
  const Network f = fixture_network("f12FF");
  CHECK(f.node(f.at("eta_c[SUP,P,1,3]")).precision.constant == 0.01);
  CHECK(f.node(f.at("eta_c[SUP,Q,1,3]")).precision.constant == 0.25);
  CHECK(f.node(f.at("eta_c[MHU,D,1,3]")).precision.constant == 0.25);
}

TEST_CASE("prototype storage change accumulates every month with no process error") {
  const Network net = fixture_network("PROT");
  for (const auto& n : net.nodes()) {
    CHECK(n.id.symbol != Symbol::Eps);
    CHECK(n.id.symbol != Symbol::EpsC);
  }
  Rng rng = make_rng(2, 0, 3);
  LatentState s = init_state(net, 1, 2);
  for (int k = 0; k < 3; ++k) gibbs_step(net, s, rng);
  double run = 0.0;
  for (int t = 1; t <= 120; ++t) {
    run += s.value[static_cast<std::size_t>(net.at("b[SUP," + std::to_string(t) + "]"))];
    CHECK(s.value[static_cast<std::size_t>(net.at("dH[SUP," + std::to_string(t) + "]"))] ==
          doctest::Approx(run).epsilon(1e-12));
  }
}

TEST_CASE("rolling storage change is the windowed balance sum") {
  for (const std::string id : {"12FF", "12HF", "01NF"}) {
    CAPTURE(id);
    const Network net = fixture_network(id);
    const int w = config_from_id(id, kSpan).window.width;
    Rng rng = make_rng(4, 0, 3);
    LatentState s = init_state(net, 2, 4);
    for (int k = 0; k < 3; ++k) gibbs_step(net, s, rng);
    auto val = [&](const std::string& name) { return s.value[static_cast<std::size_t>(net.at(name))]; };
    for (const std::string lake : {"SUP", "MHU"}) {
      std::vector<double> bal(121);
      for (int t = 1; t <= 120; ++t) {
        const std::string k = lake + "," + std::to_string(t);
        double e = 0.0;
        if (id[2] == 'F') e = val("eps_c[" + lake + "," + std::to_string(calendar_month(kSpan.start, t)) + "]");
        if (id[2] == 'H') e = val("eps[" + k + "]");
        bal[static_cast<std::size_t>(t)] = val("P[" + k + "]") - val("E[" + k + "]") + val("R[" + k + "]") +
                                           val("I[" + k + "]") - val("Q[" + k + "]") + val("D[" + k + "]") + e;
      }
      for (int j = 1; j <= 120 - w + 1; ++j) {
        double sum = 0.0;
        for (int i = j; i < j + w; ++i) sum += bal[static_cast<std::size_t>(i)];
        CHECK(std::abs(val("dH[" + lake + "," + std::to_string(j) + "]") - sum) < 1e-9);
      }
    }
  }
}

TEST_CASE("inflow is the scaled upstream outflow, exactly") {
  const Network net = fixture_network("f12HH");
  Rng rng = make_rng(8, 0, 3);
  LatentState s = init_state(net, 1, 8);
  for (int k = 0; k < 5; ++k) {
    gibbs_step(net, s, rng);
    for (int t = 1; t <= 120; ++t) {
      const std::string ts = std::to_string(t);
      CHECK(s.value[static_cast<std::size_t>(net.at("I[SUP," + ts + "]"))] == 0.0);
      CHECK(s.value[static_cast<std::size_t>(net.at("I[MHU," + ts + "]"))] ==
            0.7 * s.value[static_cast<std::size_t>(net.at("Q[SUP," + ts + "]"))]);
    }
  }
}

TEST_CASE("incremental factor means agree with a full refresh") {
  const Network net = fixture_network("12HH");
  LatentState s = init_state(net, 0, 6);
  Rng rng = make_rng(6, 0, 3);
  std::vector<NodeIndex> stoch;
  for (const auto& e : net.update_plan()) stoch.push_back(e.node);
  for (int k = 0; k < 2000; ++k) {
    const NodeIndex i = stoch[static_cast<std::size_t>(rng() % stoch.size())];
    const double v = s.value[static_cast<std::size_t>(i)];
    net.set_value(i, v > 0 ? v * (0.9 + 0.2 * draw_uniform(rng)) : v + draw_normal(rng, 0.0, 1.0), s);
  }
  LatentState r = s;
  net.refresh(r);
  for (std::size_t f = 0; f < s.factor_mean.size(); ++f) {
    CHECK(std::abs(s.factor_mean[f] - r.factor_mean[f]) < 1e-8 * (1.0 + std::abs(r.factor_mean[f])));
  }
}

TEST_CASE("every full-conditional class matches a grid evaluation of the joint") {
  std::map<std::string, int> classes;
  for (const std::string id : {"01HH", "01FF", "02FH", "PROT", "f01HF"}) {
    CAPTURE(id);
    const Network net = tiny_network(id);
    LatentState s = init_state(net, 1, 9);
    Rng rng = make_rng(9, 0, 3);
    for (int k = 0; k < 30; ++k) gibbs_step(net, s, rng);
    for (const auto& e : net.update_plan()) {
      const Node& n = net.node(e.node);
      CAPTURE(n.name);
      const double kl = test::grid_kl(net, e.node, s);
      CHECK(kl < 1e-6);
      std::string cls;
      switch (n.id.symbol) {
        case Symbol::Theta:
          cls = n.id.component == Component::P ? "slice-P" : n.id.component == Component::R ? "slice-R" : "normal";
          break;
        case Symbol::EpsC:
        case Symbol::Eps: cls = "eps"; break;
        case Symbol::EtaC:
        case Symbol::Eta: cls = "eta"; break;
        default: cls = "gamma";
      }
      ++classes[cls];
    }
  }
  for (const auto* c : {"normal", "gamma", "slice-P", "slice-R", "eps", "eta"}) CHECK(classes[c] > 0);
}

TEST_CASE("node selection by pattern") {
  const Network net = fixture_network("12FF");
  CHECK(net.select({"Q[SUP,*]"}).size() == 120);
  CHECK(net.select({"I[*"}).size() == 240);
  CHECK(net.select({"tau_dH[?UP]"}).size() == 1);
  CHECK(glob_match("eta_c[*,Q,*", "eta_c[SUP,Q,1,4]"));
  CHECK_FALSE(glob_match("eta_c[*,Q,*", "eta_c[SUP,P,1,4]"));
}

TEST_CASE("span mismatch and missing prior cells are build errors") {
  const auto cfg = config_from_id("12FF", {{2005, 1}, 60});
  CHECK_THROWS_AS(build_network(cfg, test::fixture_priors(), test::fixture_table(kSpan)), BuildError);
  PriorSpec partial;
  for (int m = 1; m <= 11; ++m) partial.set("SUP", Component::P, m, GammaPrior{2.0, 0.03});
  try {
    build_network(config_from_id("12FF", kSpan), partial, test::fixture_table(kSpan));
    FAIL("expected a build error");
  } catch (const BuildError& e) {
    CHECK(std::string(e.what()).find("month") != std::string::npos);
  }
}

TEST_CASE("DOT export names every node") {
  const Network net = tiny_network("01FF");
  const std::string dot = net.to_dot();
  CHECK(dot.rfind("digraph", 0) == 0);
  CHECK(dot.find("\"P[SUP,1]\"") != std::string::npos);
  CHECK(dot.find("\"y_dH[SUP,2]\"") != std::string::npos);
}
