#include <doctest.h>

#include <cmath>
#include <random>

#include "l2swbm/errors.hpp"
#include "l2swbm/priors.hpp"
#include "support.hpp"

using namespace l2swbm;

TEST_CASE("normal fit uses the unbiased variance and the precision scale") {
  const std::vector<double> h{10, 20, 30};
  auto p = fit_normal(h, 1.0);
  CHECK(p.mean == doctest::Approx(20.0));
  CHECK(p.precision == doctest::Approx(0.01));
  p = fit_normal(h, 0.5);
  CHECK(p.precision == doctest::Approx(0.005));
  CHECK_THROWS_AS(fit_normal(std::vector<double>{5, 5, 5}, 1.0), DegenerateHistoryError);
  CHECK_THROWS_AS(fit_normal(std::vector<double>{5}, 1.0), DegenerateHistoryError);
}

TEST_CASE("normal precision is linear in the scale") {
  const std::vector<double> h{3.5, -1.0, 7.25, 2.0, 11.0};
  const double base = fit_normal(h, 1.0).precision;
  for (double s : {0.1, 0.5, 2.0, 3.7}) CHECK(fit_normal(h, s).precision == doctest::Approx(s * base).epsilon(1e-14));
}

TEST_CASE("Thom estimator on a three-point history") {
  const auto g = fit_gamma_thom(std::vector<double>{1, 2, 3});
  // phi = ln 2 - ln(6)/3 = 0.0959...
  CHECK(g.shape == doctest::Approx(5.376).epsilon(0.01 / 5.376));
  CHECK(g.rate == doctest::Approx(2.688).epsilon(0.005 / 2.688));
  CHECK_THROWS_AS(fit_gamma_thom(std::vector<double>{4, 4, 4}), DegenerateHistoryError);
  CHECK_THROWS_AS(fit_gamma_thom(std::vector<double>{4, 0, 4}), DomainError);
}

TEST_CASE("Thom prior mean equals the sample mean") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.5, 200.0);
  std::uniform_int_distribution<int> len(2, 80);
  for (int rep = 0; rep < 1000; ++rep) {
    std::vector<double> h(static_cast<std::size_t>(len(rng)));
    for (auto& x : h) x = u(rng);
    double mean = 0.0;
    for (double x : h) mean += x;
    mean /= static_cast<double>(h.size());
    const auto g = fit_gamma_thom(h);
    CHECK(std::abs(g.shape / g.rate - mean) <= 1e-9 * mean);
  }
}

TEST_CASE("Thom estimator recovers the shape of a large gamma sample") {
  std::mt19937_64 rng(5);
  std::gamma_distribution<double> g(3.0, 1.0 / 0.04);
  std::vector<double> h(20000);
  for (auto& x : h) x = g(rng);
  CHECK(fit_gamma_thom(h).shape == doctest::Approx(3.0).epsilon(0.05));
}

TEST_CASE("log-normal fit on logarithms") {
  const double e = std::exp(1.0);
  const auto p = fit_lognormal(std::vector<double>{e, e, e * e * e, e * e * e});
  CHECK(p.log_mean == doctest::Approx(2.0));
  CHECK(p.log_precision == doctest::Approx(0.75));
  CHECK_THROWS_AS(fit_lognormal(std::vector<double>{2, -1}), DomainError);
  CHECK_THROWS_AS(fit_lognormal(std::vector<double>{7, 7}), DegenerateHistoryError);
}

TEST_CASE("fit_all produces twelve cells per lake and component") {
  const auto& spec = test::fixture_priors();
  CHECK(spec.size() == 120);
  CHECK_NOTHROW(spec.validate());
  for (const auto& lake : {"SUP", "MHU"}) {
    for (int m = 1; m <= 12; ++m) {
      CHECK(family_of(spec.at(lake, Component::P, m)) == PriorFamily::Gamma);
      CHECK(family_of(spec.at(lake, Component::R, m)) == PriorFamily::LogNormal);
      CHECK(family_of(spec.at(lake, Component::E, m)) == PriorFamily::Normal);
      CHECK(family_of(spec.at(lake, Component::Q, m)) == PriorFamily::Normal);
      CHECK(family_of(spec.at(lake, Component::D, m)) == PriorFamily::Normal);
    }
  }
}

TEST_CASE("default rules halve E and Q precision only") {
  ComponentSeries e;
  e.lake = "SUP";
  e.component = Component::E;
  e.start = {1950, 1};
  // January values 0 and 10 (variance 50); other months vary too.
  for (int y = 0; y < 2; ++y) {
    for (int m = 1; m <= 12; ++m) e.values.push_back(m == 1 ? (y == 0 ? 0.0 : 10.0) : m + 3.0 * y);
  }
  ComponentSeries d = e;
  d.component = Component::D;
  std::vector<std::string> warnings;
  const auto spec = fit_all({e, d}, FitRules{}, &warnings);
  CHECK(std::get<NormalPrior>(spec.at("SUP", Component::E, 1)).precision == doctest::Approx(0.01));
  CHECK(std::get<NormalPrior>(spec.at("SUP", Component::D, 1)).precision == doctest::Approx(0.02));
  CHECK(warnings.size() == 24);  // two points per month
}

TEST_CASE("fit errors carry lake, component and month") {
  ComponentSeries p;
  p.lake = "MHU";
  p.component = Component::P;
  p.start = {1950, 1};
  for (int y = 0; y < 3; ++y) {
    for (int m = 1; m <= 12; ++m) p.values.push_back(m == 7 ? 50.0 : 40.0 + m + y);
  }
  try {
    fit_all({p}, FitRules{});
    FAIL("expected a fit error");
  } catch (const PriorFitError& e) {
    CHECK(e.lake() == "MHU");
    CHECK(e.component() == Component::P);
    CHECK(e.month() == 7);
  }
}

TEST_CASE("prior spec JSON round-trips") {
  const auto& spec = test::fixture_priors();
  const auto back = PriorSpec::from_json(spec.to_json());
  CHECK(back == spec);
  CHECK(back.to_json() == spec.to_json());
  CHECK_THROWS_AS(PriorSpec::from_json("{\"schema_version\": 99}"), ConfigError);
}
