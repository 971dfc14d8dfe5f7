#include "l2swbm/synthetic.hpp"

#include <array>
#include <cmath>
#include <random>

#include "l2swbm/manifest.hpp"
#include "l2swbm/sampler.hpp"

namespace l2swbm {

namespace {

using Cycle = std::array<double, 12>;

struct LakeClimate {
  std::string name;
  Cycle p, e, r, q;
  double d_mean, d_sd;
  double p_shape;       // month-to-month gamma shape of precipitation
  double e_sd, r_logsd, q_sd;
  double level0;        // mm above datum
  double q_feedback;    // outflow response per mm of level anomaly
  // Observation noise SDs by source, and seasonal source biases.
  double sd_p1, sd_p2, sd_e1, sd_e2, sd_r1, sd_r2, sd_q1, sd_q2, sd_d1;
  double bias_p2, bias_e2, bias_r2, bias_q2;
};

const LakeClimate kSuperior{
    "SUP",
    {45, 38, 48, 55, 70, 80, 80, 80, 95, 85, 80, 60},
    {100, 75, 45, 15, 0, -5, 0, 15, 50, 80, 90, 105},
    {25, 22, 35, 100, 95, 55, 40, 35, 45, 55, 50, 30},
    {65, 62, 62, 68, 78, 80, 80, 78, 76, 74, 72, 69},
    4.9, 0.8,
    8.0, 12.0, 0.25, 5.0,
    183400.0, 0.03,
    9.9, 10.0, 9.5, 4.7, 1.85, 14.6, 0.5, 2.76, 0.78,
    4.0, -6.0, 8.0, 1.5};

const LakeClimate kMichiganHuron{
    "MHU",
    {50, 43, 55, 65, 75, 80, 75, 78, 85, 80, 80, 62},
    {90, 60, 30, 5, -5, -5, 5, 25, 60, 90, 110, 135},
    {45, 50, 95, 125, 80, 55, 40, 35, 35, 45, 55, 50},
    {120, 115, 122, 128, 132, 133, 133, 132, 130, 128, 125, 122},
    -2.05, 0.3,
    8.0, 12.0, 0.25, 6.0,
    176400.0, 0.03,
    8.8, 10.6, 10.1, 3.2, 0.67, 13.6, 0.47, 1.41, 0.18,
    -3.0, 5.0, -6.0, -1.0};

double round2(double v) { return std::round(v * 100.0) / 100.0; }

ComponentSeries make_series(const std::string& lake, Component c, int source, YearMonth start) {
  ComponentSeries s;
  s.lake = lake;
  s.component = c;
  s.source = source;
  s.start = start;
  return s;
}

}  // namespace

SyntheticData generate_synthetic(const SyntheticOptions& o) {
  const std::array<const LakeClimate*, 2> lakes{&kSuperior, &kMichiganHuron};
  const int T = o.months;
  Rng rng = make_rng(o.seed, 0, 7);

  SyntheticData out;
  std::vector<double> q_upstream(static_cast<std::size_t>(T), 0.0);

  // One regional discrepancy path drives both lakes.
  std::vector<double> discrepancy(static_cast<std::size_t>(T));
  {
    const double innovation = o.discrepancy_sd * std::sqrt(1.0 - o.discrepancy_phi * o.discrepancy_phi);
    double u = draw_normal(rng, 0.0, o.discrepancy_sd);
    for (auto& x : discrepancy) {
      u = o.discrepancy_phi * u + draw_normal(rng, 0.0, innovation);
      x = u;
    }
  }

  for (std::size_t li = 0; li < lakes.size(); ++li) {
    const LakeClimate& L = *lakes[li];
    auto tP = make_series(L.name, Component::P, 0, o.start);
    auto tE = make_series(L.name, Component::E, 0, o.start);
    auto tR = make_series(L.name, Component::R, 0, o.start);
    auto tI = make_series(L.name, Component::I, 0, o.start);
    auto tQ = make_series(L.name, Component::Q, 0, o.start);
    auto tD = make_series(L.name, Component::D, 0, o.start);
    auto tH = make_series(L.name, Component::H, 0, o.start);

    double level = L.level0;
    double q_anom = 0.0;
    tH.values.push_back(level);
    std::vector<double> q_this(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) {
      const int m = o.start.plus(t).month - 1;
      const double p = draw_gamma(rng, L.p_shape, L.p_shape / L.p[static_cast<std::size_t>(m)]);
      const double e = draw_normal(rng, L.e[static_cast<std::size_t>(m)], L.e_sd);
      const double r = L.r[static_cast<std::size_t>(m)] * std::exp(draw_normal(rng, -0.5 * L.r_logsd * L.r_logsd, L.r_logsd));
      q_anom = 0.8 * q_anom + draw_normal(rng, 0.0, L.q_sd * 0.6);
      const double q = L.q[static_cast<std::size_t>(m)] + q_anom + L.q_feedback * (level - L.level0);
      const double d = draw_normal(rng, L.d_mean, L.d_sd);
      const double inflow = li == 0 ? 0.0 : 0.7 * q_upstream[static_cast<std::size_t>(t)];
      level += p - e + r + inflow - q + d + discrepancy[static_cast<std::size_t>(t)];
      q_this[static_cast<std::size_t>(t)] = q;
      tP.values.push_back(p);
      tE.values.push_back(e);
      tR.values.push_back(r);
      tI.values.push_back(inflow);
      tQ.values.push_back(q);
      tD.values.push_back(d);
      tH.values.push_back(level);
    }
    q_upstream = q_this;

    auto observe = [&](const ComponentSeries& truth, int source, double sd, double bias, YearMonth from,
                       bool positive) {
      auto s = make_series(L.name, truth.component, source, from);
      const int offset = o.start.months_until(from);
      for (int t = offset; t < T; ++t) {
        const int m = o.start.plus(t).month;
        // Seasonal bias peaks mid-year.
        const double b = bias * (1.0 + 0.5 * std::sin(2.0 * M_PI * (m - 4) / 12.0));
        double v = *truth.values[static_cast<std::size_t>(t)] + b + draw_normal(rng, 0.0, sd);
        if (positive && v < 0.1) v = 0.1;
        s.values.push_back(v);
      }
      return s;
    };

    auto p1 = observe(tP, 1, L.sd_p1, 0.0, o.start, true);
    if (li == 0 && o.sup_p1_mean > 0.0) {
      double sum = 0.0;
      for (const auto& v : p1.values) sum += *v;
      const double scale = o.sup_p1_mean / (sum / static_cast<double>(p1.values.size()));
      for (auto& v : p1.values) v = *v * scale;
    }
    const std::vector<ComponentSeries> obs{
        p1,
        observe(tP, 2, L.sd_p2, L.bias_p2, o.second_sources, true),
        observe(tE, 1, L.sd_e1, 0.0, o.start, false),
        observe(tE, 2, L.sd_e2, L.bias_e2, o.second_sources, false),
        observe(tR, 1, L.sd_r1, 0.0, o.start, true),
        observe(tR, 2, L.sd_r2, L.bias_r2, o.start, true),
        observe(tQ, 1, L.sd_q1, 0.0, o.start, false),
        observe(tQ, 2, L.sd_q2, L.bias_q2, o.gauge_start, false),
        observe(tD, 1, L.sd_d1, 0.0, o.start, false),
    };
    for (auto s : obs) {
      for (auto& v : s.values) v = round2(*v);
      out.observed.push_back(std::move(s));
    }
    auto h1 = make_series(L.name, Component::H, 1, o.start);
    for (const auto& v : tH.values) h1.values.push_back(round2(*v + draw_normal(rng, 0.0, o.level_noise)));
    out.observed.push_back(std::move(h1));
    for (auto* s : {&tP, &tE, &tR, &tI, &tQ, &tD, &tH}) out.truth.push_back(std::move(*s));
  }
  return out;
}

void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir, std::uint64_t seed) {
  std::filesystem::create_directories(dir);
  RunManifest m;
  m.base_dir = dir;
  m.seed = seed;
  m.sampler.seed = seed;
  for (const auto& s : data.observed) {
    const std::string file = s.lake + "_" + component_char(s.component) + std::to_string(s.source) + ".csv";
    write_series_csv(dir / file, s);
    m.series.push_back(SeriesDeclaration{s.lake, s.component, s.source, "mm", file});
  }
  save_manifest(m, dir / "manifest.json");
}

}  // namespace l2swbm
