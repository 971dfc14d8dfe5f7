#pragma once

// Shared fixtures for the test binaries.

#include <algorithm>
#include <boost/math/distributions/gamma.hpp>
#include <functional>
#include <cmath>
#include <filesystem>
#include <string>
#include <vector>

#include "l2swbm/ingest.hpp"
#include "l2swbm/manifest.hpp"
#include "l2swbm/model.hpp"
#include "l2swbm/network.hpp"
#include "l2swbm/priors.hpp"
#include "l2swbm/synthetic.hpp"

namespace l2swbm::test {

inline const SyntheticData& fixture() {
  static const SyntheticData data = generate_synthetic();
  return data;
}

inline const PriorSpec& fixture_priors() {
  static const PriorSpec spec = [] {
    std::vector<ComponentSeries> hist;
    for (const auto& s : fixture().observed) {
      if (s.source != 1 || s.component == Component::H) continue;
      hist.push_back(clip(s, YearMonth{1950, 1}, YearMonth{2004, 12}));
    }
    return fit_all(hist, FitRules{});
  }();
  return spec;
}

inline AlignedTable fixture_table(AnalysisSpan span = {{2005, 1}, 120}) { return align(fixture().observed, span); }

inline AlignedTable one_lake_table(AnalysisSpan span) {
  std::vector<ComponentSeries> sup;
  for (const auto& s : fixture().observed) {
    if (s.lake == "SUP") sup.push_back(s);
  }
  return align(sup, span);
}

// Asymptotic Kolmogorov distribution tail with the usual small-sample
// correction of the statistic.
inline double ks_pvalue(double d, std::size_t n) {
  const double sn = std::sqrt(static_cast<double>(n));
  const double lambda = (sn + 0.12 + 0.11 / sn) * d;
  double q = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = std::exp(-2.0 * k * k * lambda * lambda);
    q += (k % 2 == 1 ? 2.0 : -2.0) * term;
    if (term < 1e-16) break;
  }
  return std::clamp(q, 0.0, 1.0);
}

template <typename Cdf>
double ks_statistic(std::vector<double> xs, Cdf cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, f - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - f});
  }
  return d;
}

inline double normal_logpdf(double x, double m, double tau) {
  return 0.5 * std::log(tau) - 0.5 * std::log(2.0 * M_PI) - 0.5 * tau * (x - m) * (x - m);
}

// KL(p || q) where p is the normalised grid of exp(log_joint) over the node
// and q the normalised grid of the claimed full conditional.
inline double grid_kl(const Network& net, NodeIndex i, const LatentState& s) {
  const FullConditional fc = net.full_conditional(i, s);
  double lo = 0.0, hi = 0.0;
  std::function<double(double)> logq;
  if (const auto* n = std::get_if<NormalConditional>(&fc)) {
    const double sd = 1.0 / std::sqrt(n->precision);
    lo = n->mean - 12.0 * sd;
    hi = n->mean + 12.0 * sd;
    logq = [n](double x) { return normal_logpdf(x, n->mean, n->precision); };
  } else if (const auto* g = std::get_if<GammaConditional>(&fc)) {
    boost::math::gamma_distribution<double> d(g->shape, 1.0 / g->rate);
    lo = boost::math::quantile(d, 1e-10);
    hi = boost::math::quantile(boost::math::complement(d, 1e-10));
    logq = [g](double x) { return (g->shape - 1.0) * std::log(x) - g->rate * x; };
  } else {
    const auto sc = std::get<SliceConditional>(fc);
    // Locate the bulk on a coarse geometric scan.
    double best = -INFINITY;
    std::vector<std::pair<double, double>> scan;
    for (double x = 1e-6; x < 1e5; x *= 1.01) {
      scan.emplace_back(x, sc.log_density(x));
      best = std::max(best, scan.back().second);
    }
    lo = INFINITY;
    hi = 0.0;
    for (const auto& [x, l] : scan) {
      if (l > best - 40.0) {
        lo = std::min(lo, x / 1.01);
        hi = std::max(hi, x * 1.01);
      }
    }
    logq = [sc](double x) { return sc.log_density(x); };
  }
  const int N = 2048;
  std::vector<double> lp(N), lq(N);
  LatentState probe = s;
  for (int k = 0; k < N; ++k) {
    const double x = lo + (hi - lo) * (k + 0.5) / N;
    probe.value[static_cast<std::size_t>(i)] = x;
    lp[static_cast<std::size_t>(k)] = net.log_joint(probe);
    lq[static_cast<std::size_t>(k)] = logq(x);
  }
  auto normalise = [](std::vector<double>& l) {
    const double mx = *std::max_element(l.begin(), l.end());
    double z = 0.0;
    for (double v : l) z += std::exp(v - mx);
    for (double& v : l) v = std::exp(v - mx) / z;
  };
  normalise(lp);
  normalise(lq);
  double kl = 0.0;
  for (int k = 0; k < N; ++k) {
    const double p = lp[static_cast<std::size_t>(k)];
    const double q = lq[static_cast<std::size_t>(k)];
    if (p > 0.0) kl += p * std::log(p / q);
  }
  return kl;
}

inline std::filesystem::path scratch_dir(const std::string& name) {
  auto p = std::filesystem::temp_directory_path() / ("l2swbm_test_" + name);
  std::filesystem::remove_all(p);
  std::filesystem::create_directories(p);
  return p;
}

}  // namespace l2swbm::test
