#include "l2swbm/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/fisher_f.hpp>

#include "l2swbm/errors.hpp"
#include "l2swbm/sampler.hpp"

namespace l2swbm {

namespace {

double sample_var(std::span<const double> x) {
  const double n = static_cast<double>(x.size());
  double m = 0.0;
  for (double v : x) m += v;
  m /= n;
  double ss = 0.0;
  for (double v : x) ss += (v - m) * (v - m);
  return ss / (n - 1.0);
}

double sample_cov(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double s = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - mx) * (y[i] - my);
  return s / (n - 1.0);
}

// Mean that is exact when all inputs are equal.
double stable_mean(std::span<const double> x) {
  if (x.empty()) return 0.0;
  const double base = x[0];
  double s = 0.0;
  for (double v : x) s += v - base;
  return base + s / static_cast<double>(x.size());
}

}  // namespace

PsrfValue psrf_from_moments(std::span<const double> xbar, std::span<const double> s2, double n) {
  const std::size_t m_chains = xbar.size();
  if (m_chains < 2) throw InsufficientChainsError("PSRF needs at least 2 chains");
  if (n < 10) throw InsufficientChainsError("PSRF needs at least 10 draws per chain");
  const double m = static_cast<double>(m_chains);

  double W = 0.0;
  for (double v : s2) W += v;
  W /= m;
  if (!(W > 0.0)) return PsrfValue{1.0, 1.0, true};

  const double b = n * sample_var(xbar);
  double muhat = 0.0;
  for (double v : xbar) muhat += v;
  muhat /= m;
  std::vector<double> xbar2(m_chains);
  for (std::size_t i = 0; i < m_chains; ++i) xbar2[i] = xbar[i] * xbar[i];

  const double var_w = sample_var(s2) / m;
  const double var_b = 2.0 * b * b / (m - 1.0);
  const double cov_wb = (n / m) * (sample_cov(s2, xbar2) - 2.0 * muhat * sample_cov(s2, xbar));
  const double V = (n - 1.0) * W / n + (1.0 + 1.0 / m) * b / n;
  const double var_V = ((n - 1.0) * (n - 1.0) * var_w + (1.0 + 1.0 / m) * (1.0 + 1.0 / m) * var_b +
                        2.0 * (n - 1.0) * (1.0 + 1.0 / m) * cov_wb) /
                       (n * n);
  const double df_V = 2.0 * V * V / var_V;
  const double df_adj = (df_V + 3.0) / (df_V + 1.0);
  const double B_df = m - 1.0;
  const double R2_fixed = (n - 1.0) / n;
  const double R2_random = (1.0 + 1.0 / m) * (1.0 / n) * (b / W);

  double q;
  if (var_w > 0.0) {
    const double W_df = 2.0 * W * W / var_w;
    q = boost::math::quantile(boost::math::fisher_f(B_df, W_df), 0.975);
  } else {
    q = boost::math::quantile(boost::math::chi_squared(B_df), 0.975) / B_df;
  }
  // var_V can vanish when every chain is identical; the correction tends to 1.
  const double adj = std::isfinite(df_adj) && var_V > 0.0 ? df_adj : 1.0;
  PsrfValue out;
  out.r50 = std::sqrt(adj * (R2_fixed + R2_random));
  out.r975 = std::sqrt(adj * (R2_fixed + q * R2_random));
  return out;
}

PsrfValue psrf(const std::vector<std::span<const double>>& chains) {
  if (chains.size() < 2) throw InsufficientChainsError("PSRF needs at least 2 chains");
  const std::size_t n = chains.front().size();
  std::vector<double> means, vars;
  for (const auto& c : chains) {
    if (c.size() != n) throw Error("PSRF chains must have equal length");
    if (n < 10) throw InsufficientChainsError("PSRF needs at least 10 draws per chain");
    double m = 0.0;
    for (double v : c) m += v;
    m /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : c) ss += (v - m) * (v - m);
    means.push_back(m);
    vars.push_back(ss / static_cast<double>(n - 1));
  }
  return psrf_from_moments(means, vars, static_cast<double>(n));
}

PsrfReport psrf(const SampleStore& store, const std::vector<std::size_t>& params, double threshold) {
  if (store.chains() < 2) throw InsufficientChainsError("PSRF needs at least 2 chains");
  const auto& which = params.empty() ? store.psrf_params : params;
  PsrfReport rep;
  rep.threshold = threshold;
  rep.max_r50 = 0.0;
  rep.max_r975 = 0.0;
  for (std::size_t p : which) {
    std::vector<std::span<const double>> chains;
    for (int c = 0; c < store.chains(); ++c) chains.push_back(store.draws(p, c));
    PsrfEntry e{store.names()[p], psrf(chains)};
    rep.max_r50 = std::max(rep.max_r50, e.value.r50);
    rep.max_r975 = std::max(rep.max_r975, e.value.r975);
    if (e.value.r50 > threshold) rep.above_threshold.push_back(e.name);
    rep.entries.push_back(std::move(e));
  }
  if (rep.entries.empty()) {
    rep.max_r50 = 1.0;
    rep.max_r975 = 1.0;
  }
  return rep;
}

std::vector<long> checkpoint_iterations(long checkpoint, int target) {
  const long stride = (checkpoint / 2) / target;
  std::vector<long> out;
  if (stride < 1) return out;
  for (int d = 0; d < target; ++d) out.push_back(checkpoint - static_cast<long>(target - 1 - d) * stride);
  return out;
}

std::vector<TrajectoryPoint> psrf_trajectory(const SampleStore& store) {
  std::vector<TrajectoryPoint> out;
  const std::size_t C = static_cast<std::size_t>(store.chains());
  for (const auto& cp : store.checkpoints) {
    TrajectoryPoint tp;
    tp.iteration = cp.iteration;
    if (cp.stride == 0 || cp.count.empty()) {
      tp.skipped = true;
      tp.note = "fewer than " + std::to_string(2 * cp.target) + " draws per chain";
      out.push_back(tp);
      continue;
    }
    if (C < 2) {
      tp.skipped = true;
      tp.note = "fewer than 2 chains";
      out.push_back(tp);
      continue;
    }
    bool complete = true;
    for (double c : cp.count) complete = complete && c == static_cast<double>(cp.target);
    if (!complete) {
      tp.skipped = true;
      tp.note = "chain did not reach the checkpoint";
      out.push_back(tp);
      continue;
    }
    std::vector<double> means(C), vars(C);
    for (std::size_t q = 0; q < store.psrf_params.size(); ++q) {
      for (std::size_t c = 0; c < C; ++c) {
        means[c] = cp.mean[q * C + c];
        vars[c] = cp.m2[q * C + c] / (cp.count[q * C + c] - 1.0);
      }
      const PsrfValue v = psrf_from_moments(means, vars, static_cast<double>(cp.target));
      tp.max_r50 = std::max(tp.max_r50, v.r50);
      tp.max_r975 = std::max(tp.max_r975, v.r975);
    }
    out.push_back(tp);
  }
  return out;
}

DicScore dic(const Network& net, const SampleStore& store, int draws) {
  const int C = store.chains();
  const int per_chain = std::min(store.draws(), (draws + C - 1) / C);
  std::vector<int> picks;
  for (int k = 0; k < per_chain; ++k) {
    picks.push_back(static_cast<int>((static_cast<long>(k) * store.draws()) / per_chain));
  }

  // Stochastic nodes must all be present to evaluate the likelihood.
  std::vector<std::pair<std::size_t, NodeIndex>> stoch;
  for (std::size_t p = 0; p < store.params(); ++p) {
    const NodeIndex i = store.nodes()[p];
    if (i == kNoNode) continue;
    if (net.node(i).kind == NodeKind::Stochastic) stoch.emplace_back(p, i);
  }
  if (stoch.size() != net.counts().stochastic) throw Error("DIC needs every stochastic node in the store");

  LatentState s = net.blank_state();
  std::vector<double> deviances;
  for (int c = 0; c < C; ++c) {
    for (int k : picks) {
      for (const auto& [p, i] : stoch) s.value[static_cast<std::size_t>(i)] = store.draws(p, c)[static_cast<std::size_t>(k)];
      net.refresh(s);
      deviances.push_back(net.deviance(s));
    }
  }
  std::vector<double> buf;
  for (const auto& [p, i] : stoch) {
    buf.clear();
    for (int c = 0; c < C; ++c) {
      for (int k : picks) buf.push_back(store.draws(p, c)[static_cast<std::size_t>(k)]);
    }
    s.value[static_cast<std::size_t>(i)] = stable_mean(buf);
  }
  net.refresh(s);
  if (!std::isfinite(net.log_joint(s))) throw Error("posterior mean state lies outside the model support");

  DicScore d;
  d.draws_used = deviances.size();
  d.mean_deviance = stable_mean(deviances);
  d.pd = d.mean_deviance - net.deviance(s);
  d.dic = d.mean_deviance + d.pd;
  return d;
}

const ClosureCell* ClosureReport::find(const std::string& lake, int window) const {
  for (const auto& c : cells) {
    if (c.lake == lake && c.window == window) return &c;
  }
  return nullptr;
}

std::vector<DeltaHObservations> closure_observations(const AlignedTable& data, const std::vector<std::string>& lakes,
                                                     const std::vector<int>& windows) {
  std::vector<DeltaHObservations> out;
  const int T = data.span.months;
  for (const auto& lake : lakes) {
    auto hs = data.sources(lake, Component::H);
    if (hs.empty()) throw SpanError("no level series for lake " + lake);
    const auto& h = hs.front()->values;
    for (int w : windows) {
      if (w < 1 || w > T) {
        throw WindowError("closure window " + std::to_string(w) + " exceeds the " + std::to_string(T) +
                          "-month analysis span");
      }
      DeltaHObservations obs;
      obs.lake = lake;
      obs.window = Window::rolling(w);
      for (int j = 1; j <= T - w + 1; ++j) {
        const auto& a = h[static_cast<std::size_t>(j - 1)];
        const auto& b = h[static_cast<std::size_t>(j - 1 + w)];
        obs.values.push_back(a && b ? std::optional<double>(*b - *a) : std::nullopt);
      }
      out.push_back(std::move(obs));
    }
  }
  return out;
}

double quantile_sorted(std::span<const double> x, double p) {
  if (x.empty()) return std::numeric_limits<double>::quiet_NaN();
  const double h = (static_cast<double>(x.size()) - 1.0) * p;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, x.size() - 1);
  return x[lo] + (h - static_cast<double>(lo)) * (x[hi] - x[lo]);
}

PosteriorSummary summarize(std::span<const double> draws) {
  PosteriorSummary s;
  std::vector<double> v(draws.begin(), draws.end());
  s.mean = stable_mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - s.mean) * (x - s.mean);
  s.sd = v.size() > 1 ? std::sqrt(ss / static_cast<double>(v.size() - 1)) : 0.0;
  std::sort(v.begin(), v.end());
  s.q025 = quantile_sorted(v, 0.025);
  s.q500 = quantile_sorted(v, 0.5);
  s.q975 = quantile_sorted(v, 0.975);
  return s;
}

ClosureReport closure(const Network& net, const SampleStore& store, const std::vector<DeltaHObservations>& observations,
                      std::uint64_t seed, double level) {
  const int T = net.months;
  ClosureReport rep;
  rep.level = level;
  const double p_lo = (1.0 - level) / 2.0;
  const double p_hi = (1.0 + level) / 2.0;
  const int C = store.chains();
  const std::size_t D = static_cast<std::size_t>(C) * static_cast<std::size_t>(store.draws());

  for (const auto& obs : observations) {
    if (obs.window.cumulative) throw WindowError("closure windows must be rolling");
    const int w = obs.window.width;
    if (w < 1 || w > T) {
      throw WindowError("closure window " + std::to_string(w) + " exceeds the " + std::to_string(T) +
                        "-month analysis span");
    }
    const auto lake_it = std::find(net.lakes().begin(), net.lakes().end(), obs.lake);
    if (lake_it == net.lakes().end()) throw ConfigError("closure: unknown lake " + obs.lake);
    const int lake = static_cast<int>(lake_it - net.lakes().begin());

    std::vector<std::size_t> b(static_cast<std::size_t>(T));
    for (int t = 1; t <= T; ++t) {
      b[static_cast<std::size_t>(t - 1)] = store.at("b[" + obs.lake + "," + std::to_string(t) + "]");
    }
    const std::size_t tau = store.at("tau_dH[" + obs.lake + "]");

    const std::size_t J = static_cast<std::size_t>(T - w + 1);
    std::vector<double> sim(J * D);  // [j][draw]
    Rng rng = make_rng(seed, static_cast<std::uint64_t>(1000 * lake + w), 2);
    std::vector<double> prefix(static_cast<std::size_t>(T) + 1);
    std::size_t d = 0;
    for (int c = 0; c < C; ++c) {
      for (int k = 0; k < store.draws(); ++k, ++d) {
        prefix[0] = 0.0;
        for (int t = 1; t <= T; ++t) {
          prefix[static_cast<std::size_t>(t)] =
              prefix[static_cast<std::size_t>(t - 1)] +
              store.draws(b[static_cast<std::size_t>(t - 1)], c)[static_cast<std::size_t>(k)];
        }
        const double sd = 1.0 / std::sqrt(store.draws(tau, c)[static_cast<std::size_t>(k)]);
        for (std::size_t j = 0; j < J; ++j) {
          const double mean = prefix[j + static_cast<std::size_t>(w)] - prefix[j];
          sim[j * D + d] = draw_normal(rng, mean, sd);
        }
      }
    }

    ClosureCell cell;
    cell.lake = obs.lake;
    cell.window = w;
    cell.denominator = J;
    for (std::size_t j = 0; j < J; ++j) {
      std::span<double> row(sim.data() + j * D, D);
      std::sort(row.begin(), row.end());
      ClosureBand band;
      band.start = static_cast<int>(j) + 1;
      band.lower = quantile_sorted(row, p_lo);
      band.median = quantile_sorted(row, 0.5);
      band.upper = quantile_sorted(row, p_hi);
      if (j < obs.values.size()) band.observed = obs.values[j];
      if (band.observed) {
        ++cell.available;
        if (*band.observed >= band.lower && *band.observed <= band.upper) ++cell.inside;
      }
      cell.bands.push_back(band);
    }
    if (cell.available > 0) {
      cell.percent = 100.0 * static_cast<double>(cell.inside) / static_cast<double>(cell.available);
    }
    rep.cells.push_back(std::move(cell));
  }
  return rep;
}

}  // namespace l2swbm
