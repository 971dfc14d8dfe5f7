#include "l2swbm/model.hpp"

#include <array>

#include "l2swbm/errors.hpp"

namespace l2swbm {

namespace {

NodeId make_id(Symbol s, int lake, int index, Component c = Component::P, int source = 0) {
  NodeId id;
  id.symbol = s;
  id.lake = lake;
  id.index = index;
  id.component = c;
  id.source = source;
  return id;
}

const AlignedSeries& levels_for(const AlignedTable& data, const std::string& lake) {
  auto sources = data.sources(lake, Component::H);
  if (sources.empty()) throw BuildError("no level series for lake " + lake);
  const AlignedSeries& h = *sources.front();
  if (h.values.size() != static_cast<std::size_t>(data.span.months + 1)) {
    throw BuildError("level series for " + lake + " must hold T+1 beginning-of-month values");
  }
  return h;
}

bool is_flow(Component c) { return c == Component::Q || c == Component::D; }

}  // namespace

std::vector<const AlignedSeries*> component_sources(const AlignedTable& data, const std::string& lake) {
  std::vector<const AlignedSeries*> out;
  for (Component c : kLatentComponents) {
    for (const auto* s : data.sources(lake, c)) out.push_back(s);
  }
  return out;
}

NodeCounts expected_counts(const ModelConfig& config, const AlignedTable& data) {
  const std::size_t T = static_cast<std::size_t>(config.span.months);
  const std::size_t n_dh = config.window.cumulative ? T : T - static_cast<std::size_t>(config.window.width) + 1;
  NodeCounts c;
  for (const auto& lake : config.lakes) {
    const std::size_t S = component_sources(data, lake.name).size();
    c.stochastic += 5 * T + 1;
    c.stochastic += S * (1 + 12);
    if (config.bias == BiasStructure::Hierarchical) c.stochastic += S * (T + 12);
    switch (config.process_error) {
      case ProcessErrorStructure::None: break;
      case ProcessErrorStructure::FixedSeasonal: c.stochastic += 12; break;
      case ProcessErrorStructure::Hierarchical: c.stochastic += 24 + T; break;
    }
    c.deterministic += 2 * T + n_dh;
    c.observed += S * T + n_dh;
  }
  return c;
}

Network build_network(const ModelConfig& config, const PriorSpec& priors, const AlignedTable& data) {
  config.validate();
  if (!(data.span == config.span)) {
    throw BuildError("data span " + data.span.start.str() + "+" + std::to_string(data.span.months) +
                     " does not match model span " + config.span.start.str() + "+" +
                     std::to_string(config.span.months));
  }
  const int T = config.span.months;
  const int L = static_cast<int>(config.lakes.size());
  const auto& hyper = config.hyper;
  std::vector<std::string> lake_names;
  for (const auto& l : config.lakes) lake_names.push_back(l.name);
  auto month_of = [&](int t) { return calendar_month(config.span.start, t); };

  // Fail on missing prior cells before allocating anything.
  for (const auto& lake : lake_names) {
    for (Component c : kLatentComponents) {
      for (int m = 1; m <= 12; ++m) {
        const PriorRecord& r = priors.at(lake, c, m);
        if (family_of(r) != family_for(c)) {
          throw BuildError("prior cell " + lake + "/" + component_char(c) + "/month " + std::to_string(m) +
                           " has family " + family_name(family_of(r)));
        }
      }
    }
  }

  NetworkBuilder nb(lake_names);

  struct SourceNodes {
    const AlignedSeries* series = nullptr;
    NodeIndex tau_y = kNoNode;
    NodeIndex eta_c[12];
    NodeIndex tau_eta[12];
    std::vector<NodeIndex> eta;  // hierarchical: per month
  };
  struct LakeNodes {
    NodeIndex tau_dh = kNoNode;
    NodeIndex eps_c[12];
    NodeIndex tau_eps[12];
    std::vector<NodeIndex> eps;
    std::vector<SourceNodes> sources;
    std::vector<std::array<NodeIndex, 5>> theta;  // [t-1][component]
    std::vector<NodeIndex> inflow, balance, dh;
  };
  std::vector<LakeNodes> lakes(static_cast<std::size_t>(L));

  // Hyper-parameters first: every later node may reference them.
  for (int l = 0; l < L; ++l) {
    auto& ln = lakes[static_cast<std::size_t>(l)];
    ln.tau_dh = nb.add_gamma(make_id(Symbol::TauDeltaH, l, 0), hyper.delta_h_precision.shape,
                             hyper.delta_h_precision.rate);
    if (config.process_error == ProcessErrorStructure::Hierarchical) {
      for (int m = 1; m <= 12; ++m) {
        ln.tau_eps[m - 1] = nb.add_gamma(make_id(Symbol::TauEps, l, m), hyper.seasonal_precision.shape,
                                         hyper.seasonal_precision.rate);
      }
    }
    if (config.process_error != ProcessErrorStructure::None) {
      for (int m = 1; m <= 12; ++m) {
        ln.eps_c[m - 1] = nb.add_normal(make_id(Symbol::EpsC, l, m), Affine{0.0, {}},
                                        PrecisionRef{hyper.seasonal_mean_precision});
      }
    }
    for (const auto* s : component_sources(data, lake_names[static_cast<std::size_t>(l)])) {
      SourceNodes sn;
      sn.series = s;
      sn.tau_y = nb.add_gamma(make_id(Symbol::TauY, l, 0, s->component, s->source),
                              hyper.observation_precision.shape, hyper.observation_precision.rate);
      const double bias_precision = config.constrained_flow_bias && is_flow(s->component)
                                        ? hyper.constrained_bias_precision
                                        : hyper.seasonal_mean_precision;
      for (int m = 1; m <= 12; ++m) {
        if (config.bias == BiasStructure::Hierarchical) {
          sn.tau_eta[m - 1] = nb.add_gamma(make_id(Symbol::TauEta, l, m, s->component, s->source),
                                           hyper.seasonal_precision.shape, hyper.seasonal_precision.rate);
        }
        sn.eta_c[m - 1] = nb.add_normal(make_id(Symbol::EtaC, l, m, s->component, s->source), Affine{0.0, {}},
                                        PrecisionRef{bias_precision});
      }
      ln.sources.push_back(std::move(sn));
    }
  }

  // Latent monthly components, by time.
  for (auto& ln : lakes) ln.theta.resize(static_cast<std::size_t>(T));
  for (int t = 1; t <= T; ++t) {
    const int m = month_of(t);
    for (int l = 0; l < L; ++l) {
      auto& ln = lakes[static_cast<std::size_t>(l)];
      const auto& lake = lake_names[static_cast<std::size_t>(l)];
      for (std::size_t k = 0; k < 5; ++k) {
        const Component c = kLatentComponents[k];
        const NodeId id = make_id(Symbol::Theta, l, t, c);
        const PriorRecord& r = priors.at(lake, c, m);
        NodeIndex idx;
        if (const auto* g = std::get_if<GammaPrior>(&r)) {
          idx = nb.add_gamma(id, g->shape, g->rate);
        } else if (const auto* ln_prior = std::get_if<LogNormalPrior>(&r)) {
          idx = nb.add_lognormal(id, ln_prior->log_mean, ln_prior->log_precision);
        } else {
          const auto& n = std::get<NormalPrior>(r);
          idx = nb.add_normal(id, Affine{n.mean, {}}, PrecisionRef{n.precision});
        }
        ln.theta[static_cast<std::size_t>(t - 1)][k] = idx;
      }
    }
  }

  // Monthly process error and observation bias.
  for (int l = 0; l < L; ++l) {
    auto& ln = lakes[static_cast<std::size_t>(l)];
    if (config.process_error == ProcessErrorStructure::Hierarchical) {
      for (int t = 1; t <= T; ++t) {
        const int m = month_of(t);
        ln.eps.push_back(nb.add_normal(make_id(Symbol::Eps, l, t), Affine{0.0, {{ln.eps_c[m - 1], 1.0}}},
                                       PrecisionRef{1.0, ln.tau_eps[m - 1]}));
      }
    }
    if (config.bias == BiasStructure::Hierarchical) {
      for (auto& sn : ln.sources) {
        for (int t = 1; t <= T; ++t) {
          const int m = month_of(t);
          sn.eta.push_back(nb.add_normal(make_id(Symbol::Eta, l, t, sn.series->component, sn.series->source),
                                         Affine{0.0, {{sn.eta_c[m - 1], 1.0}}},
                                         PrecisionRef{1.0, sn.tau_eta[m - 1]}));
        }
      }
    }
  }

  // Inflow, monthly balance, and change in storage.
  for (int l = 0; l < L; ++l) {
    auto& ln = lakes[static_cast<std::size_t>(l)];
    for (int t = 1; t <= T; ++t) {
      Affine inflow;
      if (l > 0) {
        const double scale = config.lakes[static_cast<std::size_t>(l)].inflow_scale;
        inflow.terms.push_back({lakes[static_cast<std::size_t>(l - 1)].theta[static_cast<std::size_t>(t - 1)][3], scale});
      }
      ln.inflow.push_back(nb.add_deterministic(make_id(Symbol::Inflow, l, t), std::move(inflow)));
    }
    for (int t = 1; t <= T; ++t) {
      const auto& th = ln.theta[static_cast<std::size_t>(t - 1)];
      Affine b{0.0,
               {{th[0], 1.0},
                {th[1], -1.0},
                {th[2], 1.0},
                {ln.inflow[static_cast<std::size_t>(t - 1)], 1.0},
                {th[3], -1.0},
                {th[4], 1.0}}};
      if (config.process_error == ProcessErrorStructure::FixedSeasonal) {
        b.terms.push_back({ln.eps_c[month_of(t) - 1], 1.0});
      } else if (config.process_error == ProcessErrorStructure::Hierarchical) {
        b.terms.push_back({ln.eps[static_cast<std::size_t>(t - 1)], 1.0});
      }
      ln.balance.push_back(nb.add_deterministic(make_id(Symbol::Balance, l, t), std::move(b)));
    }
    if (config.window.cumulative) {
      for (int t = 1; t <= T; ++t) {
        Affine dh{0.0, {{ln.balance[static_cast<std::size_t>(t - 1)], 1.0}}};
        if (t > 1) dh.terms.push_back({ln.dh.back(), 1.0});
        ln.dh.push_back(nb.add_deterministic(make_id(Symbol::DeltaH, l, t), std::move(dh)));
      }
    } else {
      const int w = config.window.width;
      for (int j = 1; j <= T - w + 1; ++j) {
        Affine dh;
        for (int i = j; i <= j + w - 1; ++i) dh.terms.push_back({ln.balance[static_cast<std::size_t>(i - 1)], 1.0});
        ln.dh.push_back(nb.add_deterministic(make_id(Symbol::DeltaH, l, j), std::move(dh)));
      }
    }
  }

  // Likelihoods.
  for (int l = 0; l < L; ++l) {
    auto& ln = lakes[static_cast<std::size_t>(l)];
    const auto& lake = lake_names[static_cast<std::size_t>(l)];
    const AlignedSeries& h = levels_for(data, lake);
    auto level = [&](int k) { return h.values[static_cast<std::size_t>(k - 1)]; };  // k = 1..T+1
    for (std::size_t j = 1; j <= ln.dh.size(); ++j) {
      std::optional<double> y;
      const int jj = static_cast<int>(j);
      const int a = config.window.cumulative ? 1 : jj;
      const int b = config.window.cumulative ? jj + 1 : jj + config.window.width;
      if (level(a) && level(b)) y = *level(b) - *level(a);
      nb.add_observed(make_id(Symbol::YDeltaH, l, jj), Affine{0.0, {{ln.dh[j - 1], 1.0}}},
                      PrecisionRef{1.0, ln.tau_dh}, y);
    }
    for (const auto& sn : ln.sources) {
      const Component c = sn.series->component;
      std::size_t k = 0;
      while (kLatentComponents[k] != c) ++k;
      for (int t = 1; t <= T; ++t) {
        const NodeIndex bias = config.bias == BiasStructure::Hierarchical ? sn.eta[static_cast<std::size_t>(t - 1)]
                                                                          : sn.eta_c[month_of(t) - 1];
        nb.add_observed(make_id(Symbol::Y, l, t, c, sn.series->source),
                        Affine{0.0, {{ln.theta[static_cast<std::size_t>(t - 1)][k], 1.0}, {bias, 1.0}}},
                        PrecisionRef{1.0, sn.tau_y}, sn.series->values[static_cast<std::size_t>(t - 1)]);
      }
    }
  }

  Network net = std::move(nb).finish();
  net.config = config;
  net.months = T;
  return net;
}

}  // namespace l2swbm
