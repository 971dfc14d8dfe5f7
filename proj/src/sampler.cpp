#include "l2swbm/sampler.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>
#include <thread>

namespace l2swbm {

namespace {

constexpr char kRestartMagic[] = "L2SWBM-RESTART";
constexpr std::uint32_t kRestartVersion = 2;

class Interrupted : public Error {
 public:
  using Error::Error;
};

template <typename T>
void put(std::ostream& out, const T& v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

void put_string(std::ostream& out, const std::string& s) {
  put<std::uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

void put_doubles(std::ostream& out, const double* p, std::size_t n) {
  out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
}

template <typename T>
T get(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw ConfigError("restart file is truncated");
  return v;
}

std::string get_string(std::istream& in) {
  auto n = get<std::uint64_t>(in);
  if (n > (1u << 26)) throw ConfigError("restart file is corrupt");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw ConfigError("restart file is truncated");
  return s;
}

void get_doubles(std::istream& in, double* p, std::size_t n) {
  in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(n * sizeof(double)));
  if (!in) throw ConfigError("restart file is truncated");
}

std::filesystem::path restart_path(const SamplerSettings& s, int chain) {
  return s.restart_dir / ("chain" + std::to_string(chain) + ".restart");
}

std::filesystem::path timing_path(const SamplerSettings& s, int chain) {
  return s.restart_dir / ("chain" + std::to_string(chain) + ".timing");
}

struct ChainContext {
  const Network& net;
  const SamplerSettings& settings;
  SampleStore& store;
  const std::vector<long>& retained;
  int chain;
};

void write_restart(const ChainContext& ctx, long iteration, double elapsed, const LatentState& state,
                   const Rng& rng, int recorded) {
  const auto path = restart_path(ctx.settings, ctx.chain);
  const auto tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write restart file " + tmp);
    out.write(kRestartMagic, sizeof kRestartMagic);
    put(out, kRestartVersion);
    put_string(out, ctx.store.model_id);
    put<std::uint64_t>(out, ctx.settings.seed);
    put<std::int64_t>(out, ctx.settings.iterations);
    put<std::int64_t>(out, ctx.settings.burn_in);
    put<std::int64_t>(out, ctx.settings.retained_per_chain);
    put<std::int64_t>(out, ctx.settings.checkpoint_interval);
    put<std::int32_t>(out, ctx.chain);
    put<std::uint64_t>(out, state.value.size());
    put<std::uint64_t>(out, ctx.store.params());
    put<std::int64_t>(out, iteration);
    std::ostringstream rs;
    rs << rng;
    put_string(out, rs.str());
    put_doubles(out, state.value.data(), state.value.size());
    put<std::int32_t>(out, recorded);
    for (std::size_t p = 0; p < ctx.store.params(); ++p) {
      put_doubles(out, ctx.store.draws(p, ctx.chain).data(), static_cast<std::size_t>(recorded));
    }
    put<std::uint64_t>(out, ctx.store.checkpoints.size());
    const std::size_t C = static_cast<std::size_t>(ctx.store.chains());
    for (const auto& cp : ctx.store.checkpoints) {
      for (std::size_t q = 0; q < ctx.store.psrf_params.size(); ++q) {
        const std::size_t k = q * C + static_cast<std::size_t>(ctx.chain);
        put(out, cp.count[k]);
        put(out, cp.mean[k]);
        put(out, cp.m2[k]);
      }
    }
    if (!out) throw Error("failed writing restart file " + tmp);
  }
  std::filesystem::rename(tmp, path);
  // Wall-clock time lives beside the state so the state file is reproducible.
  std::ofstream(timing_path(ctx.settings, ctx.chain), std::ios::trunc) << std::setprecision(17) << elapsed << "\n";
}

struct Restored {
  long iteration = 0;
  double elapsed = 0.0;
  int recorded = 0;
};

Restored read_restart(const ChainContext& ctx, LatentState& state, Rng& rng) {
  const auto path = restart_path(ctx.settings, ctx.chain);
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open restart file " + path.string());
  char magic[sizeof kRestartMagic];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kRestartMagic, sizeof magic) != 0) {
    throw ConfigError(path.string() + " is not a restart file");
  }
  if (get<std::uint32_t>(in) != kRestartVersion) throw ConfigError(path.string() + ": unsupported version");
  auto mismatch = [&](const char* what) {
    return ConfigError(path.string() + ": " + what + " does not match the current run");
  };
  if (get_string(in) != ctx.store.model_id) throw mismatch("model id");
  if (get<std::uint64_t>(in) != ctx.settings.seed) throw mismatch("seed");
  if (get<std::int64_t>(in) != ctx.settings.iterations) throw mismatch("iteration count");
  if (get<std::int64_t>(in) != ctx.settings.burn_in) throw mismatch("burn-in");
  if (get<std::int64_t>(in) != ctx.settings.retained_per_chain) throw mismatch("retained draws");
  if (get<std::int64_t>(in) != ctx.settings.checkpoint_interval) throw mismatch("checkpoint interval");
  if (get<std::int32_t>(in) != ctx.chain) throw mismatch("chain index");
  if (get<std::uint64_t>(in) != state.value.size()) throw mismatch("node count");
  if (get<std::uint64_t>(in) != ctx.store.params()) throw mismatch("parameter count");
  Restored r;
  r.iteration = static_cast<long>(get<std::int64_t>(in));
  if (std::ifstream t(timing_path(ctx.settings, ctx.chain)); !(t >> r.elapsed)) r.elapsed = 0.0;
  std::istringstream rs(get_string(in));
  rs >> rng;
  if (!rs) throw ConfigError(path.string() + ": corrupt generator state");
  get_doubles(in, state.value.data(), state.value.size());
  r.recorded = get<std::int32_t>(in);
  if (r.recorded < 0 || r.recorded > ctx.store.draws()) throw ConfigError(path.string() + ": corrupt draw count");
  for (std::size_t p = 0; p < ctx.store.params(); ++p) {
    get_doubles(in, ctx.store.draws(p, ctx.chain).data(), static_cast<std::size_t>(r.recorded));
  }
  if (get<std::uint64_t>(in) != ctx.store.checkpoints.size()) throw mismatch("checkpoint layout");
  const std::size_t C = static_cast<std::size_t>(ctx.store.chains());
  for (auto& cp : ctx.store.checkpoints) {
    for (std::size_t q = 0; q < ctx.store.psrf_params.size(); ++q) {
      const std::size_t k = q * C + static_cast<std::size_t>(ctx.chain);
      cp.count[k] = get<double>(in);
      cp.mean[k] = get<double>(in);
      cp.m2[k] = get<double>(in);
    }
  }
  return r;
}

void run_chain(const ChainContext& ctx) {
  using clock = std::chrono::steady_clock;
  const auto t0 = clock::now();
  const auto& s = ctx.settings;
  const Network& net = ctx.net;
  SampleStore& store = ctx.store;
  ChainStatus& status = store.status[static_cast<std::size_t>(ctx.chain)];

  LatentState state = init_state(net, ctx.chain, s.seed);
  Rng rng = make_rng(s.seed, static_cast<std::uint64_t>(ctx.chain), 0);
  Restored restored;
  const bool use_restart = !s.restart_dir.empty();
  if (use_restart && s.resume && std::filesystem::exists(restart_path(s, ctx.chain))) {
    restored = read_restart(ctx, state, rng);
    net.refresh(state);
  }
  auto elapsed = [&]() {
    return restored.elapsed + std::chrono::duration<double>(clock::now() - t0).count();
  };

  int next = restored.recorded;
  const std::size_t C = static_cast<std::size_t>(store.chains());
  const auto& nodes = store.nodes();
  long it = restored.iteration;
  try {
    while (it < s.iterations) {
      ++it;
      gibbs_step(net, state, rng, s.slice_width, s.slice_max_steps);
      if (next < store.draws() && ctx.retained[static_cast<std::size_t>(next)] == it) {
        for (std::size_t p = 0; p < nodes.size(); ++p) {
          store.draws(p, ctx.chain)[static_cast<std::size_t>(next)] = state.value[static_cast<std::size_t>(nodes[p])];
        }
        ++next;
      }
      for (auto& cp : store.checkpoints) {
        if (it > cp.iteration || 2 * it <= cp.iteration) continue;
        const long back = cp.iteration - it;
        if (back % cp.stride != 0 || back / cp.stride >= cp.target) continue;
        for (std::size_t q = 0; q < store.psrf_params.size(); ++q) {
          const std::size_t k = q * C + static_cast<std::size_t>(ctx.chain);
          const double x = state.value[static_cast<std::size_t>(nodes[store.psrf_params[q]])];
          cp.count[k] += 1.0;
          const double d = x - cp.mean[k];
          cp.mean[k] += d / cp.count[k];
          cp.m2[k] += d * (x - cp.mean[k]);
        }
      }
      const bool stop = s.stop_after > 0 && it == s.stop_after && it < s.iterations;
      if (use_restart && (it % s.checkpoint_interval == 0 || it == s.iterations || stop)) {
        write_restart(ctx, it, elapsed(), state, rng, next);
      }
      if (stop) throw Interrupted("interrupted at iteration " + std::to_string(it));
    }
  } catch (const Error& e) {
    status.failed = true;
    status.reason = e.what();
  }
  status.iterations_done = it;
  status.seconds = elapsed();
}

}  // namespace

Rng make_rng(std::uint64_t seed, std::uint64_t chain, std::uint64_t purpose) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(chain), static_cast<std::uint32_t>(purpose), 0x4c32u};
  return Rng(seq);
}

LatentState init_state(const Network& net, int chain, std::uint64_t seed) {
  LatentState s = net.blank_state();
  Rng rng = make_rng(seed, static_cast<std::uint64_t>(chain), 1);
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Node& n = net.node(static_cast<NodeIndex>(i));
    if (n.kind != NodeKind::Stochastic) continue;
    double v = 0.0;
    switch (n.family) {
      case Family::Normal: v = net.affine_value(n.mean, s.value); break;
      case Family::Gamma: v = n.p1 / n.p2; break;
      case Family::LogNormal: v = std::exp(n.p1); break;
      case Family::None: break;
    }
    const bool jitter = n.id.symbol == Symbol::Theta || n.id.symbol == Symbol::Generic;
    if (chain > 0 && jitter && net.update_kind(static_cast<NodeIndex>(i)) != UpdateKind::ConjugateGamma) {
      v *= 0.9 + 0.2 * draw_uniform(rng);
    }
    s.value[i] = v;
  }
  net.refresh(s);
  return s;
}

void gibbs_step(const Network& net, LatentState& s, Rng& rng, double slice_width, int slice_max_steps) {
  for (const PlanEntry& e : net.update_plan()) {
    const FullConditional fc = net.full_conditional(e.node, s);
    switch (e.kind) {
      case UpdateKind::ConjugateNormal: {
        const auto& c = std::get<NormalConditional>(fc);
        net.set_value(e.node, draw_normal(rng, c.mean, 1.0 / std::sqrt(c.precision)), s);
        break;
      }
      case UpdateKind::ConjugateGamma: {
        const auto& c = std::get<GammaConditional>(fc);
        net.set_value(e.node, draw_gamma(rng, c.shape, c.rate), s);
        break;
      }
      case UpdateKind::Slice: {
        const auto& c = std::get<SliceConditional>(fc);
        double x;
        try {
          x = slice_sample([&c](double v) { return c.log_density(v); }, s.value[static_cast<std::size_t>(e.node)],
                           slice_width, slice_max_steps, rng);
        } catch (const SliceFailure& f) {
          throw SliceFailure("node " + net.node(e.node).name + ": " + f.what());
        }
        net.set_value(e.node, x, s);
        break;
      }
    }
  }
  net.refresh(s);
}

LatentState sample_prior(const Network& net, Rng& rng) {
  LatentState s = net.blank_state();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Node& n = net.node(static_cast<NodeIndex>(i));
    switch (n.kind) {
      case NodeKind::Deterministic: s.value[i] = net.affine_value(n.mean, s.value); break;
      case NodeKind::Observed:
        if (n.datum) {
          s.value[i] = draw_normal(rng, net.affine_value(n.mean, s.value),
                                   1.0 / std::sqrt(net.precision_value(n.precision, s.value)));
        }
        break;
      case NodeKind::Stochastic:
        if (n.family == Family::Normal) {
          s.value[i] = draw_normal(rng, net.affine_value(n.mean, s.value),
                                   1.0 / std::sqrt(net.precision_value(n.precision, s.value)));
        } else if (n.family == Family::Gamma) {
          s.value[i] = draw_gamma(rng, n.p1, n.p2);
        } else {
          s.value[i] = std::exp(draw_normal(rng, n.p1, 1.0 / std::sqrt(n.p2)));
        }
        break;
    }
  }
  net.refresh(s);
  return s;
}

void resample_observations(const Network& net, LatentState& s, Rng& rng) {
  net.refresh(s);
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Node& n = net.node(static_cast<NodeIndex>(i));
    if (n.kind != NodeKind::Observed || !n.datum) continue;
    s.value[i] = draw_normal(rng, net.affine_value(n.mean, s.value),
                             1.0 / std::sqrt(net.precision_value(n.precision, s.value)));
  }
  net.refresh(s);
}

std::vector<NodeIndex> recorded_nodes(const Network& net) {
  std::vector<NodeIndex> out;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (net.node(static_cast<NodeIndex>(i)).kind == NodeKind::Stochastic) out.push_back(static_cast<NodeIndex>(i));
  }
  for (std::size_t i = 0; i < net.size(); ++i) {
    const Node& n = net.node(static_cast<NodeIndex>(i));
    if (n.kind == NodeKind::Deterministic && (n.id.symbol == Symbol::Inflow || n.id.symbol == Symbol::Balance)) {
      out.push_back(static_cast<NodeIndex>(i));
    }
  }
  return out;
}

SampleStore run(const Network& net, const SamplerSettings& settings) {
  settings.validate();
  const auto wall0 = std::chrono::steady_clock::now();
  const auto nodes = recorded_nodes(net);
  std::vector<std::string> names;
  names.reserve(nodes.size());
  for (NodeIndex i : nodes) names.push_back(net.node(i).name);

  SampleStore store(nodes, std::move(names), settings.chains, settings.retained_per_chain);
  store.model_id = net.config ? net.config->id : std::string("custom");
  store.settings = settings;
  store.iterations = settings.retained_iterations();
  store.status.assign(static_cast<std::size_t>(settings.chains), ChainStatus{});
  for (std::size_t p = 0; p < nodes.size(); ++p) {
    if (net.node(nodes[p]).kind == NodeKind::Stochastic) store.psrf_params.push_back(p);
  }
  const std::size_t slots = store.psrf_params.size() * static_cast<std::size_t>(settings.chains);
  for (long c = settings.checkpoint_interval; c <= settings.iterations; c += settings.checkpoint_interval) {
    CheckpointMoments cp;
    cp.iteration = c;
    cp.stride = std::max(1L, (c / 2) / cp.target);
    if (c >= 2 * cp.target) {
      cp.count.assign(slots, 0.0);
      cp.mean.assign(slots, 0.0);
      cp.m2.assign(slots, 0.0);
    } else {
      cp.stride = 0;  // too short: skipped
    }
    store.checkpoints.push_back(std::move(cp));
  }
  // Skipped checkpoints carry no accumulators; keep them out of the hot loop.
  std::vector<CheckpointMoments> skipped;
  {
    std::vector<CheckpointMoments> active;
    for (auto& cp : store.checkpoints) (cp.stride == 0 ? skipped : active).push_back(std::move(cp));
    store.checkpoints = std::move(active);
  }

  if (!settings.restart_dir.empty()) std::filesystem::create_directories(settings.restart_dir);

  const int workers = std::max(1, std::min(settings.resolved_threads(), settings.chains));
  std::atomic<int> next_chain{0};
  auto worker = [&]() {
    for (int c = next_chain++; c < settings.chains; c = next_chain++) {
      run_chain(ChainContext{net, settings, store, store.iterations, c});
    }
  };
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (auto& t : pool) t.join();
  }

  for (auto& cp : skipped) store.checkpoints.push_back(std::move(cp));
  std::sort(store.checkpoints.begin(), store.checkpoints.end(),
            [](const auto& a, const auto& b) { return a.iteration < b.iteration; });
  store.total_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - wall0).count();
  return store;
}

}  // namespace l2swbm
