#pragma once

// Multi-chain Gibbs sampling with slice updates for non-conjugate nodes.

#include <cfloat>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>

#include "l2swbm/errors.hpp"
#include "l2swbm/network.hpp"
#include "l2swbm/sample_store.hpp"

namespace l2swbm {

using Rng = std::mt19937_64;

// Independent stream for (seed, chain, purpose). Purposes: 0 sampling,
// 1 initialisation, 2 posterior prediction, 3+ test use.
Rng make_rng(std::uint64_t seed, std::uint64_t chain, std::uint64_t purpose);

// Each draw uses a fresh distribution object so the generator state alone
// determines the continuation (restart files store only the engine).
inline double draw_uniform(Rng& rng) { return std::uniform_real_distribution<double>(0.0, 1.0)(rng); }
inline double draw_normal(Rng& rng, double mean, double sd) {
  return std::normal_distribution<double>(mean, sd)(rng);
}
inline double draw_gamma(Rng& rng, double shape, double rate) {
  double x = std::gamma_distribution<double>(shape, 1.0 / rate)(rng);
  return x < DBL_MIN ? DBL_MIN : x;
}
inline double draw_exponential(Rng& rng) { return std::exponential_distribution<double>(1.0)(rng); }

// Univariate slice sampler with stepping out and shrinkage. Stepping out
// uses at most `max_steps` unit intervals split randomly between the two
// sides; if the budget runs out with both ends still inside the slice the
// search restarts once with ten times the width, and a second exhaustion
// raises SliceFailure.
template <typename LogDensity>
double slice_sample(const LogDensity& f, double x0, double width, int max_steps, Rng& rng) {
  const double f0 = f(x0);
  if (!(f0 > -INFINITY)) throw Error("slice_sample: current point has zero density");
  const double level = f0 - draw_exponential(rng);
  double w = width;
  for (int attempt = 0; attempt < 2; ++attempt, w *= 10.0) {
    double left = x0 - w * draw_uniform(rng);
    double right = left + w;
    int j = static_cast<int>(std::floor(max_steps * draw_uniform(rng)));
    int k = max_steps - 1 - j;
    while (j > 0 && f(left) > level) {
      left -= w;
      --j;
    }
    while (k > 0 && f(right) > level) {
      right += w;
      --k;
    }
    // Budget exhausted with both ends still inside the slice: the slice is
    // wider than the whole stepping-out range.
    if (j == 0 && k == 0 && f(left) > level && f(right) > level) continue;
    for (int shrink = 0; shrink < 1000; ++shrink) {
      const double x1 = left + (right - left) * draw_uniform(rng);
      if (f(x1) > level) return x1;
      if (x1 < x0) {
        left = x1;
      } else {
        right = x1;
      }
    }
    throw SliceFailure("slice_sample: shrinkage did not terminate");
  }
  throw SliceFailure("slice_sample: stepping-out budget exhausted after widening");
}

// Prior means for every stochastic node (normal means evaluated in insertion
// order, so hierarchical children start at their parents). Chains after the
// first scale component nodes by independent factors in [0.9, 1.1].
LatentState init_state(const Network& net, int chain, std::uint64_t seed);

// One systematic scan over the update plan, then a full refresh of derived
// values. SliceFailure messages name the node.
void gibbs_step(const Network& net, LatentState& state, Rng& rng, double slice_width = 20.0,
                int slice_max_steps = 50);

// Ancestral draw of every stochastic node and unmasked observation.
LatentState sample_prior(const Network& net, Rng& rng);
// Replaces unmasked observation values with draws given the latent state.
void resample_observations(const Network& net, LatentState& state, Rng& rng);

// Nodes recorded in a store: every stochastic node, then inflow and balance
// nodes.
std::vector<NodeIndex> recorded_nodes(const Network& net);

// Runs all chains. Chain failures are recorded in the store's status rather
// than thrown.
SampleStore run(const Network& net, const SamplerSettings& settings);

}  // namespace l2swbm
