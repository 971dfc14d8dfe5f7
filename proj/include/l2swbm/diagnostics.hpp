#pragma once

// Convergence, information-criterion and posterior-predictive diagnostics
// over a completed sample store.

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "l2swbm/ingest.hpp"
#include "l2swbm/network.hpp"
#include "l2swbm/sample_store.hpp"

namespace l2swbm {

struct PsrfValue {
  double r50 = 1.0;
  double r975 = 1.0;
  bool degenerate = false;  // zero within-chain variance in every chain
};

// Gelman-Rubin statistic from per-chain means and unbiased variances of n
// draws each, with the degrees-of-freedom correction and the F-based upper
// quantile used by CODA's gelman.diag.
PsrfValue psrf_from_moments(std::span<const double> means, std::span<const double> variances, double n);
PsrfValue psrf(const std::vector<std::span<const double>>& chains);

struct PsrfEntry {
  std::string name;
  PsrfValue value;
};

struct PsrfReport {
  std::vector<PsrfEntry> entries;
  double max_r50 = 1.0;
  double max_r975 = 1.0;
  std::vector<std::string> above_threshold;  // r50 > threshold
  double threshold = 1.1;
};

// Over the given parameter positions, or the store's stochastic parameters
// when empty. Throws InsufficientChainsError for < 2 chains or < 10 draws.
PsrfReport psrf(const SampleStore& store, const std::vector<std::size_t>& params = {}, double threshold = 1.1);

// Iterations whose draws feed the convergence checkpoint at `checkpoint`:
// the first half is discarded and the rest thinned to `target` draws, taking
// every floor((checkpoint/2)/target)-th iteration back from `checkpoint`.
std::vector<long> checkpoint_iterations(long checkpoint, int target = 1000);

struct TrajectoryPoint {
  long iteration = 0;
  double max_r50 = 0.0;
  double max_r975 = 0.0;
  bool skipped = false;
  std::string note;
};

std::vector<TrajectoryPoint> psrf_trajectory(const SampleStore& store);

struct DicScore {
  double mean_deviance = 0.0;
  double pd = 0.0;
  double dic = 0.0;
  std::size_t draws_used = 0;
};

// Uses ceil(draws / chains) evenly spaced draws from every chain. Posterior
// means are taken on the sampled scale.
DicScore dic(const Network& net, const SampleStore& store, int draws = 1000);

struct ClosureBand {
  int start = 0;  // window start month j
  double lower = 0.0;
  double median = 0.0;
  double upper = 0.0;
  std::optional<double> observed;
};

struct ClosureCell {
  std::string lake;
  int window = 1;
  std::size_t inside = 0;
  std::size_t available = 0;
  std::size_t denominator = 0;   // T - window + 1
  std::optional<double> percent;  // empty when nothing is observed
  std::vector<ClosureBand> bands;
};

struct ClosureReport {
  double level = 0.95;
  std::vector<ClosureCell> cells;
  const ClosureCell* find(const std::string& lake, int window) const;
};

// Rolling observed changes in storage per lake and window, from the aligned
// level series.
std::vector<DeltaHObservations> closure_observations(const AlignedTable& data, const std::vector<std::string>& lakes,
                                                     const std::vector<int>& windows = {1, 12, 60});

// Posterior-predictive coverage: for every retained draw, the window sum of
// the monthly balance plus Normal noise at the model's own change-in-storage
// precision; empirical central intervals across draws.
ClosureReport closure(const Network& net, const SampleStore& store, const std::vector<DeltaHObservations>& observations,
                      std::uint64_t seed, double level = 0.95);

// Type-7 sample quantile of sorted data.
double quantile_sorted(std::span<const double> sorted, double p);

struct PosteriorSummary {
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q500 = 0.0;
  double q975 = 0.0;
};
PosteriorSummary summarize(std::span<const double> draws);

}  // namespace l2swbm
