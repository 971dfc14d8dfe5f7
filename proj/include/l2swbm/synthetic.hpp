#pragma once

// Two-lake synthetic hydrology with realistic monthly magnitudes, used as the
// shipped fixture in place of agency data.

#include <cstdint>
#include <filesystem>
#include <vector>

#include "l2swbm/ingest.hpp"

namespace l2swbm {

struct SyntheticOptions {
  std::uint64_t seed = 20050101;
  YearMonth start{1950, 1};
  int months = 780;               // component months; levels carry one more
  YearMonth second_sources{2005, 1};  // P2 and E2 begin here
  YearMonth gauge_start{2008, 11};    // Q2 begins here
  double level_noise = 20.0;          // mm, lakewide-average level error
  // Regional AR(1) storage discrepancy shared by both lakes and not
  // represented by any component (thermal expansion, groundwater and similar),
  // added to the true monthly change. sd is the stationary SD in mm.
  double discrepancy_phi = 0.98;
  double discrepancy_sd = 22.0;
  // Mean of the first precipitation source on the first lake over the whole
  // record after rescaling.
  double sup_p1_mean = 65.53;
};

struct SyntheticData {
  std::vector<ComponentSeries> observed;  // every source, including levels
  std::vector<ComponentSeries> truth;     // source 0: latent P, E, R, I, Q, D and true levels
};

SyntheticData generate_synthetic(const SyntheticOptions& options = {});

// Writes one `year,month,value` CSV per observed series plus manifest.json
// describing them, a 2005-2014 analysis span and a 1950-2004 prior history.
void write_synthetic(const SyntheticData& data, const std::filesystem::path& dir, std::uint64_t seed);

}  // namespace l2swbm
