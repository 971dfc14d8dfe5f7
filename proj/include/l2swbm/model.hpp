#pragma once

// Assembly of the lake water-balance network for one model configuration.

#include "l2swbm/ingest.hpp"
#include "l2swbm/model_config.hpp"
#include "l2swbm/network.hpp"
#include "l2swbm/priors.hpp"

namespace l2swbm {

// Builds the network for `config` over the aligned observations. The table's
// span must equal the configuration's span and hold a level series (T+1
// entries) for every lake. Component series for I and extra level sources
// are ignored.
Network build_network(const ModelConfig& config, const PriorSpec& priors, const AlignedTable& data);

// Node counts implied by the configuration and the set of observation
// sources in the table, independent of the builder.
NodeCounts expected_counts(const ModelConfig& config, const AlignedTable& data);

// Observation sources of latent components for one lake, in component then
// source order.
std::vector<const AlignedSeries*> component_sources(const AlignedTable& data, const std::string& lake);

}  // namespace l2swbm
