#pragma once

// Directed graphical model over scalar nodes with affine-Gaussian links.
//
// Nodes may only reference nodes added before them, so insertion order is a
// topological order. Normal densities ("factors") have a mean that is affine
// in other nodes and a precision that is either a constant or a Gamma node.
// At finish() every factor mean is flattened through deterministic nodes into
// a sparse row over stochastic nodes; these rows drive the O(degree)
// incremental bookkeeping used by the sampler.

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "l2swbm/calendar.hpp"
#include "l2swbm/model_config.hpp"

namespace l2swbm {

using NodeIndex = std::int32_t;
inline constexpr NodeIndex kNoNode = -1;

enum class Symbol : std::uint8_t {
  Theta,    // P, E, R, Q, D by component
  Inflow,   // I
  Balance,  // b: monthly balance terms
  DeltaH,
  YDeltaH,
  Y,        // component observation
  EpsC,
  Eps,
  TauEps,
  EtaC,
  Eta,
  TauEta,
  TauY,
  TauDeltaH,
  Generic,
};

// Structured identifier. Which fields are meaningful depends on the symbol;
// `index` is a 1-based month, window start, or calendar month.
struct NodeId {
  Symbol symbol = Symbol::Generic;
  int lake = -1;
  Component component = Component::P;
  int source = 0;
  int index = 0;
  std::string label;  // Generic nodes only
  bool operator==(const NodeId&) const = default;
};

NodeId generic_id(std::string label);

enum class NodeKind : std::uint8_t { Stochastic, Deterministic, Observed };
enum class Family : std::uint8_t { Normal, Gamma, LogNormal, None };
enum class UpdateKind : std::uint8_t { ConjugateNormal, ConjugateGamma, Slice };

const char* to_string(UpdateKind k);

struct Term {
  NodeIndex node = kNoNode;
  double coef = 0.0;
};

struct Affine {
  double constant = 0.0;
  std::vector<Term> terms;
};

struct PrecisionRef {
  double constant = 1.0;
  NodeIndex node = kNoNode;  // when set, the node's value is the precision
};

struct Node {
  NodeId id;
  std::string name;
  NodeKind kind = NodeKind::Stochastic;
  Family family = Family::None;
  Affine mean;  // Normal mean, or the deterministic expression
  PrecisionRef precision;
  double p1 = 0.0;  // Gamma shape | LogNormal log-mean
  double p2 = 0.0;  // Gamma rate  | LogNormal log-precision
  std::optional<double> datum;  // Observed only; empty when masked
  std::int32_t factor = -1;     // index into factors, or -1
};

struct NodeCounts {
  std::size_t stochastic = 0;
  std::size_t deterministic = 0;
  std::size_t observed = 0;
  std::size_t total() const { return stochastic + deterministic + observed; }
  bool operator==(const NodeCounts&) const = default;
};

// One value per node (observed nodes hold their datum, NaN when masked) plus
// the current mean of every factor. Chains own their state exclusively.
struct LatentState {
  std::vector<double> value;
  std::vector<double> factor_mean;
};

struct NormalConditional {
  double mean = 0.0;
  double precision = 1.0;
};

struct GammaConditional {
  double shape = 1.0;
  double rate = 1.0;
};

// Unnormalised log density of a P- or R-type node given everything else:
// log prior(x) - 0.5 * a * (x - m)^2, with support x > 0.
struct SliceConditional {
  Family prior = Family::Gamma;
  double p1 = 0.0;
  double p2 = 0.0;
  double a = 0.0;
  double m = 0.0;
  double log_density(double x) const;
};

using FullConditional = std::variant<NormalConditional, GammaConditional, SliceConditional>;

struct PlanEntry {
  NodeIndex node = kNoNode;
  UpdateKind kind = UpdateKind::ConjugateNormal;
};

class Network;

class NetworkBuilder {
 public:
  explicit NetworkBuilder(std::vector<std::string> lake_names = {});

  NodeIndex add_normal(NodeId id, Affine mean, PrecisionRef precision);
  NodeIndex add_gamma(NodeId id, double shape, double rate);
  NodeIndex add_lognormal(NodeId id, double log_mean, double log_precision);
  NodeIndex add_deterministic(NodeId id, Affine expr);
  NodeIndex add_observed(NodeId id, Affine mean, PrecisionRef precision, std::optional<double> datum);

  std::size_t size() const { return nodes_.size(); }
  const std::vector<std::string>& lakes() const { return lakes_; }

  // Flattens factor means, builds adjacency and the update plan. Throws
  // ScheduleError for nodes no sampler kernel can update.
  Network finish() &&;

 private:
  NodeIndex push(Node n);
  void check_refs(const Affine& a, const std::string& who) const;
  void check_precision(const PrecisionRef& p, const std::string& who) const;

  std::vector<std::string> lakes_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, NodeIndex> by_name_;
};

class Network {
 public:
  std::size_t size() const { return nodes_.size(); }
  const Node& node(NodeIndex i) const { return nodes_[static_cast<std::size_t>(i)]; }
  const std::vector<Node>& nodes() const { return nodes_; }
  const std::vector<PlanEntry>& update_plan() const { return plan_; }
  const std::vector<std::string>& lakes() const { return lakes_; }
  NodeCounts counts() const;

  std::optional<NodeIndex> find(std::string_view name) const;
  NodeIndex at(std::string_view name) const;  // throws Error when absent
  UpdateKind update_kind(NodeIndex i) const;

  // Nodes whose names match any pattern ('*' and '?' wildcards); stochastic
  // and deterministic nodes only, in index order.
  std::vector<NodeIndex> select(const std::vector<std::string>& patterns) const;

  // State with zero latent values, data filled in, and consistent derived
  // quantities.
  LatentState blank_state() const;
  // Recomputes deterministic values and factor means from stochastic values.
  void refresh(LatentState& s) const;

  // Sum of prior and unmasked-likelihood log densities; -inf outside support.
  double log_joint(const LatentState& s) const;
  // -2 * sum of unmasked observation log densities. Uses the state's
  // deterministic values, so the state must be refreshed.
  double deviance(const LatentState& s) const;

  // Requires a refreshed (or incrementally maintained) state.
  FullConditional full_conditional(NodeIndex i, const LatentState& s) const;
  // Sets a stochastic node's value and updates dependent factor means in
  // O(degree). Deterministic values are left stale until refresh().
  void set_value(NodeIndex i, double v, LatentState& s) const;

  std::string to_dot() const;

  // Flattened mean row of a factor over stochastic nodes.
  struct Appearance {
    std::int32_t factor;
    double coef;
  };
  std::vector<Appearance> appearances(NodeIndex i) const;

  double precision_value(const PrecisionRef& p, const std::vector<double>& v) const {
    return p.node == kNoNode ? p.constant : v[static_cast<std::size_t>(p.node)];
  }
  double affine_value(const Affine& a, const std::vector<double>& v) const;

  std::optional<ModelConfig> config;
  int months = 0;  // analysis length T, 0 for hand-built networks

 private:
  friend class NetworkBuilder;

  std::vector<std::string> lakes_;
  std::vector<Node> nodes_;
  std::unordered_map<std::string, NodeIndex> by_name_;
  std::vector<NodeIndex> factor_node_;  // factor -> node holding its value
  std::vector<std::int32_t> app_offset_;
  std::vector<std::int32_t> app_factor_;
  std::vector<double> app_coef_;
  std::vector<std::int32_t> prec_offset_;
  std::vector<std::int32_t> prec_factor_;
  std::vector<NodeIndex> deterministic_;
  std::vector<std::int8_t> kind_of_;  // UpdateKind per node, -1 if not stochastic
  std::vector<PlanEntry> plan_;
};

std::string render_name(const NodeId& id, const std::vector<std::string>& lakes);
bool glob_match(std::string_view pattern, std::string_view text);

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace l2swbm
