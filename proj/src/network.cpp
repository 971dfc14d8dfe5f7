#include "l2swbm/network.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

#include "l2swbm/errors.hpp"

namespace l2swbm {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5 * ln(2*pi)

double normal_logpdf(double x, double mean, double precision) {
  const double r = x - mean;
  return 0.5 * std::log(precision) - kHalfLog2Pi - 0.5 * precision * r * r;
}

double gamma_logpdf(double x, double shape, double rate) {
  return shape * std::log(rate) - std::lgamma(shape) + (shape - 1.0) * std::log(x) - rate * x;
}

double lognormal_logpdf(double x, double log_mean, double log_precision) {
  const double lx = std::log(x);
  return normal_logpdf(lx, log_mean, log_precision) - lx;
}

std::string lake_name(int lake, const std::vector<std::string>& lakes) {
  if (lake >= 0 && static_cast<std::size_t>(lake) < lakes.size()) return lakes[static_cast<std::size_t>(lake)];
  return "L" + std::to_string(lake);
}

int scan_rank(Symbol s) {
  switch (s) {
    case Symbol::EpsC:
    case Symbol::Eps: return 1;
    case Symbol::EtaC:
    case Symbol::Eta: return 2;
    case Symbol::TauEps:
    case Symbol::TauEta:
    case Symbol::TauY:
    case Symbol::TauDeltaH: return 3;
    default: return 0;
  }
}

}  // namespace

NodeId generic_id(std::string label) {
  NodeId id;
  id.symbol = Symbol::Generic;
  id.label = std::move(label);
  return id;
}

const char* to_string(UpdateKind k) {
  switch (k) {
    case UpdateKind::ConjugateNormal: return "conjugate-normal";
    case UpdateKind::ConjugateGamma: return "conjugate-gamma";
    case UpdateKind::Slice: return "slice";
  }
  return "?";
}

std::string render_name(const NodeId& id, const std::vector<std::string>& lakes) {
  const std::string L = lake_name(id.lake, lakes);
  const std::string c(1, component_char(id.component));
  const std::string n = std::to_string(id.source);
  const std::string k = std::to_string(id.index);
  switch (id.symbol) {
    case Symbol::Theta: return c + "[" + L + "," + k + "]";
    case Symbol::Inflow: return "I[" + L + "," + k + "]";
    case Symbol::Balance: return "b[" + L + "," + k + "]";
    case Symbol::DeltaH: return "dH[" + L + "," + k + "]";
    case Symbol::YDeltaH: return "y_dH[" + L + "," + k + "]";
    case Symbol::Y: return "y[" + L + "," + c + "," + n + "," + k + "]";
    case Symbol::EpsC: return "eps_c[" + L + "," + k + "]";
    case Symbol::Eps: return "eps[" + L + "," + k + "]";
    case Symbol::TauEps: return "tau_eps[" + L + "," + k + "]";
    case Symbol::EtaC: return "eta_c[" + L + "," + c + "," + n + "," + k + "]";
    case Symbol::Eta: return "eta[" + L + "," + c + "," + n + "," + k + "]";
    case Symbol::TauEta: return "tau_eta[" + L + "," + c + "," + n + "," + k + "]";
    case Symbol::TauY: return "tau_y[" + L + "," + c + "," + n + "]";
    case Symbol::TauDeltaH: return "tau_dH[" + L + "]";
    case Symbol::Generic: return id.label;
  }
  return id.label;
}

bool glob_match(std::string_view p, std::string_view t) {
  std::size_t pi = 0, ti = 0, star = std::string_view::npos, mark = 0;
  while (ti < t.size()) {
    if (pi < p.size() && (p[pi] == '?' || p[pi] == t[ti])) {
      ++pi;
      ++ti;
    } else if (pi < p.size() && p[pi] == '*') {
      star = pi++;
      mark = ti;
    } else if (star != std::string_view::npos) {
      pi = star + 1;
      ti = ++mark;
    } else {
      return false;
    }
  }
  while (pi < p.size() && p[pi] == '*') ++pi;
  return pi == p.size();
}

double SliceConditional::log_density(double x) const {
  if (!(x > 0.0) || !std::isfinite(x)) return kNegInf;
  double lp;
  if (prior == Family::Gamma) {
    lp = (p1 - 1.0) * std::log(x) - p2 * x;
  } else {
    const double lx = std::log(x);
    lp = -lx - 0.5 * p2 * (lx - p1) * (lx - p1);
  }
  const double d = x - m;
  return lp - 0.5 * a * d * d;
}

// ---------------------------------------------------------------------------

NetworkBuilder::NetworkBuilder(std::vector<std::string> lake_names) : lakes_(std::move(lake_names)) {}

NodeIndex NetworkBuilder::push(Node n) {
  n.name = render_name(n.id, lakes_);
  auto index = static_cast<NodeIndex>(nodes_.size());
  if (!by_name_.emplace(n.name, index).second) throw BuildError("duplicate node name " + n.name);
  nodes_.push_back(std::move(n));
  return index;
}

void NetworkBuilder::check_refs(const Affine& a, const std::string& who) const {
  for (const auto& t : a.terms) {
    if (t.node < 0 || static_cast<std::size_t>(t.node) >= nodes_.size()) {
      throw BuildError(who + ": parent reference " + std::to_string(t.node) + " does not resolve");
    }
    if (nodes_[static_cast<std::size_t>(t.node)].kind == NodeKind::Observed) {
      throw BuildError(who + ": observed node " + nodes_[static_cast<std::size_t>(t.node)].name +
                       " cannot be a parent");
    }
  }
}

void NetworkBuilder::check_precision(const PrecisionRef& p, const std::string& who) const {
  if (p.node == kNoNode) {
    if (!(p.constant > 0.0) || !std::isfinite(p.constant)) {
      throw BuildError(who + ": constant precision must be positive and finite");
    }
    return;
  }
  if (p.node < 0 || static_cast<std::size_t>(p.node) >= nodes_.size()) {
    throw BuildError(who + ": precision reference does not resolve");
  }
  const Node& n = nodes_[static_cast<std::size_t>(p.node)];
  if (n.kind != NodeKind::Stochastic || n.family != Family::Gamma) {
    throw BuildError(who + ": precision node " + n.name + " must be a stochastic Gamma node");
  }
}

NodeIndex NetworkBuilder::add_normal(NodeId id, Affine mean, PrecisionRef precision) {
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Stochastic;
  n.family = Family::Normal;
  const std::string who = render_name(n.id, lakes_);
  check_refs(mean, who);
  check_precision(precision, who);
  n.mean = std::move(mean);
  n.precision = precision;
  return push(std::move(n));
}

NodeIndex NetworkBuilder::add_gamma(NodeId id, double shape, double rate) {
  if (!(shape > 0.0) || !(rate > 0.0)) {
    throw BuildError(render_name(id, lakes_) + ": gamma shape and rate must be positive");
  }
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Stochastic;
  n.family = Family::Gamma;
  n.p1 = shape;
  n.p2 = rate;
  return push(std::move(n));
}

NodeIndex NetworkBuilder::add_lognormal(NodeId id, double log_mean, double log_precision) {
  if (!(log_precision > 0.0) || !std::isfinite(log_mean)) {
    throw BuildError(render_name(id, lakes_) + ": invalid log-normal parameters");
  }
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Stochastic;
  n.family = Family::LogNormal;
  n.p1 = log_mean;
  n.p2 = log_precision;
  return push(std::move(n));
}

NodeIndex NetworkBuilder::add_deterministic(NodeId id, Affine expr) {
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Deterministic;
  check_refs(expr, render_name(n.id, lakes_));
  n.mean = std::move(expr);
  return push(std::move(n));
}

NodeIndex NetworkBuilder::add_observed(NodeId id, Affine mean, PrecisionRef precision,
                                       std::optional<double> datum) {
  Node n;
  n.id = std::move(id);
  n.kind = NodeKind::Observed;
  n.family = Family::Normal;
  const std::string who = render_name(n.id, lakes_);
  check_refs(mean, who);
  check_precision(precision, who);
  n.mean = std::move(mean);
  n.precision = precision;
  n.datum = datum;
  return push(std::move(n));
}

Network NetworkBuilder::finish() && {
  Network net;
  net.lakes_ = std::move(lakes_);
  net.nodes_ = std::move(nodes_);
  net.by_name_ = std::move(by_name_);
  const std::size_t N = net.nodes_.size();

  // Factors: every Normal stochastic node and every unmasked observation.
  for (std::size_t i = 0; i < N; ++i) {
    Node& n = net.nodes_[i];
    const bool is_factor = (n.kind == NodeKind::Stochastic && n.family == Family::Normal) ||
                           (n.kind == NodeKind::Observed && n.datum.has_value());
    if (is_factor) {
      n.factor = static_cast<std::int32_t>(net.factor_node_.size());
      net.factor_node_.push_back(static_cast<NodeIndex>(i));
    }
    if (n.kind == NodeKind::Deterministic) net.deterministic_.push_back(static_cast<NodeIndex>(i));
  }

  // Flatten deterministic expressions onto stochastic nodes.
  std::vector<std::vector<Term>> expansion(N);
  std::vector<double> acc(N, 0.0);
  std::vector<NodeIndex> touched;
  auto flatten = [&](const Affine& a) {
    touched.clear();
    auto add = [&](NodeIndex s, double c) {
      if (acc[static_cast<std::size_t>(s)] == 0.0) touched.push_back(s);
      acc[static_cast<std::size_t>(s)] += c;
    };
    for (const auto& t : a.terms) {
      const Node& p = net.nodes_[static_cast<std::size_t>(t.node)];
      if (p.kind == NodeKind::Stochastic) {
        add(t.node, t.coef);
      } else {
        for (const auto& e : expansion[static_cast<std::size_t>(t.node)]) add(e.node, t.coef * e.coef);
      }
    }
    std::sort(touched.begin(), touched.end());
    touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
    std::vector<Term> row;
    row.reserve(touched.size());
    for (NodeIndex s : touched) {
      double c = acc[static_cast<std::size_t>(s)];
      acc[static_cast<std::size_t>(s)] = 0.0;
      if (c != 0.0) row.push_back(Term{s, c});
    }
    return row;
  };

  std::vector<std::vector<Term>> factor_rows(net.factor_node_.size());
  for (std::size_t i = 0; i < N; ++i) {
    const Node& n = net.nodes_[i];
    if (n.kind == NodeKind::Deterministic) expansion[i] = flatten(n.mean);
    if (n.factor >= 0) factor_rows[static_cast<std::size_t>(n.factor)] = flatten(n.mean);
  }
  expansion.clear();

  // CSR: stochastic node -> (factor, coefficient) and precision node -> factors.
  std::vector<std::int32_t> app_count(N + 1, 0), prec_count(N + 1, 0);
  for (std::size_t f = 0; f < factor_rows.size(); ++f) {
    for (const auto& t : factor_rows[f]) ++app_count[static_cast<std::size_t>(t.node) + 1];
    const Node& fn = net.nodes_[static_cast<std::size_t>(net.factor_node_[f])];
    if (fn.precision.node != kNoNode) ++prec_count[static_cast<std::size_t>(fn.precision.node) + 1];
  }
  for (std::size_t i = 0; i < N; ++i) {
    app_count[i + 1] += app_count[i];
    prec_count[i + 1] += prec_count[i];
  }
  net.app_offset_ = app_count;
  net.prec_offset_ = prec_count;
  net.app_factor_.resize(static_cast<std::size_t>(app_count[N]));
  net.app_coef_.resize(static_cast<std::size_t>(app_count[N]));
  net.prec_factor_.resize(static_cast<std::size_t>(prec_count[N]));
  std::vector<std::int32_t> app_fill(app_count.begin(), app_count.end() - 1);
  std::vector<std::int32_t> prec_fill(prec_count.begin(), prec_count.end() - 1);
  for (std::size_t f = 0; f < factor_rows.size(); ++f) {
    for (const auto& t : factor_rows[f]) {
      auto slot = static_cast<std::size_t>(app_fill[static_cast<std::size_t>(t.node)]++);
      net.app_factor_[slot] = static_cast<std::int32_t>(f);
      net.app_coef_[slot] = t.coef;
    }
    const Node& fn = net.nodes_[static_cast<std::size_t>(net.factor_node_[f])];
    if (fn.precision.node != kNoNode) {
      auto slot = static_cast<std::size_t>(prec_fill[static_cast<std::size_t>(fn.precision.node)]++);
      net.prec_factor_[slot] = static_cast<std::int32_t>(f);
    }
  }

  // Update plan in insertion order.
  net.kind_of_.assign(N, -1);
  for (std::size_t i = 0; i < N; ++i) {
    const Node& n = net.nodes_[i];
    if (n.kind != NodeKind::Stochastic) continue;
    const bool in_means = net.app_offset_[i + 1] > net.app_offset_[i];
    const bool is_precision = net.prec_offset_[i + 1] > net.prec_offset_[i];
    UpdateKind kind;
    if (n.family == Family::Normal && !is_precision) {
      kind = UpdateKind::ConjugateNormal;
    } else if (n.family == Family::Gamma && is_precision && !in_means) {
      kind = UpdateKind::ConjugateGamma;
    } else if ((n.family == Family::Gamma || n.family == Family::LogNormal) && !is_precision) {
      kind = UpdateKind::Slice;
    } else {
      throw ScheduleError("node " + n.name + " has no supported full conditional");
    }
    net.kind_of_[i] = static_cast<std::int8_t>(kind);
    net.plan_.push_back(PlanEntry{static_cast<NodeIndex>(i), kind});
  }
  // Systematic scan grouped by class: components, process error, bias, precisions.
  std::stable_sort(net.plan_.begin(), net.plan_.end(), [&](const PlanEntry& a, const PlanEntry& b) {
    return scan_rank(net.node(a.node).id.symbol) < scan_rank(net.node(b.node).id.symbol);
  });
  return net;
}

// ---------------------------------------------------------------------------

NodeCounts Network::counts() const {
  NodeCounts c;
  for (const auto& n : nodes_) {
    switch (n.kind) {
      case NodeKind::Stochastic: ++c.stochastic; break;
      case NodeKind::Deterministic: ++c.deterministic; break;
      case NodeKind::Observed: ++c.observed; break;
    }
  }
  return c;
}

std::optional<NodeIndex> Network::find(std::string_view name) const {
  auto it = by_name_.find(std::string(name));
  if (it == by_name_.end()) return std::nullopt;
  return it->second;
}

NodeIndex Network::at(std::string_view name) const {
  if (auto i = find(name)) return *i;
  throw Error("network has no node named " + std::string(name));
}

UpdateKind Network::update_kind(NodeIndex i) const {
  auto k = kind_of_[static_cast<std::size_t>(i)];
  if (k < 0) throw ScheduleError("node " + node(i).name + " is not stochastic");
  return static_cast<UpdateKind>(k);
}

std::vector<NodeIndex> Network::select(const std::vector<std::string>& patterns) const {
  std::vector<NodeIndex> out;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    if (nodes_[i].kind == NodeKind::Observed) continue;
    for (const auto& p : patterns) {
      if (glob_match(p, nodes_[i].name)) {
        out.push_back(static_cast<NodeIndex>(i));
        break;
      }
    }
  }
  return out;
}

std::vector<Network::Appearance> Network::appearances(NodeIndex i) const {
  std::vector<Appearance> out;
  for (auto k = app_offset_[static_cast<std::size_t>(i)]; k < app_offset_[static_cast<std::size_t>(i) + 1]; ++k) {
    out.push_back(Appearance{app_factor_[static_cast<std::size_t>(k)], app_coef_[static_cast<std::size_t>(k)]});
  }
  return out;
}

double Network::affine_value(const Affine& a, const std::vector<double>& v) const {
  double x = a.constant;
  for (const auto& t : a.terms) x += t.coef * v[static_cast<std::size_t>(t.node)];
  return x;
}

LatentState Network::blank_state() const {
  LatentState s;
  s.value.assign(nodes_.size(), 0.0);
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.kind == NodeKind::Observed) {
      s.value[i] = n.datum ? *n.datum : std::numeric_limits<double>::quiet_NaN();
    }
  }
  s.factor_mean.assign(factor_node_.size(), 0.0);
  refresh(s);
  return s;
}

void Network::refresh(LatentState& s) const {
  for (NodeIndex d : deterministic_) {
    s.value[static_cast<std::size_t>(d)] = affine_value(node(d).mean, s.value);
  }
  for (std::size_t f = 0; f < factor_node_.size(); ++f) {
    s.factor_mean[f] = affine_value(node(factor_node_[f]).mean, s.value);
  }
}

double Network::log_joint(const LatentState& s) const {
  if (s.value.size() != nodes_.size()) throw Error("state dimension does not match network");
  std::vector<double> v = s.value;
  for (NodeIndex d : deterministic_) v[static_cast<std::size_t>(d)] = affine_value(node(d).mean, v);
  double total = 0.0;
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    if (n.kind == NodeKind::Deterministic) continue;
    if (n.kind == NodeKind::Observed && !n.datum) continue;
    const double x = v[i];
    switch (n.family) {
      case Family::Normal: {
        const double tau = precision_value(n.precision, v);
        if (!(tau > 0.0)) return kNegInf;
        total += normal_logpdf(x, affine_value(n.mean, v), tau);
        break;
      }
      case Family::Gamma:
        if (!(x > 0.0)) return kNegInf;
        total += gamma_logpdf(x, n.p1, n.p2);
        break;
      case Family::LogNormal:
        if (!(x > 0.0)) return kNegInf;
        total += lognormal_logpdf(x, n.p1, n.p2);
        break;
      case Family::None: break;
    }
  }
  return total;
}

double Network::deviance(const LatentState& s) const {
  double total = 0.0;
  for (std::size_t f = 0; f < factor_node_.size(); ++f) {
    const Node& n = node(factor_node_[f]);
    if (n.kind != NodeKind::Observed) continue;
    total += normal_logpdf(s.value[static_cast<std::size_t>(factor_node_[f])], affine_value(n.mean, s.value),
                           precision_value(n.precision, s.value));
  }
  return -2.0 * total;
}

FullConditional Network::full_conditional(NodeIndex i, const LatentState& s) const {
  const auto idx = static_cast<std::size_t>(i);
  const Node& n = nodes_[idx];
  const UpdateKind kind = update_kind(i);
  const double x = s.value[idx];

  if (kind == UpdateKind::ConjugateGamma) {
    double shape = n.p1;
    double rate = n.p2;
    for (auto k = prec_offset_[idx]; k < prec_offset_[idx + 1]; ++k) {
      const auto f = static_cast<std::size_t>(prec_factor_[static_cast<std::size_t>(k)]);
      const double r = s.value[static_cast<std::size_t>(factor_node_[f])] - s.factor_mean[f];
      shape += 0.5;
      rate += 0.5 * r * r;
    }
    return GammaConditional{shape, rate};
  }

  // Likelihood part: sum over factors whose mean contains x with coefficient a:
  // precision A = sum tau a^2, linear term B = sum tau a (y - mean + a x).
  double A = 0.0;
  double B = 0.0;
  for (auto k = app_offset_[idx]; k < app_offset_[idx + 1]; ++k) {
    const auto f = static_cast<std::size_t>(app_factor_[static_cast<std::size_t>(k)]);
    const double a = app_coef_[static_cast<std::size_t>(k)];
    const Node& fn = node(factor_node_[f]);
    const double tau = precision_value(fn.precision, s.value);
    const double partial = s.value[static_cast<std::size_t>(factor_node_[f])] - s.factor_mean[f] + a * x;
    A += tau * a * a;
    B += tau * a * partial;
  }

  if (kind == UpdateKind::ConjugateNormal) {
    const double tau0 = precision_value(n.precision, s.value);
    const double mu0 = s.factor_mean[static_cast<std::size_t>(n.factor)];
    const double prec = tau0 + A;
    return NormalConditional{(tau0 * mu0 + B) / prec, prec};
  }

  SliceConditional sc;
  sc.prior = n.family;
  sc.p1 = n.p1;
  sc.p2 = n.p2;
  sc.a = A;
  sc.m = A > 0.0 ? B / A : 0.0;
  return sc;
}

void Network::set_value(NodeIndex i, double v, LatentState& s) const {
  const auto idx = static_cast<std::size_t>(i);
  const double delta = v - s.value[idx];
  s.value[idx] = v;
  if (delta == 0.0) return;
  for (auto k = app_offset_[idx]; k < app_offset_[idx + 1]; ++k) {
    s.factor_mean[static_cast<std::size_t>(app_factor_[static_cast<std::size_t>(k)])] +=
        app_coef_[static_cast<std::size_t>(k)] * delta;
  }
}

std::string Network::to_dot() const {
  std::ostringstream out;
  out << "digraph l2swbm {\n  rankdir=LR;\n";
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    const char* shape = n.kind == NodeKind::Stochastic     ? "ellipse"
                        : n.kind == NodeKind::Deterministic ? "diamond"
                                                            : "box";
    out << "  n" << i << " [label=\"" << n.name << "\", shape=" << shape;
    if (n.kind == NodeKind::Observed && !n.datum) out << ", style=dashed";
    out << "];\n";
  }
  for (std::size_t i = 0; i < nodes_.size(); ++i) {
    const Node& n = nodes_[i];
    for (const auto& t : n.mean.terms) out << "  n" << t.node << " -> n" << i << ";\n";
    if (n.precision.node != kNoNode) out << "  n" << n.precision.node << " -> n" << i << " [style=dotted];\n";
  }
  out << "}\n";
  return out.str();
}

}  // namespace l2swbm
