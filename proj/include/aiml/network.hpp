#pragma once

// Discrete Bayesian networks: structure, CPTs, chain-rule probabilities,
// ancestral sampling and maximum-likelihood estimation from weighted
// complete data.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <memory>
#include <numeric>
#include <optional>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "aiml/rng.hpp"

namespace aiml {

struct NodeSpec {
  std::string name;
  std::vector<std::string> states;
  std::vector<std::string> parents;

  bool operator==(const NodeSpec&) const = default;
};

// One CPT per node, row-major: row = parent configuration (mixed radix, last
// declared parent varying fastest), column = node state.
using Cpt = std::vector<double>;
using Cpts = std::vector<Cpt>;

// Per node, one (possibly fractional) count per parent configuration.
using RowCounts = std::vector<std::vector<double>>;

// One state index per network node, in node declaration order.
using Assignment = std::vector<int>;

// Raw, unchecked network description as read from a file or assembled by
// hand. Becomes a Network once validate_network reports nothing.
struct NetworkSpec {
  std::string name;
  std::vector<NodeSpec> nodes;
  Cpts cpts;
};

struct Diagnostic {
  std::string location;
  std::string message;
};

inline std::string to_string(const Diagnostic& d) {
  return d.location + ": " + d.message;
}

class NetworkError : public std::runtime_error {
 public:
  explicit NetworkError(std::vector<Diagnostic> diagnostics)
      : std::runtime_error(summarize(diagnostics)),
        diagnostics_(std::move(diagnostics)) {}

  const std::vector<Diagnostic>& diagnostics() const { return diagnostics_; }

 private:
  static std::string summarize(const std::vector<Diagnostic>& ds) {
    std::string out = "invalid network";
    for (const auto& d : ds) out += "\n  " + to_string(d);
    return out;
  }
  std::vector<Diagnostic> diagnostics_;
};

inline constexpr double kRowSumTolerance = 1e-9;

namespace detail {

inline std::string format_number(double v) {
  std::ostringstream os;
  os.precision(10);
  os << v;
  return os.str();
}

// Structural checks only; returns node order or nullopt with diagnostics.
inline std::optional<std::vector<std::size_t>> check_structure(
    const std::vector<NodeSpec>& nodes, std::vector<Diagnostic>& out) {
  std::map<std::string, std::size_t> index;
  bool ok = true;
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto& n = nodes[i];
    const std::string where = "node " + n.name;
    if (n.name.empty()) {
      out.push_back({"node #" + std::to_string(i), "empty name"});
      ok = false;
    }
    if (!index.emplace(n.name, i).second) {
      out.push_back({where, "duplicate node name"});
      ok = false;
    }
    if (n.states.size() < 2) {
      out.push_back({where, "needs at least 2 states"});
      ok = false;
    }
    std::unordered_set<std::string> seen;
    for (const auto& s : n.states) {
      if (s.empty()) {
        out.push_back({where, "empty state label"});
        ok = false;
      } else if (!seen.insert(s).second) {
        out.push_back({where, "duplicate state label '" + s + "'"});
        ok = false;
      }
    }
  }
  std::vector<std::vector<std::size_t>> parents(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    std::unordered_set<std::string> seen;
    for (const auto& p : nodes[i].parents) {
      const std::string where = "node " + nodes[i].name;
      auto it = index.find(p);
      if (it == index.end()) {
        out.push_back({where, "unknown parent '" + p + "'"});
        ok = false;
        continue;
      }
      if (!seen.insert(p).second) {
        out.push_back({where, "duplicate parent '" + p + "'"});
        ok = false;
        continue;
      }
      parents[i].push_back(it->second);
    }
  }
  if (!ok) return std::nullopt;

  // Kahn's algorithm; whatever remains lies on or behind a cycle.
  std::vector<std::size_t> indegree(nodes.size(), 0);
  std::vector<std::vector<std::size_t>> children(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    indegree[i] = parents[i].size();
    for (std::size_t p : parents[i]) children[p].push_back(i);
  }
  std::vector<std::size_t> order;
  std::vector<std::size_t> ready;
  for (std::size_t i = 0; i < nodes.size(); ++i)
    if (indegree[i] == 0) ready.push_back(i);
  while (!ready.empty()) {
    // smallest index first for a deterministic order
    auto it = std::min_element(ready.begin(), ready.end());
    const std::size_t v = *it;
    ready.erase(it);
    order.push_back(v);
    for (std::size_t c : children[v])
      if (--indegree[c] == 0) ready.push_back(c);
  }
  if (order.size() != nodes.size()) {
    std::string members;
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (indegree[i] > 0) members += (members.empty() ? "" : ",") + nodes[i].name;
    }
    out.push_back({"graph", "parent relation is cyclic (involving " + members + ")"});
    return std::nullopt;
  }
  return order;
}

inline std::size_t config_count(const std::vector<NodeSpec>& nodes,
                                 const std::map<std::string, std::size_t>& index,
                                 std::size_t i) {
  std::size_t n = 1;
  for (const auto& p : nodes[i].parents) n *= nodes[index.at(p)].states.size();
  return n;
}

}  // namespace detail

// Every violated invariant, with location. Empty means the spec is usable.
inline std::vector<Diagnostic> validate_network(const NetworkSpec& spec) {
  std::vector<Diagnostic> out;
  if (!detail::check_structure(spec.nodes, out)) return out;

  std::map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) index[spec.nodes[i].name] = i;

  if (spec.cpts.size() != spec.nodes.size()) {
    out.push_back({"network", "expected " + std::to_string(spec.nodes.size()) +
                                  " CPTs, found " + std::to_string(spec.cpts.size())});
    return out;
  }
  for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
    const auto& node = spec.nodes[i];
    const std::size_t m = node.states.size();
    const std::size_t rows = detail::config_count(spec.nodes, index, i);
    const auto& cpt = spec.cpts[i];
    if (cpt.size() != rows * m) {
      out.push_back({"cpt " + node.name,
                     "expected " + std::to_string(rows) + " rows of " + std::to_string(m) +
                         " entries, found " + std::to_string(cpt.size()) + " entries"});
      continue;
    }
    for (std::size_t r = 0; r < rows; ++r) {
      const std::string where = "cpt " + node.name + " row " + std::to_string(r);
      double sum = 0.0;
      for (std::size_t s = 0; s < m; ++s) {
        const double v = cpt[r * m + s];
        if (!std::isfinite(v) || v < 0.0 || v > 1.0) {
          out.push_back({where, "entry " + detail::format_number(v) + " outside [0,1]"});
        }
        sum += v;
      }
      if (!(std::abs(sum - 1.0) <= kRowSumTolerance)) {
        out.push_back({where, "row sum " + detail::format_number(sum) + " != 1"});
      }
    }
  }
  return out;
}

// Mixed-radix encoding of assignments into 64-bit keys (first variable most
// significant).
class AssignmentCodec {
 public:
  AssignmentCodec() = default;
  explicit AssignmentCodec(std::vector<std::size_t> cardinalities)
      : card_(std::move(cardinalities)), stride_(card_.size(), 1) {
    double size = 1.0;
    std::uint64_t acc = 1;
    for (std::size_t k = card_.size(); k-- > 0;) {
      stride_[k] = acc;
      size *= static_cast<double>(card_[k]);
      if (size >= 18446744073709551615.0) {
        overflow_ = true;
      } else {
        acc *= card_[k];
      }
    }
    size_ = size;
  }

  // |W| as a double; exact up to 2^53.
  double state_space_size() const { return size_; }
  bool fits() const { return !overflow_; }
  std::size_t arity() const { return card_.size(); }
  std::span<const std::size_t> cardinalities() const { return card_; }

  std::uint64_t encode(std::span<const int> x) const {
    if (overflow_) throw std::length_error("state space does not fit in 64-bit keys");
    std::uint64_t key = 0;
    for (std::size_t k = 0; k < card_.size(); ++k)
      key += static_cast<std::uint64_t>(x[k]) * stride_[k];
    return key;
  }

  Assignment decode(std::uint64_t key) const {
    Assignment x(card_.size());
    for (std::size_t k = 0; k < card_.size(); ++k) {
      x[k] = static_cast<int>(key / stride_[k]);
      key %= stride_[k];
    }
    return x;
  }

  std::uint64_t stride(std::size_t k) const { return stride_[k]; }

 private:
  std::vector<std::size_t> card_;
  std::vector<std::uint64_t> stride_;
  double size_ = 1.0;
  bool overflow_ = false;
};

// Validated, immutable-structure Bayesian network. Copies share the structure.
class Network {
 public:
  static Network from_spec(NetworkSpec spec) {
    auto diagnostics = validate_network(spec);
    if (!diagnostics.empty()) throw NetworkError(std::move(diagnostics));
    Network net;
    net.structure_ = std::make_shared<const Structure>(build(spec));
    net.cpts_ = std::move(spec.cpts);
    return net;
  }

  // Same structure with every row uniform.
  static Network uniform(std::string name, std::vector<NodeSpec> nodes) {
    std::vector<Diagnostic> out;
    if (!detail::check_structure(nodes, out)) throw NetworkError(std::move(out));
    NetworkSpec spec{std::move(name), std::move(nodes), {}};
    std::map<std::string, std::size_t> index;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) index[spec.nodes[i].name] = i;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) {
      const std::size_t m = spec.nodes[i].states.size();
      spec.cpts.emplace_back(detail::config_count(spec.nodes, index, i) * m, 1.0 / m);
    }
    return from_spec(std::move(spec));
  }

  Network with_cpts(Cpts cpts) const {
    NetworkSpec s{name(), structure_->nodes, std::move(cpts)};
    auto diagnostics = validate_network(s);
    if (!diagnostics.empty()) throw NetworkError(std::move(diagnostics));
    Network net;
    net.structure_ = structure_;
    net.cpts_ = std::move(s.cpts);
    return net;
  }

  Network renamed(std::string new_name) const {
    NetworkSpec s = spec();
    s.name = std::move(new_name);
    return from_spec(std::move(s));
  }

  NetworkSpec spec() const { return {structure_->name, structure_->nodes, cpts_}; }

  const std::string& name() const { return structure_->name; }
  std::size_t size() const { return structure_->nodes.size(); }
  const std::vector<NodeSpec>& nodes() const { return structure_->nodes; }
  const NodeSpec& node(std::size_t i) const { return structure_->nodes[i]; }
  std::size_t cardinality(std::size_t i) const { return structure_->card[i]; }
  std::span<const std::size_t> cardinalities() const { return structure_->card; }
  std::span<const std::size_t> parents(std::size_t i) const { return structure_->parents[i]; }
  std::size_t num_configs(std::size_t i) const { return structure_->configs[i]; }
  std::span<const std::size_t> topological_order() const { return structure_->order; }
  const AssignmentCodec& codec() const { return structure_->codec; }

  const Cpts& cpts() const { return cpts_; }
  const Cpt& cpt(std::size_t i) const { return cpts_[i]; }
  std::span<const double> row(std::size_t i, std::size_t config) const {
    const std::size_t m = structure_->card[i];
    return std::span<const double>(cpts_[i]).subspan(config * m, m);
  }

  // Parent configuration of node i selected by x (only parent entries are read).
  std::size_t config_index(std::size_t i, std::span<const int> x) const {
    const auto& ps = structure_->parents[i];
    const auto& st = structure_->parent_stride[i];
    std::size_t c = 0;
    for (std::size_t k = 0; k < ps.size(); ++k) c += static_cast<std::size_t>(x[ps[k]]) * st[k];
    return c;
  }

  // Parent states for configuration index `config` of node i.
  std::vector<int> config_states(std::size_t i, std::size_t config) const {
    const auto& ps = structure_->parents[i];
    const auto& st = structure_->parent_stride[i];
    std::vector<int> out(ps.size());
    for (std::size_t k = 0; k < ps.size(); ++k) {
      out[k] = static_cast<int>(config / st[k]);
      config %= st[k];
    }
    return out;
  }

  std::optional<std::size_t> find(const std::string& node_name) const {
    auto it = structure_->index.find(node_name);
    if (it == structure_->index.end()) return std::nullopt;
    return it->second;
  }

  std::size_t index_of(const std::string& node_name) const {
    auto i = find(node_name);
    if (!i) throw std::invalid_argument("unknown node '" + node_name + "'");
    return *i;
  }

  std::optional<int> state_index(std::size_t i, const std::string& label) const {
    const auto& st = structure_->nodes[i].states;
    auto it = std::find(st.begin(), st.end(), label);
    if (it == st.end()) return std::nullopt;
    return static_cast<int>(it - st.begin());
  }

  bool same_structure(const Network& other) const {
    return structure_ == other.structure_ || structure_->nodes == other.structure_->nodes;
  }

  std::size_t num_parameters() const {
    std::size_t n = 0;
    for (const auto& c : cpts_) n += c.size();
    return n;
  }

 private:
  struct Structure {
    std::string name;
    std::vector<NodeSpec> nodes;
    std::vector<std::size_t> card;
    std::vector<std::vector<std::size_t>> parents;
    std::vector<std::vector<std::size_t>> parent_stride;
    std::vector<std::size_t> configs;
    std::vector<std::size_t> order;
    std::map<std::string, std::size_t> index;
    AssignmentCodec codec;
  };

  static Structure build(const NetworkSpec& spec) {
    Structure s;
    s.name = spec.name;
    s.nodes = spec.nodes;
    for (std::size_t i = 0; i < spec.nodes.size(); ++i) s.index[spec.nodes[i].name] = i;
    for (const auto& n : spec.nodes) s.card.push_back(n.states.size());
    for (const auto& n : spec.nodes) {
      std::vector<std::size_t> ps;
      for (const auto& p : n.parents) ps.push_back(s.index.at(p));
      std::vector<std::size_t> stride(ps.size(), 1);
      std::size_t acc = 1;
      for (std::size_t k = ps.size(); k-- > 0;) {
        stride[k] = acc;
        acc *= s.card[ps[k]];
      }
      s.configs.push_back(acc);
      s.parents.push_back(std::move(ps));
      s.parent_stride.push_back(std::move(stride));
    }
    std::vector<Diagnostic> unused;
    s.order = *detail::check_structure(spec.nodes, unused);
    s.codec = AssignmentCodec(s.card);
    return s;
  }

  std::shared_ptr<const Structure> structure_;
  Cpts cpts_;
};

inline std::vector<Diagnostic> validate_network(const Network& net) {
  return validate_network(net.spec());
}

inline void check_assignment(const Network& net, std::span<const int> x) {
  if (x.size() != net.size()) {
    throw std::invalid_argument("assignment has " + std::to_string(x.size()) +
                                " entries, network has " + std::to_string(net.size()) +
                                " nodes");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (x[i] < 0 || static_cast<std::size_t>(x[i]) >= net.cardinality(i)) {
      throw std::out_of_range("state index " + std::to_string(x[i]) + " invalid for node " +
                              net.node(i).name);
    }
  }
}

// Chain rule, no validation of x. Hot path for the fitters.
inline double joint_probability_unchecked(const Network& net, std::span<const int> x) {
  double p = 1.0;
  for (std::size_t i = 0; i < net.size() && p > 0.0; ++i) {
    p *= net.row(i, net.config_index(i, x))[static_cast<std::size_t>(x[i])];
  }
  return p;
}

inline double log_joint_probability_unchecked(const Network& net, std::span<const int> x) {
  double lp = 0.0;
  for (std::size_t i = 0; i < net.size(); ++i) {
    lp += std::log(net.row(i, net.config_index(i, x))[static_cast<std::size_t>(x[i])]);
  }
  return lp;
}

inline double joint_probability(const Network& net, std::span<const int> x) {
  check_assignment(net, x);
  return joint_probability_unchecked(net, x);
}

inline Assignment sample_one(const Network& net, Rng& rng) {
  Assignment x(net.size(), 0);
  for (std::size_t i : net.topological_order()) {
    x[i] = static_cast<int>(draw_categorical(rng, net.row(i, net.config_index(i, x))));
  }
  return x;
}

// Ancestral sampling in topological order.
inline std::vector<Assignment> sample(const Network& net, std::size_t n, Rng& rng) {
  std::vector<Assignment> out;
  out.reserve(n);
  for (std::size_t k = 0; k < n; ++k) out.push_back(sample_one(net, rng));
  return out;
}

// Every CPT row replaced by normalized independent uniform(0,1) draws.
inline Network randomize_parameters(const Network& net, Rng& rng) {
  Cpts cpts = net.cpts();
  for (std::size_t i = 0; i < net.size(); ++i) {
    const std::size_t m = net.cardinality(i);
    for (std::size_t r = 0; r < net.num_configs(i); ++r) {
      double sum = 0.0;
      for (std::size_t s = 0; s < m; ++s) {
        const double u = uniform_open01(rng);
        cpts[i][r * m + s] = u;
        sum += u;
      }
      for (std::size_t s = 0; s < m; ++s) cpts[i][r * m + s] /= sum;
    }
  }
  return net.with_cpts(std::move(cpts));
}

// Result of fitting CPTs: the parameters and, per row, the number of (possibly
// fractional) cases the row was estimated from.
struct Estimate {
  Cpts cpts;
  RowCounts row_counts;
};

// Weighted family-count accumulator shared by complete-data ML, EM and AI&M.
// Uses Neumaier summation so accumulation order does not matter beyond
// round-off.
class FamilyCounts {
 public:
  explicit FamilyCounts(const Network& structure) : net_(&structure) {
    for (std::size_t i = 0; i < structure.size(); ++i) {
      sum_.emplace_back(structure.cpt(i).size(), 0.0);
      comp_.emplace_back(structure.cpt(i).size(), 0.0);
    }
  }

  void add(std::span<const int> x, double weight) {
    for (std::size_t i = 0; i < net_->size(); ++i) {
      const std::size_t cell =
          net_->config_index(i, x) * net_->cardinality(i) + static_cast<std::size_t>(x[i]);
      add_cell(i, cell, weight);
    }
  }

  // cell = config * cardinality + state
  void add_cell(std::size_t node, std::size_t cell, double weight) {
    double& s = sum_[node][cell];
    double& c = comp_[node][cell];
    const double t = s + weight;
    if (std::abs(s) >= std::abs(weight)) {
      c += (s - t) + weight;
    } else {
      c += (weight - t) + s;
    }
    s = t;
  }

  double cell(std::size_t node, std::size_t cell) const {
    return sum_[node][cell] + comp_[node][cell];
  }

  // Normalized rows; rows with zero parent count become uniform.
  Estimate estimate() const {
    Estimate e;
    for (std::size_t i = 0; i < net_->size(); ++i) {
      const std::size_t m = net_->cardinality(i);
      const std::size_t rows = net_->num_configs(i);
      Cpt cpt(rows * m);
      std::vector<double> k(rows, 0.0);
      for (std::size_t r = 0; r < rows; ++r) {
        double total = 0.0;
        for (std::size_t s = 0; s < m; ++s) total += cell(i, r * m + s);
        k[r] = total;
        for (std::size_t s = 0; s < m; ++s) {
          cpt[r * m + s] = total > 0.0 ? cell(i, r * m + s) / total : 1.0 / static_cast<double>(m);
        }
        // Renormalize so the row passes validation exactly.
        double sum = 0.0;
        for (std::size_t s = 0; s < m; ++s) sum += cpt[r * m + s];
        for (std::size_t s = 0; s < m; ++s) cpt[r * m + s] /= sum;
      }
      e.cpts.push_back(std::move(cpt));
      e.row_counts.push_back(std::move(k));
    }
    return e;
  }

 private:
  const Network* net_;
  Cpts sum_;
  Cpts comp_;
};

struct WeightedAssignment {
  Assignment x;
  double weight = 1.0;
};

inline Estimate ml_estimate(const Network& structure, std::span<const WeightedAssignment> data) {
  FamilyCounts counts(structure);
  for (const auto& d : data) {
    if (!(d.weight >= 0.0)) throw std::invalid_argument("negative case weight");
    check_assignment(structure, d.x);
    counts.add(d.x, d.weight);
  }
  return counts.estimate();
}

// theta_i -> (theta_i * k + 1) / (k + m) per row, k the row's case count and m
// the row length.
inline Cpts smooth(const Cpts& cpts, const RowCounts& counts) {
  if (cpts.size() != counts.size()) throw std::invalid_argument("smooth: node count mismatch");
  Cpts out = cpts;
  for (std::size_t i = 0; i < cpts.size(); ++i) {
    const std::size_t rows = counts[i].size();
    if (rows == 0 || cpts[i].size() % rows != 0) {
      throw std::invalid_argument("smooth: row count mismatch");
    }
    const std::size_t m = cpts[i].size() / rows;
    for (std::size_t r = 0; r < rows; ++r) {
      const double k = counts[i][r];
      if (!(k >= 0.0)) throw std::invalid_argument("smooth: negative row count");
      for (std::size_t s = 0; s < m; ++s) {
        out[i][r * m + s] = (cpts[i][r * m + s] * k + 1.0) / (k + static_cast<double>(m));
      }
    }
  }
  return out;
}

inline Network smooth(const Network& net, const RowCounts& counts) {
  return net.with_cpts(smooth(net.cpts(), counts));
}

// Calls f(x) for every x in the product of `card`, last variable fastest.
template <typename F>
void for_each_assignment(std::span<const std::size_t> card, F&& f) {
  Assignment x(card.size(), 0);
  for (std::size_t k = 0; k < card.size(); ++k)
    if (card[k] == 0) return;
  for (;;) {
    f(static_cast<const Assignment&>(x));
    std::size_t k = card.size();
    while (k > 0) {
      --k;
      if (static_cast<std::size_t>(++x[k]) < card[k]) break;
      x[k] = 0;
      if (k == 0) return;
    }
    if (card.empty()) return;
  }
}

}  // namespace aiml
