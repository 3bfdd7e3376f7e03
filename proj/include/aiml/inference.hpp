#pragma once

// Exact inference by variable elimination. Every query builds its own
// elimination order (min-fill, ties broken by node name) over the part of the
// network that is relevant to it: the ancestors of the observed and queried
// variables. Barren descendants sum to one and are dropped.

#include <algorithm>
#include <cmath>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "aiml/coarse_case.hpp"
#include "aiml/errors.hpp"
#include "aiml/network.hpp"

namespace aiml {

// Table over a sorted set of node indices, last variable fastest.
class Factor {
 public:
  Factor() : values_(1, 1.0) {}
  Factor(std::vector<std::size_t> vars, std::vector<std::size_t> card, std::vector<double> values)
      : vars_(std::move(vars)), card_(std::move(card)), values_(std::move(values)) {}

  std::span<const std::size_t> vars() const { return vars_; }
  std::span<const std::size_t> cardinalities() const { return card_; }
  std::span<const double> values() const { return values_; }
  std::vector<double>& mutable_values() { return values_; }

  bool contains(std::size_t v) const { return std::binary_search(vars_.begin(), vars_.end(), v); }

  double total() const {
    double s = 0.0;
    for (double v : values_) s += v;
    return s;
  }

  friend Factor operator*(const Factor& a, const Factor& b) {
    std::vector<std::size_t> vars;
    std::set_union(a.vars_.begin(), a.vars_.end(), b.vars_.begin(), b.vars_.end(),
                   std::back_inserter(vars));
    std::vector<std::size_t> card(vars.size());
    std::vector<std::size_t> sa(vars.size(), 0), sb(vars.size(), 0);
    for (std::size_t k = 0; k < vars.size(); ++k) {
      card[k] = a.contains(vars[k]) ? a.card_of(vars[k]) : b.card_of(vars[k]);
      sa[k] = a.stride_of(vars[k]);
      sb[k] = b.stride_of(vars[k]);
    }
    std::size_t n = 1;
    for (std::size_t c : card) n *= c;
    std::vector<double> values(n);
    std::vector<std::size_t> x(vars.size(), 0);
    std::size_t ia = 0, ib = 0;
    for (std::size_t idx = 0; idx < n; ++idx) {
      values[idx] = a.values_[ia] * b.values_[ib];
      for (std::size_t k = vars.size(); k-- > 0;) {
        if (++x[k] < card[k]) {
          ia += sa[k];
          ib += sb[k];
          break;
        }
        ia -= sa[k] * (card[k] - 1);
        ib -= sb[k] * (card[k] - 1);
        x[k] = 0;
      }
    }
    return Factor(std::move(vars), std::move(card), std::move(values));
  }

  Factor sum_out(std::size_t v) const {
    auto it = std::lower_bound(vars_.begin(), vars_.end(), v);
    if (it == vars_.end() || *it != v) return *this;
    const std::size_t pos = static_cast<std::size_t>(it - vars_.begin());
    std::size_t inner = 1;
    for (std::size_t k = pos + 1; k < vars_.size(); ++k) inner *= card_[k];
    const std::size_t c = card_[pos];
    const std::size_t outer = values_.size() / (inner * c);
    std::vector<double> out(outer * inner, 0.0);
    for (std::size_t o = 0; o < outer; ++o)
      for (std::size_t s = 0; s < c; ++s)
        for (std::size_t i = 0; i < inner; ++i) out[o * inner + i] += values_[(o * c + s) * inner + i];
    std::vector<std::size_t> vars = vars_, card = card_;
    vars.erase(vars.begin() + static_cast<std::ptrdiff_t>(pos));
    card.erase(card.begin() + static_cast<std::ptrdiff_t>(pos));
    return Factor(std::move(vars), std::move(card), std::move(out));
  }

 private:
  std::size_t card_of(std::size_t v) const {
    const auto pos = std::lower_bound(vars_.begin(), vars_.end(), v) - vars_.begin();
    return card_[static_cast<std::size_t>(pos)];
  }
  std::size_t stride_of(std::size_t v) const {
    std::size_t stride = 1;
    for (std::size_t k = vars_.size(); k-- > 0;) {
      if (vars_[k] == v) return stride;
      stride *= card_[k];
    }
    return 0;
  }

  std::vector<std::size_t> vars_;
  std::vector<std::size_t> card_;
  std::vector<double> values_;
};

namespace detail {

// CPT of node i as a factor over its unobserved family members.
inline Factor cpt_factor(const Network& net, std::size_t i, std::span<const int> evidence) {
  std::vector<std::size_t> family(net.parents(i).begin(), net.parents(i).end());
  family.push_back(i);
  std::vector<std::size_t> vars;
  for (std::size_t v : family)
    if (evidence[v] == kMissing) vars.push_back(v);
  std::sort(vars.begin(), vars.end());
  std::vector<std::size_t> card;
  for (std::size_t v : vars) card.push_back(net.cardinality(v));

  Assignment x(evidence.begin(), evidence.end());
  std::vector<double> values;
  std::size_t n = 1;
  for (std::size_t c : card) n *= c;
  values.reserve(n);
  for (std::size_t v : vars) x[v] = 0;
  for (std::size_t idx = 0; idx < n; ++idx) {
    values.push_back(net.row(i, net.config_index(i, x))[static_cast<std::size_t>(x[i])]);
    for (std::size_t k = vars.size(); k-- > 0;) {
      if (static_cast<std::size_t>(++x[vars[k]]) < card[k]) break;
      x[vars[k]] = 0;
    }
  }
  return Factor(std::move(vars), std::move(card), std::move(values));
}

// Ancestral closure of `seeds`.
inline std::vector<bool> ancestral_set(const Network& net, const std::vector<std::size_t>& seeds) {
  std::vector<bool> in(net.size(), false);
  std::vector<std::size_t> stack(seeds.begin(), seeds.end());
  while (!stack.empty()) {
    const std::size_t v = stack.back();
    stack.pop_back();
    if (in[v]) continue;
    in[v] = true;
    for (std::size_t p : net.parents(v)) stack.push_back(p);
  }
  return in;
}

// Greedy min-fill ordering of `targets` on the interaction graph of `scopes`.
inline std::vector<std::size_t> min_fill_order(const Network& net,
                                               const std::vector<std::vector<std::size_t>>& scopes,
                                               std::vector<std::size_t> targets) {
  std::vector<std::set<std::size_t>> adj(net.size());
  for (const auto& s : scopes)
    for (std::size_t a : s)
      for (std::size_t b : s)
        if (a != b) adj[a].insert(b);

  std::vector<std::size_t> order;
  while (!targets.empty()) {
    std::size_t best = 0;
    std::size_t best_fill = static_cast<std::size_t>(-1);
    for (std::size_t k = 0; k < targets.size(); ++k) {
      const std::size_t v = targets[k];
      std::size_t fill = 0;
      for (auto a = adj[v].begin(); a != adj[v].end(); ++a)
        for (auto b = std::next(a); b != adj[v].end(); ++b)
          if (!adj[*a].count(*b)) ++fill;
      if (fill < best_fill ||
          (fill == best_fill && net.node(v).name < net.node(targets[best]).name)) {
        best = k;
        best_fill = fill;
      }
    }
    const std::size_t v = targets[best];
    for (std::size_t a : adj[v])
      for (std::size_t b : adj[v])
        if (a != b) adj[a].insert(b);
    for (std::size_t a : adj[v]) adj[a].erase(v);
    adj[v].clear();
    order.push_back(v);
    targets.erase(targets.begin() + static_cast<std::ptrdiff_t>(best));
  }
  return order;
}

}  // namespace detail

// Unnormalized factor over the unobserved members of `keep`:
// f(y) = P(keep = y, evidence). Observed members of `keep` are dropped from
// the scope (they are fixed by the evidence).
inline Factor eliminate(const Network& net, std::span<const int> evidence,
                        std::span<const std::size_t> keep) {
  std::vector<std::size_t> seeds(keep.begin(), keep.end());
  for (std::size_t i = 0; i < net.size(); ++i)
    if (evidence[i] != kMissing) seeds.push_back(i);
  const auto relevant = detail::ancestral_set(net, seeds);

  std::vector<Factor> factors;
  std::vector<std::vector<std::size_t>> scopes;
  for (std::size_t i = 0; i < net.size(); ++i) {
    if (!relevant[i]) continue;
    factors.push_back(detail::cpt_factor(net, i, evidence));
    scopes.emplace_back(factors.back().vars().begin(), factors.back().vars().end());
  }

  std::vector<bool> kept(net.size(), false);
  for (std::size_t v : keep) kept[v] = true;
  std::vector<std::size_t> targets;
  for (std::size_t i = 0; i < net.size(); ++i)
    if (relevant[i] && evidence[i] == kMissing && !kept[i]) targets.push_back(i);

  for (std::size_t v : detail::min_fill_order(net, scopes, std::move(targets))) {
    Factor product;
    std::vector<Factor> rest;
    for (auto& f : factors) {
      if (f.contains(v)) {
        product = product * f;
      } else {
        rest.push_back(std::move(f));
      }
    }
    rest.push_back(product.sum_out(v));
    factors = std::move(rest);
  }
  Factor result;
  for (const auto& f : factors) result = result * f;
  return result;
}

// P(X in U) for the subset denoted by `c`.
inline double evidence_probability(const Network& net, const CoarseCase& c) {
  check_case(net, c);
  return eliminate(net, c.values, {}).total();
}

// Per node i, the table P(X_i = s, Pa_i = config | X in U) laid out like the
// node's CPT ([config][state]).
inline Cpts posterior_family_marginals(const Network& net, const CoarseCase& c) {
  check_case(net, c);
  const double pe = eliminate(net, c.values, {}).total();
  if (!(pe > 0.0)) throw ZeroSupportError("evidence has zero probability under the network");

  Cpts out;
  for (std::size_t i = 0; i < net.size(); ++i) {
    std::vector<std::size_t> family(net.parents(i).begin(), net.parents(i).end());
    family.push_back(i);
    const Factor f = eliminate(net, c.values, family);

    const std::size_t m = net.cardinality(i);
    Cpt table(net.cpt(i).size(), 0.0);
    // Walk the factor's scope; observed family members take their evidence value.
    Assignment x(c.values.begin(), c.values.end());
    const auto vars = f.vars();
    const auto card = f.cardinalities();
    for (std::size_t v : vars) x[v] = 0;
    const auto values = f.values();
    for (std::size_t idx = 0; idx < values.size(); ++idx) {
      table[net.config_index(i, x) * m + static_cast<std::size_t>(x[i])] += values[idx] / pe;
      for (std::size_t k = vars.size(); k-- > 0;) {
        if (static_cast<std::size_t>(++x[vars[k]]) < card[k]) break;
        x[vars[k]] = 0;
      }
    }
    out.push_back(std::move(table));
  }
  return out;
}

// Prior distribution of node i's parent configurations, P(Pa_i = config).
inline std::vector<double> parent_marginal(const Network& net, std::size_t i) {
  const std::vector<int> none(net.size(), kMissing);
  const auto ps = net.parents(i);
  std::vector<double> out(net.num_configs(i), 0.0);
  if (ps.empty()) {
    out[0] = 1.0;
    return out;
  }
  const Factor f = eliminate(net, none, ps);
  Assignment x(net.size(), 0);
  const auto vars = f.vars();
  const auto card = f.cardinalities();
  const auto values = f.values();
  for (std::size_t idx = 0; idx < values.size(); ++idx) {
    out[net.config_index(i, x)] += values[idx];
    for (std::size_t k = vars.size(); k-- > 0;) {
      if (static_cast<std::size_t>(++x[vars[k]]) < card[k]) break;
      x[vars[k]] = 0;
    }
  }
  return out;
}

// Adds weight * P(family | X in U) for every node to `counts` and returns
// P(X in U). Small ambiguity sets are summed directly; larger ones go through
// variable elimination. Returns 0 (adding nothing) for zero-probability evidence.
inline double accumulate_family_posteriors(const Network& net, const CoarseCase& c, double weight,
                                           FamilyCounts& counts,
                                           double enumeration_limit = 256.0) {
  if (c.complete()) {
    const double p = joint_probability_unchecked(net, c.values);
    if (p > 0.0) counts.add(c.values, weight);
    return p;
  }
  CompatibleAssignments range(c, net);
  if (range.count() <= enumeration_limit) {
    std::vector<std::pair<Assignment, double>> joint;
    double pe = 0.0;
    for (const auto& x : range) {
      const double p = joint_probability_unchecked(net, x);
      if (p > 0.0) {
        joint.emplace_back(x, p);
        pe += p;
      }
    }
    if (!(pe > 0.0)) return 0.0;
    for (const auto& [x, p] : joint) counts.add(x, weight * p / pe);
    return pe;
  }
  const double pe = eliminate(net, c.values, {}).total();
  if (!(pe > 0.0)) return 0.0;
  const Cpts fam = posterior_family_marginals(net, c);
  for (std::size_t i = 0; i < net.size(); ++i)
    for (std::size_t cell = 0; cell < fam[i].size(); ++cell)
      if (fam[i][cell] != 0.0) counts.add_cell(i, cell, weight * fam[i][cell]);
  return pe;
}

}  // namespace aiml
