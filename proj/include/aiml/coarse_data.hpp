#pragma once

// Weighted datasets of incomplete observations, their empirical pattern
// distribution, data completions and the coarsening mechanism a completion
// implies.

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "aiml/coarse_case.hpp"
#include "aiml/errors.hpp"
#include "aiml/network.hpp"

namespace aiml {

struct Variable {
  std::string name;
  std::vector<std::string> states;

  bool operator==(const Variable&) const = default;
};

// Weighted collection of coarse cases over a fixed variable header. Integer
// weights reproduce a plain sample; fractional weights describe a pattern
// distribution exactly.
class Dataset {
 public:
  Dataset() = default;
  explicit Dataset(std::vector<Variable> variables) : variables_(std::move(variables)) {
    for (const auto& v : variables_) card_.push_back(v.states.size());
  }

  // Header taken from the network's nodes, in node order.
  static Dataset for_network(const Network& net) {
    std::vector<Variable> vars;
    for (const auto& n : net.nodes()) vars.push_back({n.name, n.states});
    return Dataset(std::move(vars));
  }

  void add(CoarseCase c, double weight = 1.0) {
    check_case(card_, c);
    if (!(weight >= 0.0) || !std::isfinite(weight)) {
      throw std::invalid_argument("case weight must be finite and nonnegative");
    }
    cases_.push_back(std::move(c));
    weights_.push_back(weight);
  }

  const std::vector<Variable>& variables() const { return variables_; }
  std::span<const std::size_t> cardinalities() const { return card_; }
  const std::vector<CoarseCase>& cases() const { return cases_; }
  const std::vector<double>& weights() const { return weights_; }
  const CoarseCase& at(std::size_t i) const { return cases_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  std::size_t size() const { return cases_.size(); }
  bool empty() const { return cases_.empty(); }

  double total_weight() const {
    double s = 0.0;
    for (double w : weights_) s += w;
    return s;
  }

  bool complete() const {
    for (const auto& c : cases_)
      if (!c.complete()) return false;
    return true;
  }

  // Weighted fraction of missing cells.
  double missing_fraction() const {
    double missing = 0.0, total = 0.0;
    for (std::size_t i = 0; i < cases_.size(); ++i) {
      missing += weights_[i] * static_cast<double>(cases_[i].missing_count());
      total += weights_[i] * static_cast<double>(card_.size());
    }
    return total > 0.0 ? missing / total : 0.0;
  }

  bool binds_to(const Network& net) const {
    if (variables_.size() != net.size()) return false;
    for (std::size_t i = 0; i < net.size(); ++i) {
      if (variables_[i].name != net.node(i).name || variables_[i].states != net.node(i).states) {
        return false;
      }
    }
    return true;
  }

  void check_binding(const Network& net) const {
    if (!binds_to(net)) {
      throw FormatError("dataset variables do not match the nodes of network '" + net.name() + "'");
    }
  }

  std::size_t variable_index(const std::string& name) const {
    for (std::size_t i = 0; i < variables_.size(); ++i)
      if (variables_[i].name == name) return i;
    throw std::invalid_argument("unknown variable '" + name + "'");
  }

 private:
  std::vector<Variable> variables_;
  std::vector<std::size_t> card_;
  std::vector<CoarseCase> cases_;
  std::vector<double> weights_;
};

// Identical cases merged with summed weights, in pattern order. Zero-weight
// rows are dropped.
inline Dataset merge_patterns(const Dataset& data) {
  std::map<CoarseCase, double> merged;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.weight(i) > 0.0) merged[data.at(i)] += data.weight(i);
  Dataset out(data.variables());
  for (auto& [c, w] : merged) out.add(c, w);
  return out;
}

// Integer-weighted rows split into that many unit rows. Fractional weights are
// kept as single rows.
inline Dataset expand_unit_weights(const Dataset& data) {
  Dataset out(data.variables());
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = data.weight(i);
    if (w >= 1.0 && w == std::floor(w) && w < 1e9) {
      for (double k = 0; k < w; k += 1.0) out.add(data.at(i), 1.0);
    } else {
      out.add(data.at(i), w);
    }
  }
  return out;
}

struct PatternDistribution {
  std::vector<CoarseCase> patterns;  // sorted, distinct
  std::vector<double> frequency;     // sums to 1
  double entropy = 0.0;              // nats

  std::optional<std::size_t> find(const CoarseCase& c) const {
    auto it = std::lower_bound(patterns.begin(), patterns.end(), c);
    if (it == patterns.end() || *it != c) return std::nullopt;
    return static_cast<std::size_t>(it - patterns.begin());
  }
};

inline PatternDistribution empirical_pattern_distribution(const Dataset& data) {
  const double total = data.total_weight();
  if (!(total > 0.0)) throw std::invalid_argument("dataset has no positive weight");
  std::map<CoarseCase, double> mass;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.weight(i) > 0.0) mass[data.at(i)] += data.weight(i);
  PatternDistribution m;
  for (const auto& [c, w] : mass) {
    const double f = w / total;
    m.patterns.push_back(c);
    m.frequency.push_back(f);
    m.entropy -= f * std::log(f);
  }
  return m;
}

// Per-case distributions over compatible full assignments.
using CaseCompletion = std::vector<WeightedAssignment>;

struct Completion {
  std::vector<CaseCompletion> per_case;
};

inline constexpr double kCompletionTolerance = 1e-12;

inline void check_completion(const Completion& c, const Dataset& data) {
  if (c.per_case.size() != data.size()) {
    throw std::invalid_argument("completion has " + std::to_string(c.per_case.size()) +
                                " cases, dataset has " + std::to_string(data.size()));
  }
  for (std::size_t i = 0; i < data.size(); ++i) {
    double sum = 0.0;
    for (const auto& [x, p] : c.per_case[i]) {
      if (x.size() != data.cardinalities().size() || !data.at(i).compatible(x)) {
        throw std::invalid_argument("completion of case " + std::to_string(i) +
                                    " puts mass outside the case");
      }
      if (!(p >= 0.0)) throw std::invalid_argument("negative completion probability");
      sum += p;
    }
    if (std::abs(sum - 1.0) > kCompletionTolerance * std::max<double>(1.0, static_cast<double>(c.per_case[i].size()))) {
      throw std::invalid_argument("completion of case " + std::to_string(i) + " sums to " +
                                  std::to_string(sum));
    }
  }
}

// P_c = (1/N) sum_i w_i c(U_i).
inline std::map<Assignment, double> completion_distribution(const Completion& c,
                                                            const Dataset& data) {
  check_completion(c, data);
  const double total = data.total_weight();
  if (!(total > 0.0)) throw std::invalid_argument("dataset has no positive weight");
  std::map<Assignment, double> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data.weight(i) == 0.0) continue;
    for (const auto& [x, p] : c.per_case[i])
      if (p > 0.0) out[x] += data.weight(i) * p / total;
  }
  return out;
}

// Point-mass completion from one full assignment per case.
inline Completion one_completion(const std::vector<Assignment>& chosen) {
  Completion c;
  for (const auto& x : chosen) c.per_case.push_back({{x, 1.0}});
  return c;
}

// Coarsening parameters lambda_{x,U} = P(Y = U | X = x), stored sparsely over
// the observed patterns plus whatever singleton patterns carry residual mass.
struct CoarseningModel {
  double state_space_size = 0.0;
  std::vector<CoarseCase> patterns;
  std::map<std::pair<Assignment, std::size_t>, double> lambda;
  bool car = false;

  double at(const Assignment& x, std::size_t pattern) const {
    auto it = lambda.find({x, pattern});
    return it == lambda.end() ? 0.0 : it->second;
  }

  std::optional<std::size_t> find_pattern(const CoarseCase& u) const {
    for (std::size_t k = 0; k < patterns.size(); ++k)
      if (patterns[k] == u) return k;
    return std::nullopt;
  }

  // sum over stored U containing x of lambda_{x,U}
  double row_sum(const Assignment& x) const {
    double s = 0.0;
    for (const auto& [key, v] : lambda)
      if (key.first == x) s += v;
    return s;
  }
};

inline constexpr double kMaxEnumerableStates = 1048576.0;  // 2^20

// lambda_{x,U} = m(U) c(U)(x) / P_c(x); each x's leftover mass goes to its
// singleton pattern {x}.
inline CoarseningModel recover_coarsening(const PatternDistribution& m, const Completion& c,
                                          const Dataset& data) {
  check_completion(c, data);
  AssignmentCodec codec({data.cardinalities().begin(), data.cardinalities().end()});
  if (codec.state_space_size() > kMaxEnumerableStates) {
    throw BudgetExceeded("state space too large to recover a coarsening model");
  }
  const double total = data.total_weight();
  if (!(total > 0.0)) throw std::invalid_argument("dataset has no positive weight");

  CoarseningModel model;
  model.state_space_size = codec.state_space_size();
  model.patterns = m.patterns;

  std::map<std::pair<Assignment, std::size_t>, double> joint;  // m(U) c(U)(x)
  std::map<Assignment, double> pc;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const auto u = m.find(data.at(i));
    if (!u) {
      if (data.weight(i) == 0.0) continue;
      throw std::invalid_argument("pattern distribution does not match the dataset");
    }
    for (const auto& [x, p] : c.per_case[i]) {
      if (p <= 0.0) continue;
      const double r = data.weight(i) * p / total;
      joint[{x, *u}] += r;
      pc[x] += r;
    }
  }
  for (const auto& [key, r] : joint) {
    const double px = pc[key.first];
    if (!(px > 0.0)) {
      throw ZeroSupportError("completion puts mass on a state with P_c(x) = 0");
    }
    model.lambda[key] = r / px;
  }

  // Residual mass to singleton self-patterns for every state covered by a pattern.
  std::map<Assignment, double> row;
  for (const auto& u : m.patterns)
    for (const auto& x : CompatibleAssignments(u, data.cardinalities())) row.emplace(x, 0.0);
  for (const auto& [key, v] : model.lambda) row[key.first] += v;
  for (const auto& [x, used] : row) {
    const double residual = 1.0 - used;
    if (residual <= 1e-12) continue;
    const CoarseCase self = complete_case(x);
    auto k = model.find_pattern(self);
    if (!k) {
      model.patterns.push_back(self);
      k = model.patterns.size() - 1;
    }
    model.lambda[{x, *k}] += residual;
  }

  model.car = true;
  for (std::size_t k = 0; k < model.patterns.size() && model.car; ++k) {
    std::optional<double> first;
    for (const auto& x : CompatibleAssignments(model.patterns[k], data.cardinalities())) {
      const double v = model.at(x, k);
      if (!first) {
        first = v;
      } else if (std::abs(*first - v) > 1e-12) {
        model.car = false;
        break;
      }
    }
  }
  return model;
}

}  // namespace aiml
