#pragma once

// Face-value, profile(car) and profile(sat) log-likelihoods.
//
// The sat profile is computed through data completions:
//
//   (1/N) LL_sat(theta) = -H(m) - min_c KL(P_c || P_theta)
//
// where m is the empirical pattern distribution and c ranges over fractional
// completions. The inner problem is convex in c and is solved exactly per
// pattern (water-filling) inside a block-coordinate sweep; a dual bound
// certifies convergence.
//
// The car profile factors into the face-value likelihood and the
// theta-independent normalizer f(U) = max over car mechanisms of prod lambda_U.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <unordered_map>
#include <vector>

#include "aiml/coarse_data.hpp"
#include "aiml/errors.hpp"
#include "aiml/inference.hpp"
#include "aiml/network.hpp"
#include "aiml/rng.hpp"

namespace aiml {

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// Coarse observations over a small explicit state space {0..n-1}: each pattern
// is a subset of states with an empirical mass.
struct SubsetPatterns {
  std::size_t num_states = 0;
  std::vector<std::vector<std::size_t>> members;
  std::vector<double> mass;  // sums to 1
};

struct SatProfileSolution {
  double value = kNegInf;          // -H(m) - KL(P_c* || p)
  double kl = std::numeric_limits<double>::infinity();
  double dual_gap = 0.0;           // KL minus a dual lower bound on min KL
  std::vector<std::vector<double>> completion;  // per pattern, aligned with members
  std::size_t sweeps = 0;
  bool converged = false;
};

namespace lik_detail {

inline double entropy(std::span<const double> mass) {
  double h = 0.0;
  for (double m : mass)
    if (m > 0.0) h -= m * std::log(m);
  return h;
}

// min over c in the simplex of sum_x (a_x + m c_x) log((a_x + m c_x) / p_x),
// restricted to members with p_x > 0. Writes c (aligned with idx).
inline void water_fill(std::span<const std::size_t> idx, std::span<const double> a,
                       std::span<const double> p, double m, std::span<double> c) {
  struct Item {
    double ratio;
    std::size_t pos;
  };
  std::vector<Item> items;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    c[k] = 0.0;
    const double px = p[idx[k]];
    if (px > 0.0) items.push_back({a[idx[k]] / px, k});
  }
  std::sort(items.begin(), items.end(),
            [](const Item& l, const Item& r) { return l.ratio < r.ratio || (l.ratio == r.ratio && l.pos < r.pos); });
  double sum_a = 0.0, sum_p = 0.0, level = 0.0;
  std::size_t active = 0;
  for (std::size_t j = 0; j < items.size(); ++j) {
    sum_a += a[idx[items[j].pos]];
    sum_p += p[idx[items[j].pos]];
    level = (m + sum_a) / sum_p;
    active = j + 1;
    if (j + 1 == items.size() || level <= items[j + 1].ratio) break;
  }
  double total = 0.0;
  for (std::size_t j = 0; j < active; ++j) {
    const std::size_t k = items[j].pos;
    c[k] = std::max(0.0, level * p[idx[k]] - a[idx[k]]) / m;
    total += c[k];
  }
  if (total > 0.0) {
    for (std::size_t j = 0; j < active; ++j) c[items[j].pos] /= total;
  } else if (!items.empty()) {
    c[items.front().pos] = 1.0;
  }
}

inline double kl_of(std::span<const double> pc, std::span<const double> p) {
  double kl = 0.0;
  for (std::size_t x = 0; x < pc.size(); ++x) {
    if (pc[x] <= 0.0) continue;
    if (!(p[x] > 0.0)) return std::numeric_limits<double>::infinity();
    kl += pc[x] * std::log(pc[x] / p[x]);
  }
  return kl;
}

// Dual lower bound on min_c KL(P_c || p): for any y,
//   sum_U m_U min_{x in U} y_x - sum_x p_x exp(y_x - 1).
// y is taken from the gradient at the current P_c; states carrying no mass
// get the smallest value that keeps every pattern minimum unchanged.
inline double dual_bound(const SubsetPatterns& pats, std::span<const double> pc,
                         std::span<const double> p) {
  const std::size_t n = pats.num_states;
  std::vector<double> y(n, std::numeric_limits<double>::quiet_NaN());
  for (std::size_t x = 0; x < n; ++x)
    if (pc[x] > 0.0 && p[x] > 0.0) y[x] = 1.0 + std::log(pc[x] / p[x]);
  std::vector<double> pattern_min(pats.members.size(), std::numeric_limits<double>::infinity());
  for (std::size_t u = 0; u < pats.members.size(); ++u)
    for (std::size_t x : pats.members[u])
      if (!std::isnan(y[x])) pattern_min[u] = std::min(pattern_min[u], y[x]);
  for (std::size_t u = 0; u < pats.members.size(); ++u) {
    for (std::size_t x : pats.members[u]) {
      if (!std::isnan(y[x]) || !(p[x] > 0.0)) continue;
      // massless state: must not lower any pattern's minimum
      double need = kNegInf;
      for (std::size_t v = 0; v < pats.members.size(); ++v) {
        if (std::find(pats.members[v].begin(), pats.members[v].end(), x) != pats.members[v].end()) {
          need = std::max(need, pattern_min[v]);
        }
      }
      y[x] = need;
    }
  }
  double bound = 0.0;
  for (std::size_t u = 0; u < pats.members.size(); ++u) {
    if (pats.mass[u] > 0.0) bound += pats.mass[u] * pattern_min[u];
  }
  for (std::size_t x = 0; x < n; ++x) {
    if (std::isnan(y[x]) || !(p[x] > 0.0) || std::isinf(y[x])) continue;
    bound -= p[x] * std::exp(y[x] - 1.0);
  }
  return bound;
}

}  // namespace lik_detail

// Exact (1/N) LL_sat over an explicit state space with probabilities p. An
// optional seed starts the sweep from a random completion instead of the
// p-proportional one.
inline constexpr double kStallGap = 1e-8;

inline SatProfileSolution solve_sat_profile(std::span<const double> p, const SubsetPatterns& pats,
                                            double tol = 1e-12,
                                            std::optional<std::uint64_t> random_start = std::nullopt,
                                            std::size_t max_sweeps = 100000) {
  if (p.size() != pats.num_states) throw std::invalid_argument("probability vector size mismatch");
  const std::size_t n = pats.num_states;
  const double h = lik_detail::entropy(pats.mass);
  SatProfileSolution sol;
  sol.completion.resize(pats.members.size());

  // Patterns whose every member has probability zero make LL_sat = -inf.
  for (std::size_t u = 0; u < pats.members.size(); ++u) {
    bool any = false;
    for (std::size_t x : pats.members[u]) any = any || p[x] > 0.0;
    if (!any && pats.mass[u] > 0.0) {
      for (std::size_t v = 0; v < pats.members.size(); ++v)
        sol.completion[v].assign(pats.members[v].size(), 1.0 / static_cast<double>(pats.members[v].size()));
      sol.converged = true;
      return sol;
    }
  }

  std::optional<Rng> rng;
  if (random_start) rng.emplace(*random_start);
  std::vector<double> pc(n, 0.0);
  for (std::size_t u = 0; u < pats.members.size(); ++u) {
    auto& c = sol.completion[u];
    const auto& mem = pats.members[u];
    c.assign(mem.size(), 0.0);
    double total = 0.0;
    for (std::size_t k = 0; k < mem.size(); ++k) {
      if (!(p[mem[k]] > 0.0)) continue;
      c[k] = rng ? uniform_open01(*rng) : p[mem[k]];
      total += c[k];
    }
    for (std::size_t k = 0; k < mem.size(); ++k) {
      c[k] /= total;
      pc[mem[k]] += pats.mass[u] * c[k];
    }
  }

  std::vector<double> a(n, 0.0);
  double kl = lik_detail::kl_of(pc, p);
  for (sol.sweeps = 1; sol.sweeps <= max_sweeps; ++sol.sweeps) {
    for (std::size_t u = 0; u < pats.members.size(); ++u) {
      const double m = pats.mass[u];
      if (!(m > 0.0)) continue;
      const auto& mem = pats.members[u];
      auto& c = sol.completion[u];
      for (std::size_t k = 0; k < mem.size(); ++k) a[mem[k]] = std::max(0.0, pc[mem[k]] - m * c[k]);
      lik_detail::water_fill(mem, a, p, m, c);
      for (std::size_t k = 0; k < mem.size(); ++k) pc[mem[k]] = a[mem[k]] + m * c[k];
    }
    // Recompute P_c from scratch.
    std::fill(pc.begin(), pc.end(), 0.0);
    for (std::size_t u = 0; u < pats.members.size(); ++u)
      for (std::size_t k = 0; k < pats.members[u].size(); ++k)
        pc[pats.members[u][k]] += pats.mass[u] * sol.completion[u][k];
    const double next = lik_detail::kl_of(pc, p);
    const double gap = std::max(0.0, next - lik_detail::dual_bound(pats, pc, p));
    const double improvement = kl - next;
    kl = next;
    sol.dual_gap = gap;
    if (gap <= tol) {
      sol.converged = true;
      break;
    }
    // Stalled at round-off level.
    if (improvement <= 0.0) {
      sol.converged = gap <= kStallGap;
      break;
    }
  }
  sol.kl = kl;
  sol.value = -h - kl;
  return sol;
}

struct CarNormalizerSolution {
  double log_f = 0.0;               // per unit weight
  std::vector<double> lambda;       // per pattern, feasible
  double gap = 0.0;                 // upper bound minus log_f
  std::size_t iterations = 0;
};

// maximize sum_U m_U log lambda_U  s.t.  sum_{U containing x} lambda_U <= 1.
// The dual variables form a distribution mu on the states and are fitted by
// iterative proportional scaling mu_x <- sum_{U containing x} m_U mu_x / mu(U);
// the primal certificate is lambda_U = m_U / mu(U), scaled back into the
// feasible set. The scaling factor bounds the remaining gap.
inline CarNormalizerSolution solve_car_normalizer(const SubsetPatterns& pats, double tol = 1e-10,
                                                  std::size_t max_iterations = 1000000) {
  const std::size_t n = pats.num_states;
  std::vector<bool> used(n, false);
  for (const auto& mem : pats.members)
    for (std::size_t x : mem) used[x] = true;
  std::size_t support = 0;
  for (bool b : used) support += b;
  std::vector<double> mu(n, 0.0);
  for (std::size_t x = 0; x < n; ++x)
    if (used[x]) mu[x] = 1.0 / static_cast<double>(support);

  CarNormalizerSolution sol;
  std::vector<double> mass_u(pats.members.size());
  std::vector<double> next(n);
  double sum_m_log_m = 0.0;
  for (double m : pats.mass)
    if (m > 0.0) sum_m_log_m += m * std::log(m);

  for (sol.iterations = 0;; ++sol.iterations) {
    for (std::size_t u = 0; u < pats.members.size(); ++u) {
      double s = 0.0;
      for (std::size_t x : pats.members[u]) s += mu[x];
      mass_u[u] = s;
    }
    // load_x = sum_{U containing x} m_U / mu(U); its maximum is the scaling.
    std::fill(next.begin(), next.end(), 0.0);
    for (std::size_t u = 0; u < pats.members.size(); ++u) {
      if (!(pats.mass[u] > 0.0)) continue;
      const double r = pats.mass[u] / mass_u[u];
      for (std::size_t x : pats.members[u]) next[x] += r;
    }
    double scale = 0.0;
    for (std::size_t x = 0; x < n; ++x)
      if (used[x]) scale = std::max(scale, next[x]);
    // upper bound (from the dual point mu) and feasible value (scaled primal)
    double upper = sum_m_log_m;
    for (std::size_t u = 0; u < pats.members.size(); ++u)
      if (pats.mass[u] > 0.0) upper -= pats.mass[u] * std::log(mass_u[u]);
    const double gap = std::log(std::max(scale, 1.0));
    if (gap <= tol || sol.iterations >= max_iterations) {
      sol.lambda.assign(pats.members.size(), 0.0);
      const double s = std::max(scale, 1.0);
      for (std::size_t u = 0; u < pats.members.size(); ++u)
        if (pats.mass[u] > 0.0) sol.lambda[u] = pats.mass[u] / mass_u[u] / s;
      sol.log_f = upper - gap;
      sol.gap = gap;
      return sol;
    }
    for (std::size_t x = 0; x < n; ++x) mu[x] *= next[x];
  }
}

inline double face_value_subsets(std::span<const double> p, const SubsetPatterns& pats) {
  double ll = 0.0;
  for (std::size_t u = 0; u < pats.members.size(); ++u) {
    if (!(pats.mass[u] > 0.0)) continue;
    double pu = 0.0;
    for (std::size_t x : pats.members[u]) pu += p[x];
    if (!(pu > 0.0)) return kNegInf;
    ll += pats.mass[u] * std::log(pu);
  }
  return ll;
}

// ---------------------------------------------------------------------------
// Bayesian-network datasets

enum class LikelihoodKind { face_value, sat_profile, car_profile };

inline const char* to_string(LikelihoodKind k) {
  switch (k) {
    case LikelihoodKind::face_value: return "face_value";
    case LikelihoodKind::sat_profile: return "sat_profile";
    case LikelihoodKind::car_profile: return "car_profile";
  }
  return "?";
}

struct LikelihoodReport {
  LikelihoodKind kind = LikelihoodKind::face_value;
  double per_case_average = 0.0;  // nats per unit weight
  double total = 0.0;
  double total_weight = 0.0;
  bool converged = true;
  // Certificate: the distinct patterns, with the optimal completion (sat) or
  // the optimal car lambda per pattern (car).
  std::vector<CoarseCase> patterns;
  std::vector<CaseCompletion> completion;
  std::vector<double> pattern_lambda;
};

inline constexpr double kAmbiguityBudget = 1e5;

// Patterns of `data` as subsets of the states they cover, numbered locally.
struct IndexedPatterns {
  PatternDistribution m;
  SubsetPatterns subsets;
  std::vector<Assignment> states;  // local index -> assignment
};

inline IndexedPatterns index_patterns(const Dataset& data, double budget) {
  IndexedPatterns out;
  out.m = empirical_pattern_distribution(data);
  double total = 0.0;
  for (const auto& u : out.m.patterns) total += CompatibleAssignments(u, data.cardinalities()).count();
  if (total > budget) {
    throw BudgetExceeded("dataset ambiguity (" + std::to_string(total) +
                         " compatible assignments) exceeds the enumeration budget");
  }
  AssignmentCodec codec({data.cardinalities().begin(), data.cardinalities().end()});
  std::unordered_map<std::uint64_t, std::size_t> local;
  for (const auto& u : out.m.patterns) {
    std::vector<std::size_t> mem;
    for (const auto& x : CompatibleAssignments(u, data.cardinalities())) {
      auto [it, fresh] = local.emplace(codec.encode(x), out.states.size());
      if (fresh) out.states.push_back(x);
      mem.push_back(it->second);
    }
    out.subsets.members.push_back(std::move(mem));
  }
  out.subsets.mass = out.m.frequency;
  out.subsets.num_states = out.states.size();
  return out;
}

inline LikelihoodReport face_value_loglik(const Network& net, const Dataset& data) {
  data.check_binding(net);
  const Dataset merged = merge_patterns(data);
  LikelihoodReport r;
  r.kind = LikelihoodKind::face_value;
  r.total_weight = data.total_weight();
  double total = 0.0;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const double pe = evidence_probability(net, merged.at(i));
    if (!(pe > 0.0)) {
      total = kNegInf;
      break;
    }
    total += merged.weight(i) * std::log(pe);
  }
  r.total = total;
  r.per_case_average = r.total_weight > 0.0 ? total / r.total_weight : 0.0;
  return r;
}

inline LikelihoodReport exact_sat_profile_loglik(const Network& net, const Dataset& data,
                                                 double tol = 1e-12,
                                                 std::optional<std::uint64_t> random_start = std::nullopt) {
  data.check_binding(net);
  const IndexedPatterns ip = index_patterns(data, kAmbiguityBudget);
  std::vector<double> p(ip.states.size());
  for (std::size_t x = 0; x < p.size(); ++x) p[x] = joint_probability_unchecked(net, ip.states[x]);
  const SatProfileSolution sol = solve_sat_profile(p, ip.subsets, tol, random_start);

  LikelihoodReport r;
  r.kind = LikelihoodKind::sat_profile;
  r.total_weight = data.total_weight();
  r.per_case_average = sol.value;
  r.total = sol.value * r.total_weight;
  r.converged = sol.converged;
  r.patterns = ip.m.patterns;
  for (std::size_t u = 0; u < ip.subsets.members.size(); ++u) {
    CaseCompletion cc;
    for (std::size_t k = 0; k < ip.subsets.members[u].size(); ++k) {
      cc.push_back({ip.states[ip.subsets.members[u][k]], sol.completion[u][k]});
    }
    r.completion.push_back(std::move(cc));
  }
  return r;
}

struct CarNormalizer {
  double log_f = 0.0;  // per unit weight
  std::vector<CoarseCase> patterns;
  std::vector<double> lambda;
};

inline CarNormalizer car_normalizer(const Dataset& data) {
  const IndexedPatterns ip = index_patterns(data, kMaxEnumerableStates);
  const CarNormalizerSolution sol = solve_car_normalizer(ip.subsets);
  return {sol.log_f, ip.m.patterns, sol.lambda};
}

inline LikelihoodReport car_profile_loglik(const Network& net, const Dataset& data) {
  LikelihoodReport r = face_value_loglik(net, data);
  const CarNormalizer f = car_normalizer(data);
  r.kind = LikelihoodKind::car_profile;
  r.per_case_average += f.log_f;
  r.total = r.per_case_average * r.total_weight;
  r.patterns = f.patterns;
  r.pattern_lambda = f.lambda;
  return r;
}

// LL_sat(net_sat) - LL_car(net_car) per unit weight. A value below -1e-9 means
// the candidates were not optima and is reported as an error.
inline double lr_statistic(const Network& net_sat, const Network& net_car, const Dataset& data) {
  const double sat = exact_sat_profile_loglik(net_sat, data).per_case_average;
  const double car = car_profile_loglik(net_car, data).per_case_average;
  const double lr = sat - car;
  if (lr < -1e-9) {
    throw NumericalError("likelihood ratio is negative (" + std::to_string(lr) +
                         "); the candidates are not profile optima");
  }
  return std::max(lr, 0.0);
}

}  // namespace aiml
