#pragma once

// Estimate quality against a known network: KL divergence (by enumeration or
// family decomposition) and flat parameter MSE, computed after smoothing.

#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiml/errors.hpp"
#include "aiml/inference.hpp"
#include "aiml/network.hpp"

namespace aiml {

inline constexpr double kMaxEnumerationStates = 1048576.0;  // 2^20

namespace eval_detail {

inline void check_domains(const Network& a, const Network& b) {
  if (a.size() != b.size()) throw FormatError("networks have different numbers of nodes");
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.node(i).name != b.node(i).name || a.node(i).states != b.node(i).states) {
      throw FormatError("node " + std::to_string(i) + " differs between the networks (" + a.node(i).name +
                        " vs " + b.node(i).name + ")");
    }
  }
}

inline void check_structure(const Network& a, const Network& b) {
  check_domains(a, b);
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a.node(i).parents != b.node(i).parents) {
      throw FormatError("networks have different parents for node " + a.node(i).name);
    }
  }
}

// sum_s p_s log(p_s / q_s) for one row.
inline double row_kl(std::span<const double> p, std::span<const double> q) {
  double kl = 0.0;
  for (std::size_t s = 0; s < p.size(); ++s) {
    if (p[s] <= 0.0) continue;
    if (!(q[s] > 0.0)) return std::numeric_limits<double>::infinity();
    kl += p[s] * std::log(p[s] / q[s]);
  }
  return kl;
}

}  // namespace eval_detail

// KL(P_truth || P_estimate) summed over the whole joint state space.
inline double kl_enumerate(const Network& truth, const Network& estimate) {
  eval_detail::check_domains(truth, estimate);
  if (truth.codec().state_space_size() > kMaxEnumerationStates) {
    throw BudgetExceeded("state space too large to enumerate; use the decomposed KL");
  }
  double kl = 0.0;
  bool infinite = false;
  for_each_assignment(truth.cardinalities(), [&](const Assignment& x) {
    const double p = joint_probability_unchecked(truth, x);
    if (p <= 0.0 || infinite) return;
    const double q = joint_probability_unchecked(estimate, x);
    if (!(q > 0.0)) {
      infinite = true;
      return;
    }
    kl += p * (std::log(p) - std::log(q));
  });
  return infinite ? std::numeric_limits<double>::infinity() : kl;
}

// sum_i sum_pa P_truth(pa_i) KL(truth row || estimate row); needs a shared DAG.
inline double kl_decomposed(const Network& truth, const Network& estimate) {
  eval_detail::check_structure(truth, estimate);
  double kl = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const std::vector<double> pa = parent_marginal(truth, i);
    for (std::size_t r = 0; r < pa.size(); ++r) {
      if (pa[r] <= 0.0) continue;
      const double d = eval_detail::row_kl(truth.row(i, r), estimate.row(i, r));
      if (std::isinf(d)) return d;
      kl += pa[r] * d;
    }
  }
  return kl;
}

// Mean over all CPT entries of the squared difference.
inline double mse(const Network& truth, const Network& estimate) {
  eval_detail::check_structure(truth, estimate);
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const auto& a = truth.cpt(i);
    const auto& b = estimate.cpt(i);
    for (std::size_t k = 0; k < a.size(); ++k) {
      const double d = a[k] - b[k];
      sum += d * d;
    }
    n += a.size();
  }
  return n == 0 ? 0.0 : sum / static_cast<double>(n);
}

enum class KlMode { automatic, enumerate, decomposed };

struct EvalReport {
  std::string method;
  double ce = 0.0;
  double mse = 0.0;
  double pct_missing = 0.0;
};

inline double kl_divergence(const Network& truth, const Network& estimate, KlMode mode) {
  switch (mode) {
    case KlMode::enumerate: return kl_enumerate(truth, estimate);
    case KlMode::decomposed: return kl_decomposed(truth, estimate);
    case KlMode::automatic: break;
  }
  bool shared = truth.size() == estimate.size();
  for (std::size_t i = 0; shared && i < truth.size(); ++i)
    shared = truth.node(i).parents == estimate.node(i).parents;
  return shared ? kl_decomposed(truth, estimate) : kl_enumerate(truth, estimate);
}

// Smooths `raw` with its row counts, then scores it against the truth.
inline EvalReport evaluate(const Network& truth, const Network& raw, const RowCounts& row_counts,
                           std::string method, double pct_missing = 0.0, KlMode mode = KlMode::automatic) {
  const Network est = smooth(raw, row_counts);
  EvalReport r;
  r.method = std::move(method);
  r.ce = kl_divergence(truth, est, mode);
  r.mse = mse(truth, est);
  r.pct_missing = pct_missing;
  return r;
}

}  // namespace aiml
