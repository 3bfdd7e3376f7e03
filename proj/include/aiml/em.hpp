#pragma once

// EM on the face-value likelihood: the E step adds posterior family marginals
// for each distinct pattern, the M step normalizes the expected counts.

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

#include "aiml/coarse_data.hpp"
#include "aiml/errors.hpp"
#include "aiml/inference.hpp"
#include "aiml/network.hpp"
#include "aiml/rng.hpp"

namespace aiml {

enum class EmInit { uniform, given, random };

struct EmOptions {
  double tol = 1e-6;  // minimum face-value gain per unit weight
  std::size_t max_iters = 200;
  EmInit init = EmInit::uniform;
  std::optional<Network> theta0;  // for EmInit::given
  std::uint64_t seed = 0;         // for EmInit::random

  void check() const {
    if (!(tol > 0.0)) throw std::invalid_argument("EM tolerance must be positive");
    if (max_iters == 0) throw std::invalid_argument("EM needs at least one iteration");
    if (init == EmInit::given && !theta0) throw std::invalid_argument("EM init 'given' needs theta0");
  }
};

struct EmResult {
  Network raw;
  Network smoothed;
  RowCounts row_counts;
  std::vector<double> trace;  // face-value log-likelihood per unit weight, one per parameter vector
  std::vector<std::size_t> zero_evidence;  // excluded cases per E step
  std::size_t iterations = 0;
  bool converged = false;
};

namespace em_detail {

inline Network initial_parameters(const Network& structure, const EmOptions& opts) {
  switch (opts.init) {
    case EmInit::uniform:
      return Network::uniform(structure.name(), structure.nodes());
    case EmInit::given:
      if (!opts.theta0->same_structure(structure)) {
        throw std::invalid_argument("initial parameters do not match the structure");
      }
      return *opts.theta0;
    case EmInit::random: {
      Rng rng(opts.seed);
      return randomize_parameters(structure, rng);
    }
  }
  throw std::logic_error("unknown EM init");
}

struct EStep {
  Estimate estimate;
  double loglik = 0.0;  // per unit weight over all cases; -inf if any is impossible
  std::size_t zero_evidence = 0;
};

inline EStep e_step(const Network& theta, const Dataset& merged, double total_weight) {
  FamilyCounts counts(theta);
  EStep out;
  double ll = 0.0;
  double used = 0.0;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const double w = merged.weight(i);
    const double pe = accumulate_family_posteriors(theta, merged.at(i), w, counts);
    if (pe > 0.0) {
      ll += w * std::log(pe);
      used += w;
    } else {
      ++out.zero_evidence;
    }
  }
  if (!(used > 0.0)) throw ZeroSupportError("every case has zero probability under the current parameters");
  out.loglik = out.zero_evidence > 0 ? -std::numeric_limits<double>::infinity() : ll / total_weight;
  out.estimate = counts.estimate();
  return out;
}

}  // namespace em_detail

inline EmResult em_fit(const Network& structure, const Dataset& data, const EmOptions& opts = {}) {
  opts.check();
  data.check_binding(structure);
  const Dataset merged = merge_patterns(data);
  const double total = merged.total_weight();
  if (!(total > 0.0)) throw std::invalid_argument("dataset has no positive weight");

  Network theta = em_detail::initial_parameters(structure, opts);
  EmResult r{theta, theta, {}, {}, {}, 0, false};
  const bool complete = merged.complete();
  for (r.iterations = 1; r.iterations <= opts.max_iters; ++r.iterations) {
    em_detail::EStep e = em_detail::e_step(theta, merged, total);
    r.trace.push_back(e.loglik);
    r.zero_evidence.push_back(e.zero_evidence);
    theta = structure.with_cpts(std::move(e.estimate.cpts));
    r.row_counts = std::move(e.estimate.row_counts);
    const std::size_t t = r.trace.size();
    if (complete || (t >= 2 && r.trace[t - 1] - r.trace[t - 2] < opts.tol)) {
      r.converged = true;
      break;
    }
  }
  if (r.iterations > opts.max_iters) r.iterations = opts.max_iters;
  // Likelihood of the returned parameters closes the trace.
  double ll = 0.0;
  for (std::size_t i = 0; i < merged.size(); ++i) {
    const double pe = evidence_probability(theta, merged.at(i));
    ll += pe > 0.0 ? merged.weight(i) * std::log(pe) : -std::numeric_limits<double>::infinity();
  }
  r.trace.push_back(ll / total);
  r.raw = theta;
  r.smoothed = smooth(theta, r.row_counts);
  return r;
}

}  // namespace aiml
