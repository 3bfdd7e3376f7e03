#pragma once

// Conservative inference: estimates from random completions of the data,
// summarized as per-parameter [min, max] intervals and their midpoints, and
// exact bounds for single-variable marginals.

#include <algorithm>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiml/coarse_data.hpp"
#include "aiml/network.hpp"
#include "aiml/rng.hpp"

namespace aiml {

// Every missing value filled uniformly and independently.
inline std::vector<Assignment> random_completion(const Dataset& data, Rng& rng) {
  std::vector<Assignment> out;
  out.reserve(data.size());
  const auto card = data.cardinalities();
  for (const auto& c : data.cases()) {
    Assignment x(c.values.begin(), c.values.end());
    for (std::size_t v = 0; v < x.size(); ++v)
      if (x[v] == kMissing) x[v] = static_cast<int>(uniform_index(rng, card[v]));
    out.push_back(std::move(x));
  }
  return out;
}

struct ConservativeResult {
  std::vector<Network> estimates;  // smoothed, one per completion
  Cpts low;
  Cpts high;
  Cpts midpoint;
  Network midpoint_network;        // midpoints with each row renormalized
};

// R smoothed ML estimates from R uniform completions. Integer-weighted rows are
// expanded to unit rows first so each copy is completed independently. The
// intervals are an inner approximation of the set estimate.
inline ConservativeResult conservative_ensemble(const Network& structure, const Dataset& data,
                                                std::size_t restarts, std::uint64_t seed) {
  if (restarts < 1) throw std::invalid_argument("need at least one completion");
  data.check_binding(structure);
  const Dataset units = expand_unit_weights(data);
  ConservativeResult r;
  for (std::size_t k = 0; k < restarts; ++k) {
    Rng rng(derive_seed(seed, k));
    const std::vector<Assignment> filled = random_completion(units, rng);
    std::vector<WeightedAssignment> rows;
    rows.reserve(filled.size());
    for (std::size_t i = 0; i < filled.size(); ++i) rows.push_back({filled[i], units.weight(i)});
    const Estimate e = ml_estimate(structure, rows);
    r.estimates.push_back(structure.with_cpts(smooth(e.cpts, e.row_counts)));
  }
  r.low = r.estimates.front().cpts();
  r.high = r.low;
  for (const auto& est : r.estimates) {
    for (std::size_t i = 0; i < r.low.size(); ++i) {
      for (std::size_t k = 0; k < r.low[i].size(); ++k) {
        r.low[i][k] = std::min(r.low[i][k], est.cpt(i)[k]);
        r.high[i][k] = std::max(r.high[i][k], est.cpt(i)[k]);
      }
    }
  }
  r.midpoint = r.low;
  Cpts normalized = r.low;
  for (std::size_t i = 0; i < r.low.size(); ++i) {
    const std::size_t m = structure.cardinality(i);
    for (std::size_t k = 0; k < r.low[i].size(); ++k) r.midpoint[i][k] = 0.5 * (r.low[i][k] + r.high[i][k]);
    for (std::size_t row = 0; row * m < r.low[i].size(); ++row) {
      double sum = 0.0;
      for (std::size_t s = 0; s < m; ++s) sum += r.midpoint[i][row * m + s];
      for (std::size_t s = 0; s < m; ++s) normalized[i][row * m + s] = r.midpoint[i][row * m + s] / sum;
    }
  }
  r.midpoint_network = structure.with_cpts(std::move(normalized));
  return r;
}

struct MarginalBounds {
  double low = 0.0;
  double high = 0.0;
  double midpoint() const { return 0.5 * (low + high); }
};

// Exact bounds on P(variable = state) over all completions of the data.
inline MarginalBounds marginal_bounds(const Dataset& data, const std::string& variable, const std::string& state) {
  const std::size_t v = data.variable_index(variable);
  const auto& states = data.variables()[v].states;
  const auto it = std::find(states.begin(), states.end(), state);
  if (it == states.end()) throw std::invalid_argument("'" + state + "' is not a state of " + variable);
  const int s = static_cast<int>(it - states.begin());
  const double total = data.total_weight();
  if (!(total > 0.0)) throw std::invalid_argument("dataset has no positive weight");
  double known = 0.0, missing = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const int value = data.at(i).values[v];
    if (value == kMissing) {
      missing += data.weight(i);
    } else if (value == s) {
      known += data.weight(i);
    }
  }
  return {known / total, (known + missing) / total};
}

}  // namespace aiml
