#pragma once

// Synthetic incomplete data that is generally not missing at random. The
// network is extended by one binary observation node obsV per variable V whose
// parents are V plus a random set of other variables and earlier observation
// nodes; V is deleted from a sampled case whenever obsV = false.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "aiml/coarse_data.hpp"
#include "aiml/network.hpp"
#include "aiml/rng.hpp"

namespace aiml {

// Generator settings, written `mp:mu:sigma` on the command line.
struct CoarseningSpec {
  int mp = 0;          // max number of extra parents per observation node
  double mu = 0.0;     // mean probability that a value goes missing
  double sigma = 0.0;  // variance of the per-row missingness probability

  void check() const {
    if (mp < 0) throw std::invalid_argument("mp must be nonnegative");
    if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must lie in [0,1]");
    if (!(sigma >= 0.0)) throw std::invalid_argument("sigma must be nonnegative");
    if (sigma > 0.0 && !(sigma < mu * (1.0 - mu))) {
      throw std::invalid_argument("sigma must be smaller than mu*(1-mu)");
    }
  }

  static CoarseningSpec parse(const std::string& text) {
    std::vector<std::string> parts;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ':')) parts.push_back(part);
    if (parts.size() != 3) throw std::invalid_argument("coarsening must be mp:mu:sigma, got '" + text + "'");
    CoarseningSpec spec;
    try {
      std::size_t used = 0;
      spec.mp = std::stoi(parts[0], &used);
      if (used != parts[0].size()) throw std::invalid_argument(parts[0]);
      spec.mu = std::stod(parts[1], &used);
      if (used != parts[1].size()) throw std::invalid_argument(parts[1]);
      spec.sigma = std::stod(parts[2], &used);
      if (used != parts[2].size()) throw std::invalid_argument(parts[2]);
    } catch (const std::logic_error&) {
      throw std::invalid_argument("coarsening must be mp:mu:sigma, got '" + text + "'");
    }
    spec.check();
    return spec;
  }

  std::string to_string() const {
    std::ostringstream os;
    os << mp << ":" << mu << ":" << sigma;
    return os.str();
  }
};

struct BetaShape {
  double alpha = 0.0;
  double beta = 0.0;
  bool point_mass = false;
  double point = 0.0;  // the mass location when point_mass
};

// Beta with mean mu and variance sigma; sigma = 0 gives a point mass at mu.
inline BetaShape beta_from_mean_variance(double mu, double sigma) {
  if (sigma == 0.0) {
    if (!(mu >= 0.0 && mu <= 1.0)) throw std::invalid_argument("mu must lie in [0,1]");
    return {0.0, 0.0, true, mu};
  }
  if (!(mu > 0.0 && mu < 1.0)) throw std::invalid_argument("mu must lie in (0,1) when sigma > 0");
  if (!(sigma > 0.0) || !(sigma < mu * (1.0 - mu))) {
    throw std::invalid_argument("invalid coarsening spec: sigma must lie in [0, mu*(1-mu))");
  }
  const double nu = mu * (1.0 - mu) / sigma - 1.0;
  return {mu * nu, (1.0 - mu) * nu, false, 0.0};
}

inline constexpr double kBetaFloor = 1e-9;

// One draw, truncated to [1e-9, 1 - 1e-9] unless the shape is a point mass.
inline double draw_missing_probability(const BetaShape& shape, Rng& rng) {
  if (shape.point_mass) return shape.point;
  return std::clamp(beta_draw(rng, shape.alpha, shape.beta), kBetaFloor, 1.0 - kBetaFloor);
}

inline std::string observer_name(const std::string& node) { return "obs" + node; }

inline constexpr int kObserved = 0;    // obsV = true
inline constexpr int kUnobserved = 1;  // obsV = false

// Augmented network: the k original nodes (CPTs untouched) followed by obsV_1
// ... obsV_k with states (true, false).
inline Network build_coarsening_network(const Network& net, const CoarseningSpec& spec, Rng& rng) {
  spec.check();
  const BetaShape shape = beta_from_mean_variance(spec.mu, spec.sigma);
  const std::size_t k = net.size();

  NetworkSpec out = net.spec();
  out.name = net.name() + "_coarsened";
  for (std::size_t i = 0; i < k; ++i) {
    std::string name = observer_name(net.node(i).name);
    while (net.find(name)) name += "_";
    out.nodes.push_back({name, {"true", "false"}, {}});
  }

  for (std::size_t i = 0; i < k; ++i) {
    // Candidates: every other original variable and the earlier observers.
    std::vector<std::size_t> pool;
    for (std::size_t j = 0; j < k; ++j)
      if (j != i) pool.push_back(j);
    for (std::size_t j = 0; j < i; ++j) pool.push_back(k + j);

    std::size_t extra = static_cast<std::size_t>(uniform_index(rng, static_cast<std::uint64_t>(spec.mp) + 1));
    extra = std::min(extra, pool.size());
    // Partial Fisher-Yates for a uniform subset of size `extra`.
    for (std::size_t t = 0; t < extra; ++t) {
      const std::size_t pick = t + static_cast<std::size_t>(uniform_index(rng, pool.size() - t));
      std::swap(pool[t], pool[pick]);
    }
    std::vector<std::size_t> chosen(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(extra));
    std::sort(chosen.begin(), chosen.end());

    auto& obs = out.nodes[k + i];
    obs.parents.push_back(net.node(i).name);
    for (std::size_t p : chosen) obs.parents.push_back(out.nodes[p].name);

    std::size_t rows = 1;
    for (const auto& p : obs.parents) {
      for (const auto& n : out.nodes)
        if (n.name == p) rows *= n.states.size();
    }
    Cpt cpt;
    for (std::size_t r = 0; r < rows; ++r) {
      const double q = draw_missing_probability(shape, rng);
      cpt.push_back(1.0 - q);
      cpt.push_back(q);
    }
    out.cpts.push_back(std::move(cpt));
  }
  return Network::from_spec(std::move(out));
}

// Number of original variables of an augmented network; throws unless the
// node layout is [V_1..V_k, obsV_1..obsV_k].
inline std::size_t original_count(const Network& augmented) {
  const std::size_t n = augmented.size();
  if (n % 2 != 0) throw std::invalid_argument("augmented network must have 2k nodes");
  const std::size_t k = n / 2;
  for (std::size_t i = 0; i < k; ++i) {
    const auto& obs = augmented.node(k + i);
    if (obs.name.rfind(observer_name(augmented.node(i).name), 0) != 0 || obs.states.size() != 2 ||
        obs.parents.empty() || obs.parents.front() != augmented.node(i).name) {
      throw std::invalid_argument("node " + obs.name + " is not the observer of " +
                                  augmented.node(i).name);
    }
  }
  return k;
}

// The original network embedded in an augmented one.
inline Network primary_network(const Network& augmented, const std::string& name) {
  const std::size_t k = original_count(augmented);
  NetworkSpec s;
  s.name = name;
  for (std::size_t i = 0; i < k; ++i) {
    s.nodes.push_back(augmented.node(i));
    s.cpts.push_back(augmented.cpt(i));
  }
  return Network::from_spec(std::move(s));
}

// Replaces the original part of an augmented network by `truth` (same nodes).
inline Network attach_mechanism(const Network& truth, const Network& mechanism) {
  const std::size_t k = original_count(mechanism);
  if (k != truth.size()) throw std::invalid_argument("mechanism does not match the network");
  NetworkSpec s = mechanism.spec();
  for (std::size_t i = 0; i < k; ++i) {
    if (!(s.nodes[i] == truth.node(i))) {
      throw std::invalid_argument("mechanism node " + s.nodes[i].name + " differs from the network");
    }
    s.cpts[i] = truth.cpt(i);
  }
  return Network::from_spec(std::move(s));
}

struct GeneratedData {
  Dataset data;
  double missing_fraction = 0.0;
};

// n unit-weight cases over the original variables; V_i is missing exactly when
// the sampled obsV_i is false.
inline GeneratedData generate_dataset(const Network& augmented, std::size_t n, Rng& rng) {
  const std::size_t k = original_count(augmented);
  std::vector<Variable> vars;
  for (std::size_t i = 0; i < k; ++i) vars.push_back({augmented.node(i).name, augmented.node(i).states});
  GeneratedData out{Dataset(std::move(vars)), 0.0};
  std::size_t missing = 0;
  for (std::size_t t = 0; t < n; ++t) {
    const Assignment x = sample_one(augmented, rng);
    CoarseCase c{std::vector<int>(x.begin(), x.begin() + static_cast<std::ptrdiff_t>(k))};
    for (std::size_t i = 0; i < k; ++i) {
      if (x[k + i] == kUnobserved) {
        c.values[i] = kMissing;
        ++missing;
      }
    }
    out.data.add(std::move(c), 1.0);
  }
  out.missing_fraction = n == 0 ? 0.0 : static_cast<double>(missing) / static_cast<double>(n * k);
  return out;
}

}  // namespace aiml
