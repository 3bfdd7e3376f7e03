#pragma once

// AI&M: alternate an adjusting-imputation step, which moves a 1-completion of
// the z-replicated data towards P_theta one coordinate at a time, and an
// ML maximization step on the completed data. The surrogate score
// KL(P_c || P_theta) never increases.

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

enum class InitPolicy { posterior_draw, uniform_draw };

struct AimOptions {
  std::size_t z = 5;
  double tol = 1e-6;
  std::size_t max_iters = 200;
  std::size_t sweeps_per_ai_step = 1;
  InitPolicy init_completion = InitPolicy::posterior_draw;
  std::uint64_t seed = 0;

  void check() const {
    if (z < 1) throw std::invalid_argument("replication factor z must be at least 1");
    if (!(tol > 0.0)) throw std::invalid_argument("AI&M tolerance must be positive");
    if (max_iters < 1) throw std::invalid_argument("AI&M needs at least one iteration");
    if (sweeps_per_ai_step < 1) throw std::invalid_argument("sweeps_per_ai_step must be at least 1");
  }
};

inline constexpr double kLogFloor = -690.77552789821368;  // log(1e-300)
inline constexpr std::size_t kRefreshInterval = 1000;
inline constexpr double kTieTolerance = 1e-15;

// max(log P_theta(x), log 1e-300), memoized by assignment key.
class FlooredLogProb {
 public:
  explicit FlooredLogProb(Network theta) : theta_(std::move(theta)), codec_(theta_.codec()) {}

  double operator()(std::uint64_t key, std::span<const int> x) {
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    const double p = joint_probability_unchecked(theta_, x);
    const double lp = p > 0.0 ? std::max(std::log(p), kLogFloor) : kLogFloor;
    cache_.emplace(key, lp);
    return lp;
  }

  double operator()(std::span<const int> x) { return (*this)(codec_.encode(x), x); }

  const Network& theta() const { return theta_; }

  void reset(Network theta) {
    theta_ = std::move(theta);
    cache_.clear();
  }

 private:
  Network theta_;
  AssignmentCodec codec_;
  std::unordered_map<std::uint64_t, double> cache_;
};

// Sparse counts n_x of a 1-completion over W.
class StateCounts {
 public:
  explicit StateCounts(AssignmentCodec codec) : codec_(std::move(codec)) {}

  std::int64_t count(std::uint64_t key) const {
    auto it = n_.find(key);
    return it == n_.end() ? 0 : it->second;
  }
  std::int64_t count(std::span<const int> x) const { return count(codec_.encode(x)); }

  void add(std::uint64_t key, std::int64_t delta) {
    auto& n = n_[key];
    n += delta;
    total_ += delta;
    if (n < 0) throw std::logic_error("negative state count");
    if (n == 0) n_.erase(key);
  }

  std::int64_t total() const { return total_; }
  const AssignmentCodec& codec() const { return codec_; }
  const std::unordered_map<std::uint64_t, std::int64_t>& entries() const { return n_; }

 private:
  AssignmentCodec codec_;
  std::unordered_map<std::uint64_t, std::int64_t> n_;
  std::int64_t total_ = 0;
};

namespace aim_detail {

// (n/M)(log(n/M) - lp), zero for n = 0.
inline double kl_term(std::int64_t n, double m, double lp) {
  if (n <= 0) return 0.0;
  const double q = static_cast<double>(n) / m;
  return q * (std::log(q) - lp);
}

}  // namespace aim_detail

// KL(P_c || P_theta) with the floored log-probabilities.
inline double full_kl(const StateCounts& counts, FlooredLogProb& logp) {
  const double m = static_cast<double>(counts.total());
  double kl = 0.0;
  for (const auto& [key, n] : counts.entries()) {
    const Assignment x = counts.codec().decode(key);
    kl += aim_detail::kl_term(n, m, logp(key, x));
  }
  return kl;
}

// Change of KL(P_c || P_theta) when one replica moves from `from` to `to`.
// Only the two affected terms are recomputed.
inline double incremental_kl_delta(const StateCounts& counts, FlooredLogProb& logp,
                                   std::span<const int> from, std::span<const int> to) {
  const std::uint64_t a = counts.codec().encode(from);
  const std::uint64_t b = counts.codec().encode(to);
  const std::int64_t na = counts.count(a);
  if (na < 1) throw std::invalid_argument("no replica sits at the source state");
  if (a == b) return 0.0;
  const std::int64_t nb = counts.count(b);
  const double m = static_cast<double>(counts.total());
  const double la = logp(a, from);
  const double lb = logp(b, to);
  using aim_detail::kl_term;
  return kl_term(na - 1, m, la) - kl_term(na, m, la) + kl_term(nb + 1, m, lb) - kl_term(nb, m, lb);
}

// Each case replicated weight * z times; weights must be positive integers.
inline std::vector<CoarseCase> replicate_cases(const Dataset& data, std::size_t z) {
  std::vector<CoarseCase> out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double w = data.weight(i);
    if (!(w >= 1.0) || w != std::floor(w) || w > 1e9) {
      throw std::invalid_argument("AI&M needs positive integer case weights (row " + std::to_string(i) +
                                  " has weight " + std::to_string(w) + ")");
    }
    const auto copies = static_cast<std::size_t>(w) * z;
    for (std::size_t k = 0; k < copies; ++k) out.push_back(data.at(i));
  }
  return out;
}

struct InitialCompletion {
  std::vector<Assignment> assignment;  // per replica
  std::size_t fallbacks = 0;           // replicas drawn uniformly for lack of evidence support
};

namespace aim_detail {

inline Assignment uniform_fill(const CoarseCase& c, std::span<const std::size_t> card, Rng& rng) {
  Assignment x(c.values.begin(), c.values.end());
  for (std::size_t v = 0; v < x.size(); ++v)
    if (x[v] == kMissing) x[v] = static_cast<int>(uniform_index(rng, card[v]));
  return x;
}

inline constexpr double kEnumerateDraw = 4096.0;

// Joint draw from P_theta(. | X in U); nullopt if P(U) = 0.
inline std::optional<Assignment> posterior_fill(const Network& theta, const CoarseCase& c, Rng& rng) {
  if (c.complete()) return Assignment(c.values.begin(), c.values.end());
  CompatibleAssignments range(c, theta);
  if (range.count() <= kEnumerateDraw) {
    std::vector<Assignment> xs;
    std::vector<double> ps;
    double total = 0.0;
    for (const auto& x : range) {
      xs.push_back(x);
      ps.push_back(joint_probability_unchecked(theta, x));
      total += ps.back();
    }
    if (!(total > 0.0)) return std::nullopt;
    return xs[draw_categorical(rng, ps)];
  }
  // Sequential conditionals: draw each missing variable given the rest so far.
  std::vector<int> ev = c.values;
  for (std::size_t v = 0; v < ev.size(); ++v) {
    if (ev[v] != kMissing) continue;
    const std::size_t keep[] = {v};
    const Factor f = eliminate(theta, ev, keep);
    if (!(f.total() > 0.0)) return std::nullopt;
    ev[v] = static_cast<int>(draw_categorical(rng, f.values()));
  }
  return Assignment(ev.begin(), ev.end());
}

}  // namespace aim_detail

inline InitialCompletion initial_completion(const Network& theta0, const std::vector<CoarseCase>& replicas,
                                            InitPolicy policy, Rng& rng) {
  InitialCompletion out;
  out.assignment.reserve(replicas.size());
  for (const auto& c : replicas) {
    if (policy == InitPolicy::posterior_draw) {
      if (auto x = aim_detail::posterior_fill(theta0, c, rng)) {
        out.assignment.push_back(std::move(*x));
        continue;
      }
      ++out.fallbacks;
    }
    out.assignment.push_back(aim_detail::uniform_fill(c, theta0.cardinalities(), rng));
  }
  return out;
}

// Replicated data, its current 1-completion, the counts it induces and the
// current parameters.
class AimState {
 public:
  AimState(const Network& theta0, std::vector<CoarseCase> replicas, std::vector<Assignment> completion,
           std::size_t z)
      : replicas_(std::move(replicas)),
        completion_(std::move(completion)),
        counts_(theta0.codec()),
        logp_(theta0),
        z_(z) {
    if (completion_.size() != replicas_.size()) throw std::invalid_argument("one assignment per replica");
    for (std::size_t j = 0; j < replicas_.size(); ++j) {
      if (!replicas_[j].compatible(completion_[j])) {
        throw std::invalid_argument("replica " + std::to_string(j) + " completed outside its case");
      }
      counts_.add(counts_.codec().encode(completion_[j]), 1);
      if (!replicas_[j].complete()) ++free_;
    }
    refresh();
  }

  const std::vector<CoarseCase>& replicas() const { return replicas_; }
  const std::vector<Assignment>& completion() const { return completion_; }
  const StateCounts& counts() const { return counts_; }
  const Network& theta() const { return logp_.theta(); }
  FlooredLogProb& logp() { return logp_; }
  std::size_t z() const { return z_; }
  std::size_t free_replicas() const { return free_; }

  // Running KL(P_c || P_theta).
  double score() const { return kl_; }

  void refresh() {
    kl_ = full_kl(counts_, logp_);
    since_refresh_ = 0;
  }

  // Moves replica j to `to`, which must be compatible with its case.
  void move(std::size_t j, const Assignment& to) {
    const double delta = incremental_kl_delta(counts_, logp_, completion_[j], to);
    counts_.add(counts_.codec().encode(completion_[j]), -1);
    counts_.add(counts_.codec().encode(to), 1);
    completion_[j] = to;
    kl_ += delta;
    if (++since_refresh_ >= kRefreshInterval) refresh();
  }

  void set_theta(Network theta) {
    logp_.reset(std::move(theta));
    refresh();
  }

 private:
  std::vector<CoarseCase> replicas_;
  std::vector<Assignment> completion_;
  StateCounts counts_;
  FlooredLogProb logp_;
  std::size_t z_;
  std::size_t free_ = 0;
  double kl_ = 0.0;
  std::size_t since_refresh_ = 0;
};

// One pass over the replicas in order; each adopts the best of its current
// assignment and the assignments differing in one missing coordinate. Ties
// keep the current assignment. Returns the number of moves.
inline std::size_t ai_sweep(AimState& state) {
  std::size_t moves = 0;
  const auto card = state.theta().cardinalities();
  Assignment candidate;
  Assignment best;
  for (std::size_t j = 0; j < state.replicas().size(); ++j) {
    const CoarseCase& c = state.replicas()[j];
    if (c.complete()) continue;
    const Assignment& current = state.completion()[j];
    double best_delta = 0.0;
    bool found = false;
    candidate = current;
    for (std::size_t v = 0; v < c.values.size(); ++v) {
      if (c.values[v] != kMissing) continue;
      for (std::size_t s = 0; s < card[v]; ++s) {
        if (static_cast<int>(s) == current[v]) continue;
        candidate[v] = static_cast<int>(s);
        const double delta = incremental_kl_delta(state.counts(), state.logp(), current, candidate);
        if (delta < best_delta - kTieTolerance) {
          best_delta = delta;
          best = candidate;
          found = true;
        }
      }
      candidate[v] = current[v];
    }
    if (found) {
      state.move(j, best);
      ++moves;
    }
  }
  state.refresh();
  return moves;
}

// ML fit to the completed data with weights n_x / z (original-case units).
inline Estimate m_step(AimState& state, const Network& structure) {
  FamilyCounts fc(structure);
  const double z = static_cast<double>(state.z());
  for (const auto& [key, n] : state.counts().entries()) {
    fc.add(state.counts().codec().decode(key), static_cast<double>(n) / z);
  }
  Estimate e = fc.estimate();
  state.set_theta(structure.with_cpts(e.cpts));
  return e;
}

struct AimIteration {
  std::size_t iteration = 0;
  double ai_score = 0.0;  // KL(P_{c_t} || P_{theta_t}) after the AI step
  double score = 0.0;     // KL(P_{c_t} || P_{theta_{t+1}}) after the M step
  double sat_lower_bound = 0.0;  // -H(m) - score
  std::size_t moves = 0;
};

struct AimResult {
  Network raw;
  Network smoothed;
  RowCounts row_counts;
  double initial_score = 0.0;  // KL(P_{c_0} || P_{theta_0})
  std::vector<AimIteration> trace;
  double score = 0.0;  // terminal KL(P_{c_t} || P_{theta_t}) for the returned theta
  double entropy = 0.0;  // H(m) of the original data
  std::size_t iterations = 0;
  bool converged = false;
  std::size_t init_fallbacks = 0;
  std::vector<CoarseCase> replicas;
  std::vector<Assignment> completion;
};

inline AimResult aim_fit(const Network& structure, const Network& theta0, const Dataset& data,
                         const AimOptions& opts = {}) {
  opts.check();
  data.check_binding(structure);
  if (!theta0.same_structure(structure)) throw std::invalid_argument("initial parameters do not match the structure");
  if (!validate_network(theta0).empty()) throw std::invalid_argument("initial parameters are invalid");

  std::vector<CoarseCase> replicas = replicate_cases(data, opts.z);
  if (replicas.empty()) throw std::invalid_argument("dataset is empty");
  Rng rng(opts.seed);
  InitialCompletion init = initial_completion(theta0, replicas, opts.init_completion, rng);

  AimResult r{theta0, theta0, {}, 0.0, {}, 0.0, 0.0, 0, false, init.fallbacks, {}, {}};
  r.entropy = empirical_pattern_distribution(data).entropy;
  AimState state(theta0, std::move(replicas), std::move(init.assignment), opts.z);
  r.initial_score = state.score();

  double prev = r.initial_score;
  Estimate last;
  for (std::size_t t = 1; t <= opts.max_iters; ++t) {
    AimIteration it;
    it.iteration = t;
    for (std::size_t s = 0; s < opts.sweeps_per_ai_step; ++s) it.moves += ai_sweep(state);
    it.ai_score = state.score();
    last = m_step(state, structure);
    it.score = state.score();
    it.sat_lower_bound = -r.entropy - it.score;
    r.trace.push_back(it);
    r.iterations = t;
    if (state.free_replicas() == 0 || prev - it.score < opts.tol) {
      r.converged = true;
      break;
    }
    prev = it.score;
  }
  r.raw = state.theta();
  r.row_counts = last.row_counts;
  r.smoothed = smooth(r.raw, r.row_counts);
  r.score = state.score();
  r.replicas = state.replicas();
  r.completion = state.completion();
  return r;
}

}  // namespace aiml
