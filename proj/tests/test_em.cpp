#include <gtest/gtest.h>

#include <cmath>

#include "aiml/aim.hpp"
#include "aiml/coarsen_gen.hpp"
#include "aiml/dataset_io.hpp"
#include "aiml/em.hpp"
#include "aiml/likelihoods.hpp"
#include "aiml/network_io.hpp"
#include "oracles.hpp"

using namespace aiml;

namespace {

Network basic() { return read_network(oracle::data_path("basic.net")); }
Network asia() { return read_network(oracle::data_path("asia.net")); }
Dataset fixture() { return read_dataset_csv(oracle::data_path("basic_coarse.csv"), basic()); }

}  // namespace

TEST(Em, FixtureFaceValueMaximum) {
  const EmResult r = em_fit(basic(), fixture(), {});
  EXPECT_TRUE(r.converged);
  EXPECT_NEAR(r.raw.cpt(0)[0], 0.5, 1e-12);
  EXPECT_NEAR(r.raw.cpt(1)[0], 0.2727, 1e-3);
}

TEST(Em, ClosedFormFixedPoint) {
  EmOptions o;
  o.tol = 1e-13;
  o.max_iters = 1000;
  const EmResult r = em_fit(basic(), fixture(), o);
  EXPECT_NEAR(r.raw.cpt(1)[0], 0.15 / 0.55, 1e-6);
}

TEST(Em, CompleteDataIsMl) {
  const Network net = asia();
  Rng rng(2);
  Dataset d = Dataset::for_network(net);
  std::vector<WeightedAssignment> rows;
  for (const auto& x : sample(net, 500, rng)) {
    d.add(complete_case(x), 1.0);
    rows.push_back({x, 1.0});
  }
  const EmResult r = em_fit(net, d, {});
  EXPECT_EQ(r.iterations, 1u);
  const Estimate e = ml_estimate(net, rows);
  for (std::size_t i = 0; i < net.size(); ++i)
    for (std::size_t k = 0; k < e.cpts[i].size(); ++k) EXPECT_NEAR(r.raw.cpt(i)[k], e.cpts[i][k], 1e-12);
}

TEST(Em, MonotoneAndFixedPointOnGeneratedData) {
  const Network truth = asia();
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    Rng rng(derive_seed(31, seed));
    const Network aug = build_coarsening_network(truth, CoarseningSpec::parse("2:0.1:0.05"), rng);
    const Dataset d = generate_dataset(aug, 1000, rng).data;
    EmOptions o;
    o.max_iters = 500;
    const EmResult r = em_fit(truth, d, o);
    for (std::size_t t = 1; t < r.trace.size(); ++t) EXPECT_GE(r.trace[t], r.trace[t - 1] - 1e-9);
    EXPECT_NEAR(r.trace.back(), face_value_loglik(r.raw, d).per_case_average, 1e-12);
    if (!r.converged) continue;
    // One more E+M pass gains less than the tolerance.
    EmOptions one;
    one.init = EmInit::given;
    one.theta0 = r.raw;
    one.max_iters = 1;
    const EmResult next = em_fit(truth, d, one);
    EXPECT_LT(next.trace.back() - r.trace.back(), o.tol) << "seed " << seed;
    double worst = 0.0;
    for (std::size_t i = 0; i < truth.size(); ++i)
      for (std::size_t k = 0; k < truth.cpt(i).size(); ++k)
        worst = std::max(worst, std::abs(next.raw.cpt(i)[k] - r.raw.cpt(i)[k]));
    EXPECT_LT(worst, 1e-2) << "seed " << seed;
  }
}

TEST(Em, InitOptions) {
  EmOptions o;
  o.init = EmInit::random;
  o.seed = 4;
  EXPECT_NEAR(em_fit(basic(), fixture(), o).raw.cpt(1)[0], 0.2727, 1e-3);
  o.init = EmInit::given;
  EXPECT_THROW(em_fit(basic(), fixture(), o), std::invalid_argument);
  o.tol = 0.0;
  EXPECT_THROW(o.check(), std::invalid_argument);
}

TEST(Em, AllZeroEvidenceThrows) {
  const Network net = asia();
  Dataset d = Dataset::for_network(net);
  d.add(make_case(net, {{"lung", "yes"}, {"either", "no"}}), 1.0);
  EmOptions o;
  o.init = EmInit::given;
  o.theta0 = net;
  EXPECT_THROW(em_fit(net, d, o), ZeroSupportError);
}

TEST(Em, FractionalWeightsScaleLinearly) {
  const Dataset d = fixture();
  Dataset scaled(d.variables());
  for (std::size_t i = 0; i < d.size(); ++i) scaled.add(d.at(i), 2000.0 * d.weight(i));
  const EmResult a = em_fit(basic(), d, {});
  const EmResult b = em_fit(basic(), scaled, {});
  EXPECT_NEAR(a.raw.cpt(1)[0], b.raw.cpt(1)[0], 1e-9);
  EXPECT_NEAR(2000.0 * a.row_counts[1][0], b.row_counts[1][0], 1e-6);
}

TEST(Em, AgreesWithAimUnderMar) {
  const Network truth = basic();
  Rng rng(8);
  const Network aug = build_coarsening_network(truth, CoarseningSpec::parse("1:0.2:0"), rng);
  const Dataset d = generate_dataset(aug, 10000, rng).data;
  const EmResult em = em_fit(truth, d, {});
  AimOptions ao;
  ao.z = 2;
  ao.seed = 1;
  const AimResult aim = aim_fit(truth, em.raw, d, ao);
  for (std::size_t i = 0; i < truth.size(); ++i)
    for (std::size_t k = 0; k < truth.cpt(i).size(); ++k) EXPECT_NEAR(em.raw.cpt(i)[k], aim.raw.cpt(i)[k], 0.02);
}
