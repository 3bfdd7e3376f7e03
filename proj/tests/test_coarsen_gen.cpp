#include <gtest/gtest.h>

#include <algorithm>

#include "aiml/coarsen_gen.hpp"
#include "aiml/network_io.hpp"
#include "oracles.hpp"

using namespace aiml;

namespace {

Network basic() { return read_network(oracle::data_path("basic.net")); }
Network asia() { return read_network(oracle::data_path("asia.net")); }

}  // namespace

TEST(Beta, MeanVarianceParameters) {
  const BetaShape a = beta_from_mean_variance(0.1, 0.05);
  EXPECT_NEAR(a.alpha, 0.08, 1e-12);
  EXPECT_NEAR(a.beta, 0.72, 1e-12);
  const BetaShape b = beta_from_mean_variance(0.5, 0.125);
  EXPECT_NEAR(b.alpha, 0.5, 1e-12);
  EXPECT_NEAR(b.beta, 0.5, 1e-12);
  const BetaShape c = beta_from_mean_variance(0.3, 0.0);
  EXPECT_TRUE(c.point_mass);
  Rng rng(1);
  for (int k = 0; k < 10; ++k) EXPECT_EQ(draw_missing_probability(c, rng), 0.3);
  EXPECT_THROW(beta_from_mean_variance(0.1, 0.095), std::invalid_argument);
}

TEST(Beta, SampleMomentsAndTruncation) {
  const BetaShape s = beta_from_mean_variance(0.1, 0.05);
  Rng rng(2);
  double sum = 0.0, sq = 0.0;
  const int n = 200000;
  for (int k = 0; k < n; ++k) {
    const double q = draw_missing_probability(s, rng);
    ASSERT_GE(q, kBetaFloor);
    ASSERT_LE(q, 1.0 - kBetaFloor);
    sum += q;
    sq += q * q;
  }
  const double mean = sum / n;
  EXPECT_NEAR(mean, 0.1, 0.003);
  EXPECT_NEAR(sq / n - mean * mean, 0.05, 0.003);
}

TEST(CoarseningSpec, Parse) {
  const auto s = CoarseningSpec::parse("2:0.1:0.05");
  EXPECT_EQ(s.mp, 2);
  EXPECT_DOUBLE_EQ(s.mu, 0.1);
  EXPECT_DOUBLE_EQ(s.sigma, 0.05);
  EXPECT_THROW(CoarseningSpec::parse("2:0.1"), std::invalid_argument);
  EXPECT_THROW(CoarseningSpec::parse("x:0.1:0.05"), std::invalid_argument);
  EXPECT_THROW(CoarseningSpec::parse("2:0.1:0.2"), std::invalid_argument);
  EXPECT_THROW(CoarseningSpec::parse("-1:0.1:0"), std::invalid_argument);
}

TEST(Mechanism, NoExtraParentsWhenMpZero) {
  Rng rng(3);
  const Network aug = build_coarsening_network(asia(), CoarseningSpec::parse("0:0.2:0.05"), rng);
  const std::size_t k = original_count(aug);
  for (std::size_t i = 0; i < k; ++i) EXPECT_EQ(aug.node(k + i).parents, std::vector<std::string>{aug.node(i).name});
}

TEST(Mechanism, SigmaZeroIsMar) {
  Rng rng(4);
  const Network aug = build_coarsening_network(asia(), CoarseningSpec::parse("3:0.1:0"), rng);
  const std::size_t k = original_count(aug);
  for (std::size_t i = 0; i < k; ++i) {
    const auto& cpt = aug.cpt(k + i);
    for (std::size_t r = 0; r < cpt.size() / 2; ++r) EXPECT_EQ(cpt[2 * r + 1], 0.1);
  }
}

TEST(Mechanism, StructureInvariants) {
  const Network truth = asia();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng a(seed), b(seed);
    const Network aug = build_coarsening_network(truth, CoarseningSpec::parse("2:0.1:0.05"), a);
    EXPECT_EQ(to_text(aug), to_text(build_coarsening_network(truth, CoarseningSpec::parse("2:0.1:0.05"), b)));
    const std::size_t k = original_count(aug);
    ASSERT_EQ(k, truth.size());
    for (std::size_t i = 0; i < k; ++i) {
      EXPECT_EQ(aug.node(i), truth.node(i));
      EXPECT_EQ(aug.cpt(i), truth.cpt(i));
      const auto& ps = aug.node(k + i).parents;
      EXPECT_EQ(ps.front(), truth.node(i).name);
      EXPECT_LE(ps.size(), 3u);
      EXPECT_EQ(std::count(ps.begin(), ps.end(), truth.node(i).name), 1);
      // observers only depend on earlier observers
      for (const auto& p : ps) {
        const std::size_t j = aug.index_of(p);
        if (j >= k) {
          EXPECT_LT(j, k + i);
        }
      }
    }
    EXPECT_TRUE(validate_network(aug).empty());
  }
}

TEST(Generate, MissingFractionSigmaZero) {
  Rng rng(5);
  const Network aug = build_coarsening_network(basic(), CoarseningSpec::parse("1:0.1:0"), rng);
  const GeneratedData g = generate_dataset(aug, 100000, rng);
  EXPECT_NEAR(g.missing_fraction, 0.1, 0.004);
  EXPECT_NEAR(g.data.missing_fraction(), g.missing_fraction, 1e-15);
}

TEST(Generate, ExtremeMu) {
  Rng rng(6);
  const Network none = build_coarsening_network(asia(), CoarseningSpec::parse("2:0:0"), rng);
  EXPECT_TRUE(generate_dataset(none, 500, rng).data.complete());
  const Network all = build_coarsening_network(asia(), CoarseningSpec::parse("2:1:0"), rng);
  const GeneratedData g = generate_dataset(all, 500, rng);
  EXPECT_EQ(g.missing_fraction, 1.0);
}

TEST(Generate, FixedMechanismReproducesFixtureProportions) {
  const Network aug = attach_mechanism(basic(), read_network(oracle::data_path("basic_mechanism.net")));
  Rng rng(7);
  const GeneratedData g = generate_dataset(aug, 200000, rng);
  const auto m = empirical_pattern_distribution(g.data);
  ASSERT_EQ(m.patterns.size(), 4u);
  const Network net = basic();
  EXPECT_NEAR(m.frequency[*m.find(make_case(net, {{"A", "t"}}))], 0.45, 0.005);
  EXPECT_NEAR(m.frequency[*m.find(make_case(net, {{"A", "t"}, {"B", "t"}}))], 0.05, 0.003);
  EXPECT_NEAR(m.frequency[*m.find(make_case(net, {{"A", "f"}, {"B", "t"}}))], 0.1, 0.003);
  EXPECT_NEAR(m.frequency[*m.find(make_case(net, {{"A", "f"}, {"B", "f"}}))], 0.4, 0.005);
}

TEST(Generate, MissingPercentagesSpanWideRange) {
  const Network truth = asia();
  double lo = 1.0, hi = 0.0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    Rng rng(derive_seed(99, seed));
    const Network aug = build_coarsening_network(truth, CoarseningSpec::parse("2:0.1:0.05"), rng);
    const double f = generate_dataset(aug, 1000, rng).missing_fraction;
    lo = std::min(lo, f);
    hi = std::max(hi, f);
  }
  EXPECT_LE(lo, 0.04);
  EXPECT_GE(hi, 0.20);
}
