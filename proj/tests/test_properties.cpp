#include <gtest/gtest.h>

#include "aiml/aim.hpp"
#include "aiml/em.hpp"
#include "instances.hpp"

using namespace aiml;

class Randomized : public ::testing::TestWithParam<int> {};

TEST_P(Randomized, AimScoreNeverIncreases) {
  const auto inst = instances::make(static_cast<std::uint64_t>(GetParam()));
  AimOptions o;
  o.z = 1 + inst.seed % 4;
  o.seed = inst.seed;
  o.tol = 1e-300;
  o.max_iters = 30;
  o.init_completion = inst.seed % 2 ? InitPolicy::posterior_draw : InitPolicy::uniform_draw;
  const AimResult r = aim_fit(inst.truth, inst.theta0, inst.data, o);
  double prev = r.initial_score;
  for (const auto& it : r.trace) {
    EXPECT_LE(it.ai_score, prev + 1e-9) << inst.label << " iteration " << it.iteration;
    EXPECT_LE(it.score, it.ai_score + 1e-9) << inst.label << " iteration " << it.iteration;
    prev = it.score;
  }
  EXPECT_GE(r.score, 0.0);
}

TEST_P(Randomized, EmLoglikNeverDecreases) {
  const auto inst = instances::make(static_cast<std::uint64_t>(GetParam()));
  EmOptions o;
  o.init = EmInit::given;
  o.theta0 = inst.theta0;
  o.tol = 1e-12;
  o.max_iters = 60;
  const EmResult r = em_fit(inst.truth, inst.data, o);
  ASSERT_GE(r.trace.size(), 2u) << inst.label;
  for (std::size_t t = 1; t < r.trace.size(); ++t)
    EXPECT_GE(r.trace[t], r.trace[t - 1] - 1e-9) << inst.label << " iteration " << t;
}

INSTANTIATE_TEST_SUITE_P(Instances, Randomized, ::testing::Range(0, 50));
