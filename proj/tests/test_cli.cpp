#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "aiml/dataset_io.hpp"
#include "aiml/network_io.hpp"
#include "oracles.hpp"

using namespace aiml;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  int code = -1;
  std::string out;
};

Outcome run(const std::string& args) {
  const std::string cmd = std::string(AIML_CLI_PATH) + " " + args + " 2>&1";
  FILE* p = popen(cmd.c_str(), "r");
  Outcome o;
  if (!p) return o;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), p)) o.out += buf.data();
  const int status = pclose(p);
  o.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return o;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("aiml_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string tmp(const std::string& name) const { return (dir_ / name).string(); }
  static std::string data(const std::string& name) { return oracle::data_path(name); }

  fs::path dir_;
};

}  // namespace

TEST_F(Cli, SatValueAndCertificate) {
  const Outcome o = run("lik --net " + data("basic.net") + " --data " + data("basic_coarse.csv") + " --which sat");
  EXPECT_EQ(o.code, 0) << o.out;
  EXPECT_NE(o.out.find("sat -1.10589 per case"), std::string::npos) << o.out;
  EXPECT_NE(o.out.find("(t,t)=0.111111"), std::string::npos) << o.out;
}

TEST_F(Cli, MissingNetIsUsageError) {
  const Outcome o = run("lik --data " + data("basic_coarse.csv") + " --which sat");
  EXPECT_EQ(o.code, 1);
  EXPECT_NE(o.out.find("Usage"), std::string::npos);
  EXPECT_EQ(run("no-such-command").code, 1);
  EXPECT_EQ(run("lik --bogus-flag").code, 1);
}

TEST_F(Cli, DecomposedOnMismatchedStructuresIsFormatError) {
  const Outcome o = run("eval --truth " + data("asia.net") + " --estimate " + data("basic.net") + " --mode decomposed");
  EXPECT_EQ(o.code, 2) << o.out;
  EXPECT_EQ(run("lik --net " + tmp("absent.net") + " --data " + data("basic_coarse.csv") + " --which fv").code, 2);
}

TEST_F(Cli, GenerateLearnEvaluateRoundTrip) {
  const std::string csv = tmp("d.csv"), mech = tmp("m.net");
  Outcome o = run("gen-data --net " + data("asia.net") + " --coarsening 2:0.1:0.05 --n 300 --seed 4 --out " + csv +
                  " --emit-mechanism " + mech);
  ASSERT_EQ(o.code, 0) << o.out;
  const Network asia = read_network(data("asia.net"));
  const Dataset d = read_dataset_csv(csv, asia);
  EXPECT_EQ(d.total_weight(), 300.0);
  EXPECT_TRUE(validate_network(read_network(mech)).empty());

  for (const std::string method : {"em", "aim", "conservative"}) {
    const std::string est = tmp(method + ".net"), trace = tmp(method + "_trace.csv");
    o = run("learn --net-structure " + data("asia.net") + " --data " + csv + " --method " + method +
            " --seed 2 --out " + est + " --trace " + trace);
    ASSERT_EQ(o.code, 0) << method << ": " << o.out;
    const Network fitted = read_network(est);
    EXPECT_TRUE(fitted.same_structure(asia));
    EXPECT_FALSE(slurp(trace).empty());
    o = run("eval --truth " + data("asia.net") + " --estimate " + est);
    ASSERT_EQ(o.code, 0) << o.out;
    EXPECT_EQ(o.out.rfind("method,ce,mse,pct_missing\n", 0), 0u);
  }
  EXPECT_EQ(slurp(tmp("em_trace.csv")).rfind("iteration,loglik\n", 0), 0u);
  EXPECT_EQ(slurp(tmp("aim_trace.csv")).rfind("iteration,score,sat_lower_bound\n", 0), 0u);
}

TEST_F(Cli, LearnIsDeterministic) {
  const std::string a = tmp("a.net"), b = tmp("b.net");
  const std::string base = "learn --net-structure " + data("basic.net") + " --data " + data("basic_coarse_n2000.csv") +
                           " --method aim --z 4 --seed 7 --out ";
  ASSERT_EQ(run(base + a).code, 0);
  ASSERT_EQ(run(base + b).code, 0);
  EXPECT_EQ(slurp(a), slurp(b));
}

TEST_F(Cli, ExperimentCsvIsByteIdentical) {
  const std::string a = tmp("a.csv"), b = tmp("b.csv");
  const std::string base = "experiment --net " + data("asia.net") + " --coarsening 2:0.1:0.05 --n 200 --z 2 --runs 3 --seed 11";
  ASSERT_EQ(run(base + " --out " + a).code, 0);
  ASSERT_EQ(run(base + " --threads 3 --out " + b).code, 0);
  const std::string text = slurp(a);
  EXPECT_EQ(text, slurp(b));
  EXPECT_EQ(text.rfind("run,pct_missing,ce_final_em,ce_final_aim,ce_diff,mse_diff,score\n", 0), 0u);
  EXPECT_NE(text.find("\nmean,"), std::string::npos);
  EXPECT_NE(text.find("\nsd,"), std::string::npos);
}

TEST_F(Cli, RandomizeKeepsStructure) {
  const std::string out = tmp("r.net");
  ASSERT_EQ(run("randomize --net " + data("asia.net") + " --seed 3 --out " + out).code, 0);
  const Network a = read_network(data("asia.net"));
  const Network r = read_network(out);
  EXPECT_TRUE(r.same_structure(a));
  EXPECT_NE(r.cpts(), a.cpts());
}
