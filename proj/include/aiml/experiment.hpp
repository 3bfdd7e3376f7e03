#pragma once

// Batch comparison of EM and AI&M on generated incomplete data: per run a
// coarsening mechanism, a dataset, both fits and their scores against truth.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <ostream>
#include <string>
#include <thread>
#include <vector>

#include "aiml/aim.hpp"
#include "aiml/coarsen_gen.hpp"
#include "aiml/em.hpp"
#include "aiml/eval.hpp"
#include "aiml/network.hpp"
#include "aiml/network_io.hpp"
#include "aiml/rng.hpp"

namespace aiml {

struct ExperimentConfig {
  Network truth;
  std::optional<Network> mechanism;  // fixed augmented network; otherwise one is drawn per run
  CoarseningSpec coarsening;
  std::size_t n = 1000;
  std::size_t z = 5;
  std::size_t runs = 20;
  std::uint64_t seed = 0;
  double em_tol = 1e-6;
  double aim_tol = 1e-6;
  std::size_t max_iters = 200;
  std::size_t threads = 1;
};

struct ExperimentRow {
  std::size_t run = 0;
  double pct_missing = 0.0;
  double ce_final_em = 0.0;
  double ce_final_aim = 0.0;
  double ce_diff = 0.0;   // aim - em
  double mse_diff = 0.0;  // aim - em
  double score = 0.0;
  bool ok = true;
  std::string error;
};

struct ColumnSummary {
  double mean = 0.0;
  double sd = 0.0;
};

struct ExperimentSummary {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  ColumnSummary pct_missing, ce_final_em, ce_final_aim, ce_diff, mse_diff, score;
};

struct ExperimentResult {
  std::vector<ExperimentRow> rows;  // ordered by run index
  ExperimentSummary summary;
};

inline constexpr const char* kExperimentHeader = "run,pct_missing,ce_final_em,ce_final_aim,ce_diff,mse_diff,score";

inline ExperimentRow run_single(const ExperimentConfig& cfg, std::size_t run) {
  ExperimentRow row;
  row.run = run;
  try {
    const std::uint64_t seed = derive_seed(cfg.seed, run);
    Rng rng(seed);
    const Network augmented = cfg.mechanism ? attach_mechanism(cfg.truth, *cfg.mechanism)
                                            : build_coarsening_network(cfg.truth, cfg.coarsening, rng);
    const GeneratedData gen = generate_dataset(augmented, cfg.n, rng);
    row.pct_missing = 100.0 * gen.missing_fraction;

    EmOptions eo;
    eo.tol = cfg.em_tol;
    eo.max_iters = cfg.max_iters;
    const EmResult em = em_fit(cfg.truth, gen.data, eo);

    AimOptions ao;
    ao.z = cfg.z;
    ao.tol = cfg.aim_tol;
    ao.max_iters = cfg.max_iters;
    ao.seed = derive_seed(seed, 1);
    const AimResult aim = aim_fit(cfg.truth, em.raw, gen.data, ao);

    const EvalReport re = evaluate(cfg.truth, em.raw, em.row_counts, "em", row.pct_missing);
    const EvalReport ra = evaluate(cfg.truth, aim.raw, aim.row_counts, "aim", row.pct_missing);
    row.ce_final_em = re.ce;
    row.ce_final_aim = ra.ce;
    row.ce_diff = ra.ce - re.ce;
    row.mse_diff = ra.mse - re.mse;
    row.score = aim.score;
  } catch (const std::exception& e) {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    row.ok = false;
    row.error = e.what();
    row.ce_final_em = row.ce_final_aim = row.ce_diff = row.mse_diff = row.score = nan;
  }
  return row;
}

inline ColumnSummary summarize_column(const std::vector<double>& v) {
  ColumnSummary s;
  if (v.empty()) {
    s.mean = s.sd = std::numeric_limits<double>::quiet_NaN();
    return s;
  }
  for (double x : v) s.mean += x;
  s.mean /= static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - s.mean) * (x - s.mean);
    s.sd = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return s;
}

inline ExperimentSummary summarize(const std::vector<ExperimentRow>& rows) {
  ExperimentSummary s;
  std::vector<double> pm, em, aim, cd, md, sc;
  for (const auto& r : rows) {
    if (!r.ok) {
      ++s.failed;
      continue;
    }
    ++s.succeeded;
    pm.push_back(r.pct_missing);
    em.push_back(r.ce_final_em);
    aim.push_back(r.ce_final_aim);
    cd.push_back(r.ce_diff);
    md.push_back(r.mse_diff);
    sc.push_back(r.score);
  }
  s.pct_missing = summarize_column(pm);
  s.ce_final_em = summarize_column(em);
  s.ce_final_aim = summarize_column(aim);
  s.ce_diff = summarize_column(cd);
  s.mse_diff = summarize_column(md);
  s.score = summarize_column(sc);
  return s;
}

inline ExperimentResult run_experiment(const ExperimentConfig& cfg) {
  if (cfg.runs < 1) throw std::invalid_argument("runs must be at least 1");
  if (cfg.n < 1) throw std::invalid_argument("n must be at least 1");
  if (cfg.z < 1) throw std::invalid_argument("z must be at least 1");
  if (!cfg.mechanism) cfg.coarsening.check();
  ExperimentResult out;
  out.rows.resize(cfg.runs);
  const std::size_t workers = std::max<std::size_t>(1, std::min(cfg.threads, cfg.runs));
  if (workers == 1) {
    for (std::size_t r = 0; r < cfg.runs; ++r) out.rows[r] = run_single(cfg, r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t r; (r = next.fetch_add(1)) < cfg.runs;) out.rows[r] = run_single(cfg, r);
      });
    }
    for (auto& t : pool) t.join();
  }
  out.summary = summarize(out.rows);
  return out;
}

inline void write_experiment_csv(std::ostream& os, const ExperimentResult& res) {
  using io_detail::format_double;
  os << kExperimentHeader << "\n";
  for (const auto& r : res.rows) {
    os << r.run << "," << format_double(r.pct_missing) << "," << format_double(r.ce_final_em) << ","
       << format_double(r.ce_final_aim) << "," << format_double(r.ce_diff) << "," << format_double(r.mse_diff)
       << "," << format_double(r.score) << "\n";
  }
  const auto& s = res.summary;
  auto line = [&](const char* tag, double ColumnSummary::*field) {
    os << tag << "," << format_double(s.pct_missing.*field) << "," << format_double(s.ce_final_em.*field) << ","
       << format_double(s.ce_final_aim.*field) << "," << format_double(s.ce_diff.*field) << ","
       << format_double(s.mse_diff.*field) << "," << format_double(s.score.*field) << "\n";
  };
  line("mean", &ColumnSummary::mean);
  line("sd", &ColumnSummary::sd);
}

}  // namespace aiml
