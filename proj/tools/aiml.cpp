// Command-line harness: data generation, learning, evaluation, likelihood
// reports and batch experiments.
//
// Exit codes: 0 success, 1 usage, 2 data or format error, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "aiml/aiml.hpp"

namespace {

using namespace aiml;

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitNumerical = 3;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::string fmt6(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path);
  if (!out) throw FormatError("cannot write '" + path + "'");
  return out;
}

std::string case_text(const Network& net, const CoarseCase& c) {
  std::string s = "(";
  for (std::size_t i = 0; i < c.values.size(); ++i) {
    if (i) s += ",";
    s += c.values[i] == kMissing ? "?" : net.node(i).states[static_cast<std::size_t>(c.values[i])];
  }
  return s + ")";
}

std::string assignment_text(const Network& net, const Assignment& x) { return case_text(net, complete_case(x)); }

// ---- counts files: node,config,count

void write_counts(const std::string& path, const Network& net, const RowCounts& counts) {
  auto out = open_out(path);
  out << "node,config,count\n";
  for (std::size_t i = 0; i < counts.size(); ++i)
    for (std::size_t r = 0; r < counts[i].size(); ++r)
      out << net.node(i).name << "," << r << "," << io_detail::format_double(counts[i][r]) << "\n";
}

RowCounts read_counts(const std::string& path, const Network& net) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open counts file '" + path + "'");
  RowCounts counts;
  for (std::size_t i = 0; i < net.size(); ++i) counts.emplace_back(net.num_configs(i), 0.0);
  std::string line;
  std::getline(in, line);
  if (io_detail::trim(line) != "node,config,count") throw FormatError(path + ": expected header node,config,count");
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (io_detail::trim(line).empty()) continue;
    const auto cells = io_detail::split(io_detail::trim(line), ',');
    const std::string where = path + ":" + std::to_string(lineno);
    if (cells.size() != 3) throw FormatError(where + ": expected 3 fields");
    const auto node = net.find(cells[0]);
    if (!node) throw FormatError(where + ": unknown node '" + cells[0] + "'");
    const double config = io_detail::parse_double(cells[1], where);
    if (config < 0 || config != std::floor(config) || config >= static_cast<double>(net.num_configs(*node))) {
      throw FormatError(where + ": bad parent configuration index");
    }
    const double k = io_detail::parse_double(cells[2], where);
    if (!(k >= 0.0)) throw FormatError(where + ": negative count");
    counts[*node][static_cast<std::size_t>(config)] = k;
  }
  return counts;
}

// ---- subcommands

struct GenData {
  std::string net, coarsening, out, emit_mechanism, mechanism;
  std::size_t n = 0;
  std::uint64_t seed = 0;
};

int run_gen_data(const GenData& o) {
  const Network truth = read_network(o.net);
  Rng rng(o.seed);
  Network augmented = truth;
  if (!o.mechanism.empty()) {
    augmented = attach_mechanism(truth, read_network(o.mechanism));
  } else {
    CoarseningSpec spec;
    try {
      spec = CoarseningSpec::parse(o.coarsening);
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    augmented = build_coarsening_network(truth, spec, rng);
  }
  const GeneratedData gen = generate_dataset(augmented, o.n, rng);
  write_dataset_csv(o.out, gen.data);
  if (!o.emit_mechanism.empty()) write_network(o.emit_mechanism, augmented);
  std::cout << "wrote " << o.n << " cases to " << o.out << " (" << fmt6(100.0 * gen.missing_fraction)
            << "% missing)\n";
  return 0;
}

struct Learn {
  std::string structure, data, method, init, out, trace, raw_out, counts_out;
  std::size_t z = 5, max_iters = 200, restarts = 10;
  double tol = 1e-6;
  std::uint64_t seed = 0;
};

int run_learn(const Learn& o) {
  const Network structure = read_network(o.structure);
  const Dataset data = read_dataset_csv(o.data, structure);
  std::optional<Network> given;
  std::string init = o.init;
  if (init.rfind("net:", 0) == 0) {
    given = read_network(init.substr(4));
    if (!given->same_structure(structure)) throw FormatError("initial network does not match the structure");
    init = "net";
  } else if (!init.empty() && init != "em" && init != "uniform") {
    throw UsageError("--init must be em, uniform or net:FILE");
  }

  Network raw = structure, smoothed = structure;
  RowCounts counts;
  if (o.method == "em") {
    if (init == "em") throw UsageError("--init em is not meaningful for --method em");
    EmOptions eo;
    eo.tol = o.tol;
    eo.max_iters = o.max_iters;
    if (given) {
      eo.init = EmInit::given;
      eo.theta0 = given;
    }
    const EmResult r = em_fit(structure, data, eo);
    raw = r.raw;
    smoothed = r.smoothed;
    counts = r.row_counts;
    if (!o.trace.empty()) {
      auto out = open_out(o.trace);
      out << "iteration,loglik\n";
      for (std::size_t t = 0; t < r.trace.size(); ++t) out << t << "," << io_detail::format_double(r.trace[t]) << "\n";
    }
    std::cout << "em: " << r.iterations << " iterations, face-value loglik " << fmt6(r.trace.back())
              << " per case" << (r.converged ? "" : " (not converged)") << "\n";
  } else if (o.method == "aim") {
    Network theta0 = Network::uniform(structure.name(), structure.nodes());
    if (given) {
      theta0 = *given;
    } else if (init.empty() || init == "em") {
      EmOptions eo;
      eo.max_iters = o.max_iters;
      theta0 = em_fit(structure, data, eo).raw;
    }
    AimOptions ao;
    ao.z = o.z;
    ao.tol = o.tol;
    ao.max_iters = o.max_iters;
    ao.seed = o.seed;
    const AimResult r = aim_fit(structure, theta0, data, ao);
    raw = r.raw;
    smoothed = r.smoothed;
    counts = r.row_counts;
    if (!o.trace.empty()) {
      auto out = open_out(o.trace);
      out << "iteration,score,sat_lower_bound\n";
      out << 0 << "," << io_detail::format_double(r.initial_score) << ","
          << io_detail::format_double(-r.entropy - r.initial_score) << "\n";
      for (const auto& it : r.trace) {
        out << it.iteration << "," << io_detail::format_double(it.score) << ","
            << io_detail::format_double(it.sat_lower_bound) << "\n";
      }
    }
    std::cout << "aim: " << r.iterations << " iterations, score " << fmt6(r.score)
              << (r.converged ? "" : " (not converged)") << "\n";
    if (r.init_fallbacks > 0) {
      std::cerr << "aim: " << r.init_fallbacks << " replicas started from a uniform draw (zero evidence)\n";
    }
  } else if (o.method == "conservative") {
    const ConservativeResult r = conservative_ensemble(structure, data, o.restarts, o.seed);
    raw = r.midpoint_network;
    smoothed = r.midpoint_network;
    if (!o.trace.empty()) {
      auto out = open_out(o.trace);
      out << "node,config,state,low,high,midpoint\n";
      for (std::size_t i = 0; i < structure.size(); ++i) {
        const std::size_t m = structure.cardinality(i);
        for (std::size_t k = 0; k < r.low[i].size(); ++k) {
          out << structure.node(i).name << "," << k / m << "," << structure.node(i).states[k % m] << ","
              << io_detail::format_double(r.low[i][k]) << "," << io_detail::format_double(r.high[i][k]) << ","
              << io_detail::format_double(r.midpoint[i][k]) << "\n";
        }
      }
    }
    std::cout << "conservative: " << o.restarts << " completions\n";
  } else {
    throw UsageError("--method must be aim, em or conservative");
  }
  write_network(o.out, smoothed);
  if (!o.raw_out.empty()) write_network(o.raw_out, raw);
  if (!o.counts_out.empty() && o.method != "conservative") write_counts(o.counts_out, structure, counts);
  return 0;
}

struct Eval {
  std::string truth, estimate, counts, mode = "auto";
};

int run_eval(const Eval& o) {
  const Network truth = read_network(o.truth);
  const Network estimate = read_network(o.estimate);
  KlMode mode = KlMode::automatic;
  if (o.mode == "enumerate") {
    mode = KlMode::enumerate;
  } else if (o.mode == "decomposed") {
    mode = KlMode::decomposed;
  } else if (o.mode != "auto") {
    throw UsageError("--mode must be enumerate or decomposed");
  }
  EvalReport r;
  if (!o.counts.empty()) {
    r = evaluate(truth, estimate, read_counts(o.counts, estimate), estimate.name(), 0.0, mode);
  } else {
    r.method = estimate.name();
    r.ce = kl_divergence(truth, estimate, mode);
    r.mse = mse(truth, estimate);
  }
  std::cout << "method,ce,mse,pct_missing\n"
            << r.method << "," << io_detail::format_double(r.ce) << "," << io_detail::format_double(r.mse) << ",\n";
  return 0;
}

struct Lik {
  std::string net, data, which, net_car, csv;
};

int run_lik(const Lik& o) {
  const Network net = read_network(o.net);
  const Dataset data = read_dataset_csv(o.data, net);
  LikelihoodReport r;
  if (o.which == "fv") {
    r = face_value_loglik(net, data);
  } else if (o.which == "sat") {
    r = exact_sat_profile_loglik(net, data);
  } else if (o.which == "car") {
    r = car_profile_loglik(net, data);
  } else if (o.which == "lr") {
    if (o.net_car.empty()) throw UsageError("--which lr needs --net-car");
    const Network car_net = read_network(o.net_car);
    const double lr = lr_statistic(net, car_net, data);
    std::cout << "lr " << fmt6(lr) << " per case\n";
    if (!o.csv.empty()) {
      auto out = open_out(o.csv);
      out << "which,per_case,total,total_weight\n"
          << "lr," << io_detail::format_double(lr) << "," << io_detail::format_double(lr * data.total_weight())
          << "," << io_detail::format_double(data.total_weight()) << "\n";
    }
    return 0;
  } else {
    throw UsageError("--which must be fv, sat, car or lr");
  }
  std::cout << o.which << " " << fmt6(r.per_case_average) << " per case (total " << fmt6(r.total) << ", weight "
            << fmt6(r.total_weight) << ")" << (r.converged ? "" : " not converged") << "\n";
  if (o.which == "sat") {
    for (std::size_t u = 0; u < r.patterns.size(); ++u) {
      if (r.patterns[u].complete()) continue;
      std::cout << "  completion " << case_text(net, r.patterns[u]) << ":";
      for (const auto& [x, p] : r.completion[u]) std::cout << " " << assignment_text(net, x) << "=" << fmt6(p);
      std::cout << "\n";
    }
  } else if (o.which == "car") {
    for (std::size_t u = 0; u < r.patterns.size(); ++u)
      std::cout << "  lambda " << case_text(net, r.patterns[u]) << " = " << fmt6(r.pattern_lambda[u]) << "\n";
  }
  if (!o.csv.empty()) {
    auto out = open_out(o.csv);
    out << "which,per_case,total,total_weight\n"
        << o.which << "," << io_detail::format_double(r.per_case_average) << ","
        << io_detail::format_double(r.total) << "," << io_detail::format_double(r.total_weight) << "\n";
  }
  return 0;
}

struct Experiment {
  std::string net, coarsening, out, mechanism;
  std::size_t n = 0, z = 5, runs = 20, threads = 1;
  std::uint64_t seed = 0;
};

int run_experiment_cmd(const Experiment& o) {
  ExperimentConfig cfg;
  cfg.truth = read_network(o.net);
  if (!o.mechanism.empty()) {
    cfg.mechanism = read_network(o.mechanism);
    attach_mechanism(cfg.truth, *cfg.mechanism);
  }
  try {
    cfg.coarsening = CoarseningSpec::parse(o.coarsening);
  } catch (const std::invalid_argument& e) {
    if (!cfg.mechanism) throw UsageError(e.what());
  }
  cfg.n = o.n;
  cfg.z = o.z;
  cfg.runs = o.runs;
  cfg.seed = o.seed;
  cfg.threads = o.threads == 0 ? std::max(1u, std::thread::hardware_concurrency()) : o.threads;
  const ExperimentResult res = run_experiment(cfg);
  auto out = open_out(o.out);
  write_experiment_csv(out, res);
  for (const auto& r : res.rows)
    if (!r.ok) std::cerr << "run " << r.run << " failed: " << r.error << "\n";
  const auto& s = res.summary;
  auto cell = [](const ColumnSummary& c) { return fmt6(c.mean) + "±" + fmt6(c.sd); };
  std::cout << "runs " << s.succeeded << " ok, " << s.failed << " failed\n"
            << "pct_missing   " << cell(s.pct_missing) << "\n"
            << "ce_final_em   " << cell(s.ce_final_em) << "\n"
            << "ce_final_aim  " << cell(s.ce_final_aim) << "\n"
            << "ce_diff       " << cell(s.ce_diff) << "\n"
            << "mse_diff      " << cell(s.mse_diff) << "\n"
            << "score         " << cell(s.score) << "\n";
  return s.succeeded == 0 ? kExitNumerical : 0;
}

struct Randomize {
  std::string net, out;
  std::uint64_t seed = 0;
};

int run_randomize(const Randomize& o) {
  const Network net = read_network(o.net);
  Rng rng(o.seed);
  write_network(o.out, randomize_parameters(net, rng).renamed(net.name() + "_R"));
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Parameter learning from coarse data with AI&M, EM and conservative inference"};
  app.require_subcommand(1);

  GenData gen;
  auto* g = app.add_subcommand("gen-data", "Generate incomplete data through a random coarsening mechanism");
  g->add_option("--net", gen.net, "Network file")->required();
  g->add_option("--coarsening", gen.coarsening, "mp:mu:sigma");
  g->add_option("--mechanism", gen.mechanism, "Fixed augmented network instead of a random mechanism");
  g->add_option("--n", gen.n, "Number of cases")->required();
  g->add_option("--seed", gen.seed, "Random seed")->required();
  g->add_option("--out", gen.out, "Output CSV")->required();
  g->add_option("--emit-mechanism", gen.emit_mechanism, "Write the augmented network");

  Learn learn;
  auto* l = app.add_subcommand("learn", "Estimate parameters from incomplete data");
  l->add_option("--net-structure", learn.structure, "Network file (structure)")->required();
  l->add_option("--data", learn.data, "Dataset CSV")->required();
  l->add_option("--method", learn.method, "aim, em or conservative")
      ->required()
      ->check(CLI::IsMember({"aim", "em", "conservative"}));
  l->add_option("--init", learn.init, "em, uniform or net:FILE");
  l->add_option("--z", learn.z, "Replication factor")->check(CLI::PositiveNumber);
  l->add_option("--tol", learn.tol, "Termination threshold")->check(CLI::PositiveNumber);
  l->add_option("--max-iters", learn.max_iters, "Iteration cap")->check(CLI::PositiveNumber);
  l->add_option("--restarts", learn.restarts, "Random completions (conservative)")->check(CLI::PositiveNumber);
  l->add_option("--seed", learn.seed, "Random seed")->required();
  l->add_option("--out", learn.out, "Smoothed estimate")->required();
  l->add_option("--trace", learn.trace, "Trace CSV");
  l->add_option("--raw-out", learn.raw_out, "Unsmoothed estimate");
  l->add_option("--counts-out", learn.counts_out, "Row counts CSV for eval --counts");

  Eval ev;
  auto* e = app.add_subcommand("eval", "Score an estimate against the true network");
  e->add_option("--truth", ev.truth, "True network")->required();
  e->add_option("--estimate", ev.estimate, "Estimated network")->required();
  e->add_option("--counts", ev.counts, "Row counts; the estimate is smoothed with them first");
  e->add_option("--mode", ev.mode, "enumerate or decomposed");

  Lik lik;
  auto* k = app.add_subcommand("lik", "Face-value, profile and likelihood-ratio reports");
  k->add_option("--net", lik.net, "Network file")->required();
  k->add_option("--data", lik.data, "Dataset CSV")->required();
  k->add_option("--which", lik.which, "fv, sat, car or lr")->required()->check(CLI::IsMember({"fv", "sat", "car", "lr"}));
  k->add_option("--net-car", lik.net_car, "Car-side network for --which lr");
  k->add_option("--csv", lik.csv, "Machine-readable output");

  Experiment ex;
  auto* x = app.add_subcommand("experiment", "Batch EM vs AI&M comparison");
  x->add_option("--net", ex.net, "True network")->required();
  x->add_option("--coarsening", ex.coarsening, "mp:mu:sigma")->required();
  x->add_option("--mechanism", ex.mechanism, "Fixed augmented network instead of random mechanisms");
  x->add_option("--n", ex.n, "Cases per run")->required()->check(CLI::PositiveNumber);
  x->add_option("--z", ex.z, "Replication factor")->required()->check(CLI::PositiveNumber);
  x->add_option("--runs", ex.runs, "Number of runs")->required()->check(CLI::PositiveNumber);
  x->add_option("--seed", ex.seed, "Master seed")->required();
  x->add_option("--out", ex.out, "Results CSV")->required();
  x->add_option("--threads", ex.threads, "Worker threads (0 = all cores)");

  Randomize rz;
  auto* r = app.add_subcommand("randomize", "Replace every CPT entry by a uniformly sampled one");
  r->add_option("--net", rz.net, "Network file")->required();
  r->add_option("--seed", rz.seed, "Random seed")->required();
  r->add_option("--out", rz.out, "Output network")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& err) {
    return app.exit(err);
  } catch (const CLI::CallForAllHelp& err) {
    return app.exit(err);
  } catch (const CLI::ParseError& err) {
    app.exit(err);
    std::cerr << app.help();
    return kExitUsage;
  }

  try {
    if (*g) {
      if (gen.coarsening.empty() == gen.mechanism.empty()) {
        throw UsageError("gen-data needs exactly one of --coarsening and --mechanism");
      }
      return run_gen_data(gen);
    }
    if (*l) return run_learn(learn);
    if (*e) return run_eval(ev);
    if (*k) return run_lik(lik);
    if (*x) return run_experiment_cmd(ex);
    if (*r) return run_randomize(rz);
  } catch (const UsageError& err) {
    std::cerr << "error: " << err.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const NumericalError& err) {
    std::cerr << "numerical error: " << err.what() << "\n";
    return kExitNumerical;
  } catch (const FormatError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const NetworkError& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::invalid_argument& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::out_of_range& err) {
    std::cerr << "error: " << err.what() << "\n";
    return kExitData;
  } catch (const std::exception& err) {
    std::cerr << "numerical error: " << err.what() << "\n";
    return kExitNumerical;
  }
  return kExitUsage;
}
