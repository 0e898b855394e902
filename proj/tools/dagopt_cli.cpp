// Command-line front end: gen, solve, oracle, eval, bench.
//
// Exit codes: 0 success, 1 usage error, 2 solver failure, 3 I/O error.

#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dagopt/bnb.hpp"
#include "dagopt/datagen.hpp"
#include "dagopt/evalbench.hpp"
#include "dagopt/formulation.hpp"
#include "dagopt/io.hpp"
#include "dagopt/oracle.hpp"

#ifndef DAGOPT_VERSION
#define DAGOPT_VERSION "0.1.0"
#endif

namespace fs = std::filesystem;
using namespace dagopt;

namespace {

enum Exit { kOk = 0, kUsage = 1, kSolver = 2, kIo = 3 };

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

const std::map<std::string, Mode> kModes{{"bigm", Mode::bigm}, {"persp", Mode::persp}, {"perspcut", Mode::perspcut}};
const std::map<std::string, Encoding> kEncodings{{"cp", Encoding::cp_lazy}, {"cp_lazy", Encoding::cp_lazy},
                                                 {"ln", Encoding::ln}};
const std::map<std::string, DeltaRule> kDeltas{{"eig", DeltaRule::eig}, {"greedy", DeltaRule::greedy},
                                               {"zero", DeltaRule::zero}};
const std::map<std::string, LambdaRule> kLambdaRules{{"bic", LambdaRule::bic}, {"logm", LambdaRule::logm}};
const std::map<std::string, BranchRule> kBranch{{"most_fractional", BranchRule::most_fractional},
                                                {"largest", BranchRule::largest}};
const std::map<std::string, InstanceClass> kClasses{{"moral", InstanceClass::moral},
                                                    {"complete", InstanceClass::complete}};

template <class T>
T lookup(const std::map<std::string, T>& table, const std::string& key, const std::string& flag) {
  const auto it = table.find(key);
  if (it == table.end()) throw UsageError(flag + ": unknown value '" + key + "'");
  return it->second;
}

/// Options shared by solve and oracle.
struct ProblemFlags {
  std::string data;
  std::string super = "complete";
  std::optional<double> lambda;
  std::string lambda_rule = "bic";
  double mu = 0.0;
  double gamma = 2.0;
  std::optional<double> big_m;
  std::string delta = "greedy";
  std::string mode = "persp";
  std::string encoding = "cp";

  void attach(CLI::App* app) {
    app->add_option("--data", data, "n x m CSV data matrix, no header")->required();
    app->add_option("--super", super, "super-structure graph file, or 'complete'");
    app->add_option("--lambda", lambda, "l0 penalty; overrides --lambda-rule");
    app->add_option("--lambda-rule", lambda_rule, "bic (ln n) or logm (ln m)");
    app->add_option("--mu", mu, "Tikhonov weight");
    app->add_option("--gamma", gamma, "big-M multiplier on the acyclicity-free fit");
    app->add_option("--big-m", big_m, "explicit big-M");
    app->add_option("--delta", delta, "delta rule: eig, greedy or zero");
    app->add_option("--mode", mode, "bigm, persp or perspcut");
    app->add_option("--encoding", encoding, "cp or ln");
  }

  struct Built {
    ProblemSpec spec;
    UndirectedGraph super_structure;
  };

  Built build() const {
    const Eigen::MatrixXd x = read_csv_matrix(data);
    const int m = static_cast<int>(x.cols());
    UndirectedGraph sup = super == "complete" ? complete_graph(m) : read_undirected_graph(super);
    if (sup.num_nodes() != m)
      throw UsageError("--super: " + super + " has " + std::to_string(sup.num_nodes()) + " nodes but --data " +
                       data + " has " + std::to_string(m) + " columns");
    BuildOptions bo;
    bo.lambda_n = lambda ? *lambda
                         : lambda_for(lookup(kLambdaRules, lambda_rule, "--lambda-rule"), 1.0, m,
                                      std::max<int>(2, static_cast<int>(x.rows())));
    bo.mu = mu;
    bo.gamma = gamma;
    bo.big_m = big_m;
    bo.delta_rule = lookup(kDeltas, delta, "--delta");
    bo.mode = lookup(kModes, mode, "--mode");
    bo.encoding = lookup(kEncodings, encoding, "--encoding");
    auto built = build_problem(x, sup, bo);
    return {std::move(built.first), std::move(sup)};
  }
};

std::vector<std::uint64_t> seed_list(const std::vector<std::uint64_t>& explicit_seeds, int count) {
  if (!explicit_seeds.empty()) return explicit_seeds;
  std::vector<std::uint64_t> s;
  for (int i = 0; i < count; ++i) s.push_back(static_cast<std::uint64_t>(i));
  return s;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path);
  if (!out) throw IoError(path + ": cannot open for writing");
  out << body;
  if (!out) throw IoError(path + ": write failed");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exact sparse DAG learning for linear SEMs by branch-and-bound"};
  app.set_version_flag("--version", std::string("dagopt ") + DAGOPT_VERSION);
  app.require_subcommand(1);

  // gen
  GenConfig gen_cfg;
  std::string gen_out = ".";
  auto* gen = app.add_subcommand("gen", "generate a random DAG, SEM data and super-structures");
  gen->add_option("--nodes", gen_cfg.m, "number of variables m")->required();
  gen->add_option("--samples", gen_cfg.n, "number of samples n")->required();
  gen->add_option("--degree", gen_cfg.d, "expected out-degree d");
  gen->add_option("--seed", gen_cfg.seed, "RNG seed");
  gen->add_option("--weight-low", gen_cfg.weight_low, "smallest |weight|");
  gen->add_option("--weight-high", gen_cfg.weight_high, "largest |weight|");
  gen->add_option("--noise-sd", gen_cfg.noise_sd, "noise standard deviation");
  gen->add_flag("--sign-flip", gen_cfg.sign_flip, "negate each weight with probability 1/2");
  gen->add_option("--out", gen_out, "output directory");

  // solve
  ProblemFlags solve_flags;
  std::string solve_out;
  std::string solve_dag_out;
  std::optional<double> early_tau;
  double abs_gap = 0.0;
  std::optional<double> rel_gap;
  std::optional<double> time_limit;
  std::optional<long> node_limit;
  int threads = 1;
  bool deterministic = false;
  std::string branch = "most_fractional";
  double log_interval = 0.0;
  auto* solve_cmd = app.add_subcommand("solve", "branch-and-bound solve");
  solve_flags.attach(solve_cmd);
  solve_cmd->add_option("--out", solve_out, "SolveReport JSON path");
  solve_cmd->add_option("--dag-out", solve_dag_out, "estimated DAG graph file");
  auto* es = solve_cmd->add_option("--early-stop", early_tau, "absolute gap tau; default s_m ln(m)/n")
                 ->expected(0, 1);
  solve_cmd->add_option("--abs-gap", abs_gap, "absolute gap stop")->excludes(es);
  solve_cmd->add_option("--rel-gap", rel_gap, "relative gap stop (default 0.01)");
  solve_cmd->add_option("--time-limit", time_limit, "seconds (default 50 m)");
  solve_cmd->add_option("--node-limit", node_limit, "maximum nodes explored");
  solve_cmd->add_option("--threads", threads, "nodes per synchronous batch");
  solve_cmd->add_flag("--deterministic", deterministic, "force one thread");
  solve_cmd->add_option("--branch", branch, "most_fractional or largest");
  solve_cmd->add_option("--log-interval", log_interval, "seconds between progress lines on stderr; 0 disables");

  // oracle
  ProblemFlags oracle_flags;
  std::string oracle_out;
  bool oracle_enumerate = false;
  auto* oracle_cmd = app.add_subcommand("oracle", "exact dynamic-programming solve (m <= 16)");
  oracle_flags.attach(oracle_cmd);
  oracle_cmd->add_option("--out", oracle_out, "result JSON path");
  oracle_cmd->add_flag("--enumerate", oracle_enumerate, "brute-force DAG enumeration instead (m <= 5)");

  // eval
  std::string eval_true, eval_est;
  auto* eval_cmd = app.add_subcommand("eval", "structural Hamming distance between two DAG files");
  eval_cmd->add_option("--true", eval_true, "reference DAG graph file")->required();
  eval_cmd->add_option("--est", eval_est, "estimated DAG graph file")->required();

  // bench
  BenchSpec bench;
  std::vector<std::uint64_t> bench_seeds;
  int bench_seed_count = 10;
  std::vector<std::string> bench_classes{"moral"}, bench_modes{"persp"}, bench_encodings{"cp"};
  std::string bench_lambda_rule = "bic", bench_branch = "most_fractional", bench_out = ".";
  std::optional<double> bench_rel_gap;
  double bench_time_limit = 0.0;
  bool bench_study = false;
  auto* bench_cmd = app.add_subcommand("bench", "experiment grid, CSV output");
  bench_cmd->add_option("--nodes", bench.m_list, "m values");
  bench_cmd->add_option("--samples", bench.n, "samples per instance");
  bench_cmd->add_option("--degree", bench.d, "expected out-degree");
  bench_cmd->add_option("--seeds", bench_seeds, "explicit seed list");
  bench_cmd->add_option("--seed-count", bench_seed_count, "seeds 0..k-1 when --seeds is absent");
  bench_cmd->add_option("--class", bench_classes, "moral and/or complete");
  bench_cmd->add_option("--modes", bench_modes, "bigm, persp, perspcut");
  bench_cmd->add_option("--encodings", bench_encodings, "cp and/or ln");
  bench_cmd->add_option("--lambda-t", bench.lambda_t, "penalty multipliers t");
  bench_cmd->add_option("--lambda-rule", bench_lambda_rule, "bic or logm");
  bench_cmd->add_option("--gamma", bench.gammas, "big-M multipliers");
  bench_cmd->add_option("--mu", bench.mus, "Tikhonov weights");
  bench_cmd->add_flag("--early-stop", bench.early_stop, "abs gap s_m ln(m)/n per cell");
  bench_cmd->add_option("--rel-gap", bench_rel_gap, "relative gap stop");
  bench_cmd->add_option("--time-limit", bench_time_limit, "seconds per cell (default 50 m)");
  bench_cmd->add_option("--workers", bench.workers, "cells solved concurrently");
  bench_cmd->add_option("--branch", bench_branch, "most_fractional or largest");
  bench_cmd->add_flag("--early-stop-study", bench_study, "tau = 0 versus early-stop arms at lambda = ln m");
  bench_cmd->add_option("--out", bench_out, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }

  try {
    if (*gen) {
      gen_cfg.validate();
      const GeneratedInstance inst = make_instance(gen_cfg);
      fs::create_directories(gen_out);
      const fs::path dir(gen_out);
      write_csv_matrix((dir / "data.csv").string(), inst.data);
      write_graph((dir / "true_dag.txt").string(), inst.true_dag);
      write_graph((dir / "moral.txt").string(), inst.moral);
      nlohmann::json meta;
      meta["m"] = gen_cfg.m;
      meta["n"] = gen_cfg.n;
      meta["d"] = gen_cfg.d;
      meta["seed"] = gen_cfg.seed;
      meta["weight_low"] = gen_cfg.weight_low;
      meta["weight_high"] = gen_cfg.weight_high;
      meta["noise_sd"] = gen_cfg.noise_sd;
      meta["sign_flip"] = gen_cfg.sign_flip;
      meta["s0"] = inst.true_dag.num_arcs();
      meta["moral_edges"] = inst.moral.num_edges();
      nlohmann::json arcs = nlohmann::json::array();
      for (const auto& [a, w] : inst.true_beta) arcs.push_back({a.from, a.to, w});
      meta["true_arcs"] = arcs;
      write_json((dir / "meta.json").string(), meta);
      std::cout << "wrote " << (dir / "data.csv").string() << ", true_dag.txt, moral.txt, meta.json (m=" << gen_cfg.m
                << ", n=" << gen_cfg.n << ", s0=" << inst.true_dag.num_arcs() << ")\n";
      return kOk;
    }

    if (*solve_cmd) {
      const auto built = solve_flags.build();
      const ProblemSpec& spec = built.spec;
      StopRule stop = default_stop_rule(spec.m());
      if (rel_gap) stop.rel_gap = *rel_gap;
      stop.abs_gap = abs_gap;
      // The early-stopping rule replaces the default relative gap unless one is given.
      if (es->count() > 0 && !rel_gap) stop.rel_gap = 0.0;
      if (es->count() > 0)
        stop.abs_gap = early_tau ? *early_tau
                                 : early_stop_threshold(spec.m(), spec.gram_data.n,
                                                        built.super_structure.num_edges());
      if (time_limit) stop.time_limit = *time_limit;
      if (node_limit) stop.node_limit = *node_limit;
      if (stop.abs_gap < 0.0 || stop.rel_gap < 0.0) throw UsageError("--abs-gap/--rel-gap: must be >= 0");
      BnbOptions opt;
      opt.threads = deterministic ? 1 : std::max(1, threads);
      opt.branch = lookup(kBranch, branch, "--branch");
      if (log_interval > 0.0) {
        opt.log = &std::cerr;
        opt.log_interval = log_interval;
      }
      const SolveReport rep = solve(spec, stop, opt);
      if (!solve_out.empty()) write_json(solve_out, report_to_json(rep));
      if (!solve_dag_out.empty()) write_graph(solve_dag_out, rep.dag);
      std::cout << "status " << to_string(rep.status) << "\nub " << rep.ub << "\nlb " << rep.lb << "\ngap " << rep.gap
                << "\nrgap " << rep.rgap << "\nnodes " << rep.nodes_explored << "\narcs " << rep.dag.num_arcs()
                << "\nseconds " << rep.wall_seconds << '\n';
      for (const auto& w : rep.warnings) std::cerr << "warning: " << w << '\n';
      return rep.status == SolveStatus::solver_failure ? kSolver : kOk;
    }

    if (*oracle_cmd) {
      const auto built = oracle_flags.build();
      const OracleResult r = oracle_enumerate ? enumerate_dags(built.spec) : exact_solve(built.spec);
      if (!oracle_out.empty()) {
        nlohmann::json j;
        j["score"] = r.score;
        j["subsets_evaluated"] = r.subsets_evaluated;
        j["big_m_exceeded"] = r.big_m_exceeded;
        nlohmann::json arcs = nlohmann::json::array();
        for (const auto& [a, w] : r.beta) arcs.push_back({a.from, a.to, w});
        j["arcs"] = arcs;
        write_json(oracle_out, j);
      }
      std::cout << "score " << r.score << "\narcs " << r.dag.num_arcs() << '\n';
      return kOk;
    }

    if (*eval_cmd) {
      const DirectedGraph t = read_directed_graph(eval_true);
      const DirectedGraph e = read_directed_graph(eval_est);
      if (t.num_nodes() != e.num_nodes())
        throw UsageError("--est: " + eval_est + " has " + std::to_string(e.num_nodes()) + " nodes, --true has " +
                         std::to_string(t.num_nodes()));
      std::cout << "SHD " << shd(t, e) << '\n';
      return kOk;
    }

    if (*bench_cmd) {
      bench.seeds = seed_list(bench_seeds, bench_seed_count);
      bench.lambda_rule = lookup(kLambdaRules, bench_lambda_rule, "--lambda-rule");
      bench.solver.branch = lookup(kBranch, bench_branch, "--branch");
      fs::create_directories(bench_out);
      const fs::path dir(bench_out);
      if (bench_study) {
        EarlyStopOptions eo;
        eo.solver = bench.solver;
        eo.mode = lookup(kModes, bench_modes.front(), "--modes");
        eo.encoding = lookup(kEncodings, bench_encodings.front(), "--encodings");
        eo.d = bench.d;
        eo.time_limit = bench_time_limit;
        std::ostringstream csv;
        csv << "m,arm,mean_shd,sd_shd,mean_gap,total_wall,mean_time,timeouts,errors\n";
        std::vector<BenchRow> all;
        for (int m : bench.m_list) {
          const EarlyStopSummary s = compare_early_stop(m, bench.n, bench.seeds, eo);
          for (const auto* arm : {&s.exact, &s.early}) {
            csv << m << ',' << (arm == &s.exact ? "tau0" : "tau") << ',' << arm->mean_shd << ',' << arm->sd_shd << ','
                << arm->mean_gap << ',' << arm->total_wall << ',' << arm->mean_time << ',' << arm->timeouts << ','
                << arm->errors << '\n';
            all.insert(all.end(), arm->rows.begin(), arm->rows.end());
          }
          std::cout << "m=" << m << " tau0: SHD " << s.exact.mean_shd << " (" << s.exact.sd_shd << ") "
                    << s.exact.total_wall << "s | tau: SHD " << s.early.mean_shd << " (" << s.early.sd_shd << ") "
                    << s.early.total_wall << "s\n";
        }
        write_text((dir / "early_stop.csv").string(), csv.str());
        std::ostringstream rows;
        write_rows_csv(rows, all);
        write_text((dir / "bench_rows.csv").string(), rows.str());
        return kOk;
      }
      bench.classes.clear();
      for (const auto& c : bench_classes) bench.classes.push_back(lookup(kClasses, c, "--class"));
      bench.modes.clear();
      for (const auto& m : bench_modes) bench.modes.push_back(lookup(kModes, m, "--modes"));
      bench.encodings.clear();
      for (const auto& e : bench_encodings) bench.encodings.push_back(lookup(kEncodings, e, "--encodings"));
      if (bench_rel_gap) bench.stop.rel_gap = *bench_rel_gap;
      bench.stop.time_limit = bench_time_limit;
      const auto rows = run_bench(bench);
      std::ostringstream r, s;
      write_rows_csv(r, rows);
      const auto summary = summarize(rows);
      write_summary_csv(s, summary);
      write_text((dir / "bench_rows.csv").string(), r.str());
      write_text((dir / "bench_summary.csv").string(), s.str());
      std::cout << s.str();
      int errors = 0;
      for (const auto& row : rows) errors += row.ok() ? 0 : 1;
      return errors ? kSolver : kOk;
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kIo;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kSolver;
  }
  return kUsage;
}
