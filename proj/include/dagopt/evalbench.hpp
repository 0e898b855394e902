#pragma once

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <iomanip>
#include <map>
#include <mutex>
#include <ostream>
#include <set>
#include <stdexcept>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include "dagopt/bnb.hpp"
#include "dagopt/datagen.hpp"
#include "dagopt/formulation.hpp"
#include "dagopt/graphs.hpp"

namespace dagopt {

enum class InstanceClass { moral, complete };
enum class LambdaRule { bic, logm };  ///< base penalty ln(n) or ln(m)

inline const char* to_string(InstanceClass c) { return c == InstanceClass::moral ? "moral" : "complete"; }
inline const char* to_string(LambdaRule r) { return r == LambdaRule::bic ? "bic" : "logm"; }

inline double lambda_for(LambdaRule rule, double t, int m, int n) {
  return t * std::log(static_cast<double>(rule == LambdaRule::bic ? n : m));
}

struct BenchSpec {
  std::vector<int> m_list{10};
  int n = 100;
  double d = 2.0;
  std::vector<std::uint64_t> seeds{0};
  std::vector<InstanceClass> classes{InstanceClass::moral};
  std::vector<Mode> modes{Mode::persp};
  std::vector<Encoding> encodings{Encoding::cp_lazy};
  LambdaRule lambda_rule = LambdaRule::bic;
  std::vector<double> lambda_t{1.0};
  std::vector<double> gammas{2.0};
  std::vector<double> mus{0.0};
  StopRule stop;                 ///< template; time_limit ≤ 0 means 50·m seconds
  bool early_stop = false;       ///< abs_gap = s_m ln(m)/n per cell
  BnbOptions solver;             ///< log and threads are per cell
  int workers = 1;               ///< cells solved concurrently

  void validate() const {
    auto nonempty = [](bool ok, const char* what) {
      if (!ok) throw std::invalid_argument(std::string("BenchSpec: ") + what + " must be nonempty");
    };
    nonempty(!m_list.empty(), "m-list");
    nonempty(!seeds.empty(), "seeds");
    nonempty(!classes.empty(), "instance classes");
    nonempty(!modes.empty(), "mode-list");
    nonempty(!encodings.empty(), "encoding-list");
    nonempty(!lambda_t.empty(), "lambda multipliers");
    nonempty(!gammas.empty(), "gamma-list");
    nonempty(!mus.empty(), "mu-list");
    if (std::set<std::uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size())
      throw std::invalid_argument("BenchSpec: seeds must be distinct");
    if (workers < 1) throw std::invalid_argument("BenchSpec: workers must be >= 1");
    for (int m : m_list) GenConfig{m, n, d}.validate();
  }
};

struct BenchRow {
  int m = 0;
  int n = 0;
  double d = 0.0;
  std::uint64_t seed = 0;
  InstanceClass cls = InstanceClass::moral;
  Mode mode = Mode::persp;
  Encoding encoding = Encoding::cp_lazy;
  double lambda_t = 1.0;
  double lambda_n = 0.0;
  double gamma = 2.0;
  double mu = 0.0;
  double tau = 0.0;  ///< abs_gap used
  std::size_t s_m = 0;
  std::string status;  ///< termination reason or "error: ..."
  double ub = 0.0;
  double lb = 0.0;
  double gap = 0.0;
  double rgap = 0.0;
  double wall_seconds = 0.0;
  long nodes_explored = 0;
  double root_relaxation_value = 0.0;
  long shd = -1;  ///< −1 on error rows
  bool bounds_monotone = true;  ///< logged lb never fell, ub never rose, lb ≤ ub

  bool ok() const { return status.rfind("error", 0) != 0; }
  bool timed_out() const { return status == "time_limit" || status == "node_limit"; }
};

namespace detail {

struct BenchCell {
  int m;
  std::uint64_t seed;
  InstanceClass cls;
  Mode mode;
  Encoding encoding;
  double lambda_t;
  double gamma;
  double mu;
};

inline BenchRow run_cell(const BenchSpec& spec, const BenchCell& c) {
  BenchRow row;
  row.m = c.m;
  row.n = spec.n;
  row.d = spec.d;
  row.seed = c.seed;
  row.cls = c.cls;
  row.mode = c.mode;
  row.encoding = c.encoding;
  row.lambda_t = c.lambda_t;
  row.lambda_n = lambda_for(spec.lambda_rule, c.lambda_t, c.m, spec.n);
  row.gamma = c.gamma;
  row.mu = c.mu;
  try {
    GenConfig cfg;
    cfg.m = c.m;
    cfg.n = spec.n;
    cfg.d = spec.d;
    cfg.seed = c.seed;
    const GeneratedInstance inst = make_instance(cfg);
    const UndirectedGraph& sup = c.cls == InstanceClass::moral ? inst.moral : inst.complete;
    row.s_m = sup.num_edges();
    BuildOptions bo;
    bo.lambda_n = row.lambda_n;
    bo.gamma = c.gamma;
    bo.mu = c.mu;
    bo.mode = c.mode;
    bo.encoding = c.encoding;
    const auto built = build_problem(inst.data, sup, bo);
    StopRule stop = spec.stop;
    if (!(stop.time_limit > 0.0)) stop.time_limit = 50.0 * c.m;
    if (spec.early_stop) stop.abs_gap = early_stop_threshold(c.m, spec.n, row.s_m);
    row.tau = stop.abs_gap;
    BnbOptions opt = spec.solver;
    opt.log = nullptr;
    const SolveReport rep = solve(built.first, stop, opt);
    row.status = to_string(rep.status);
    row.ub = rep.ub;
    row.lb = rep.lb;
    row.gap = rep.gap;
    row.rgap = rep.rgap;
    row.wall_seconds = rep.wall_seconds;
    row.nodes_explored = rep.nodes_explored;
    row.root_relaxation_value = rep.root_lb;
    row.shd = static_cast<long>(shd(inst.true_dag, rep.dag));
    for (std::size_t i = 0; i < rep.trajectory.size(); ++i) {
      const auto& p = rep.trajectory[i];
      bool ok = p.lb <= p.ub;
      if (i > 0) ok = ok && p.lb >= rep.trajectory[i - 1].lb && p.ub <= rep.trajectory[i - 1].ub;
      row.bounds_monotone = row.bounds_monotone && ok;
    }
  } catch (const std::exception& e) {
    row.status = std::string("error: ") + e.what();
  }
  return row;
}

}  // namespace detail

/// One row per (m, seed, class, mode, encoding, λ multiplier, γ, μ) cell, in
/// that nesting order regardless of the worker count.
inline std::vector<BenchRow> run_bench(const BenchSpec& spec) {
  spec.validate();
  std::vector<detail::BenchCell> cells;
  for (int m : spec.m_list)
    for (auto seed : spec.seeds)
      for (auto cls : spec.classes)
        for (auto mode : spec.modes)
          for (auto enc : spec.encodings)
            for (double t : spec.lambda_t)
              for (double g : spec.gammas)
                for (double mu : spec.mus) cells.push_back({m, seed, cls, mode, enc, t, g, mu});
  std::vector<BenchRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i; (i = next.fetch_add(1)) < cells.size();) rows[i] = detail::run_cell(spec, cells[i]);
  };
  const int w = std::min<int>(spec.workers, static_cast<int>(cells.size()));
  if (w <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int i = 0; i < w; ++i) pool.emplace_back(work);
    for (auto& t : pool) t.join();
  }
  return rows;
}

inline void write_rows_csv(std::ostream& out, const std::vector<BenchRow>& rows) {
  out << std::setprecision(12);
  out << "m,n,d,seed,class,mode,encoding,lambda_t,lambda_n,gamma,mu,tau,s_m,status,ub,lb,gap,rgap,"
         "wall_seconds,nodes_explored,root_relaxation_value,shd\n";
  for (const BenchRow& r : rows) {
    std::string status = r.status;
    std::replace(status.begin(), status.end(), ',', ';');
    std::replace(status.begin(), status.end(), '\n', ' ');
    out << r.m << ',' << r.n << ',' << r.d << ',' << r.seed << ',' << to_string(r.cls) << ','
        << to_string(r.mode) << ',' << to_string(r.encoding) << ',' << r.lambda_t << ',' << r.lambda_n << ','
        << r.gamma << ',' << r.mu << ',' << r.tau << ',' << r.s_m << ',' << status << ',' << r.ub << ','
        << r.lb << ',' << r.gap << ',' << r.rgap << ',' << r.wall_seconds << ',' << r.nodes_explored << ','
        << r.root_relaxation_value << ',' << r.shd << '\n';
  }
}

struct SummaryRow {
  int m = 0;
  InstanceClass cls = InstanceClass::moral;
  Mode mode = Mode::persp;
  Encoding encoding = Encoding::cp_lazy;
  double lambda_t = 1.0;
  double gamma = 2.0;
  double mu = 0.0;
  int runs = 0;
  int errors = 0;
  int timeouts = 0;
  double mean_time = 0.0;  ///< over runs that finished within their limits
  double mean_rgap = 0.0;
  double mean_gap = 0.0;
  double mean_nodes = 0.0;
  double mean_root = 0.0;
  double mean_shd = 0.0;
  double sd_shd = 0.0;
};

/// Per-cell means across seeds. Timed-out rows count toward everything except mean_time.
inline std::vector<SummaryRow> summarize(const std::vector<BenchRow>& rows) {
  using Key = std::tuple<int, int, int, int, double, double, double>;
  std::map<Key, std::vector<const BenchRow*>> groups;
  std::vector<Key> order;
  for (const BenchRow& r : rows) {
    Key k{r.m, static_cast<int>(r.cls), static_cast<int>(r.mode), static_cast<int>(r.encoding), r.lambda_t,
          r.gamma, r.mu};
    auto [it, fresh] = groups.try_emplace(k);
    if (fresh) order.push_back(k);
    it->second.push_back(&r);
  }
  std::vector<SummaryRow> out;
  for (const Key& k : order) {
    const auto& g = groups[k];
    SummaryRow s;
    s.m = g.front()->m;
    s.cls = g.front()->cls;
    s.mode = g.front()->mode;
    s.encoding = g.front()->encoding;
    s.lambda_t = g.front()->lambda_t;
    s.gamma = g.front()->gamma;
    s.mu = g.front()->mu;
    int finished = 0;
    std::vector<double> shds;
    for (const BenchRow* r : g) {
      ++s.runs;
      if (!r->ok()) {
        ++s.errors;
        continue;
      }
      if (r->timed_out()) {
        ++s.timeouts;
      } else {
        ++finished;
        s.mean_time += r->wall_seconds;
      }
      s.mean_rgap += r->rgap;
      s.mean_gap += r->gap;
      s.mean_nodes += static_cast<double>(r->nodes_explored);
      s.mean_root += r->root_relaxation_value;
      shds.push_back(static_cast<double>(r->shd));
    }
    const double ok = static_cast<double>(shds.size());
    if (finished) s.mean_time /= finished;
    if (ok > 0) {
      s.mean_rgap /= ok;
      s.mean_gap /= ok;
      s.mean_nodes /= ok;
      s.mean_root /= ok;
      for (double v : shds) s.mean_shd += v / ok;
      for (double v : shds) s.sd_shd += (v - s.mean_shd) * (v - s.mean_shd);
      s.sd_shd = shds.size() > 1 ? std::sqrt(s.sd_shd / (ok - 1.0)) : 0.0;
    }
    out.push_back(s);
  }
  return out;
}

inline void write_summary_csv(std::ostream& out, const std::vector<SummaryRow>& rows) {
  out << std::setprecision(12);
  out << "m,class,mode,encoding,lambda_t,gamma,mu,runs,errors,timeouts,mean_time,mean_rgap,mean_gap,mean_nodes,"
         "mean_root_relaxation_value,mean_shd,sd_shd\n";
  for (const SummaryRow& s : rows)
    out << s.m << ',' << to_string(s.cls) << ',' << to_string(s.mode) << ',' << to_string(s.encoding) << ','
        << s.lambda_t << ',' << s.gamma << ',' << s.mu << ',' << s.runs << ',' << s.errors << ',' << s.timeouts
        << ',' << s.mean_time << ',' << s.mean_rgap << ',' << s.mean_gap << ',' << s.mean_nodes << ','
        << s.mean_root << ',' << s.mean_shd << ',' << s.sd_shd << '\n';
}

struct EarlyStopArm {
  std::vector<BenchRow> rows;
  double mean_shd = 0.0;
  double sd_shd = 0.0;
  double mean_gap = 0.0;
  double total_wall = 0.0;
  double mean_time = 0.0;  ///< over non-timeout runs
  int timeouts = 0;
  int errors = 0;
};

struct EarlyStopSummary {
  int m = 0;
  int n = 0;
  EarlyStopArm exact;  ///< τ = 0
  EarlyStopArm early;  ///< τ = s_m ln(m)/n
};

struct EarlyStopOptions {
  Mode mode = Mode::persp;
  Encoding encoding = Encoding::cp_lazy;
  double d = 2.0;
  double time_limit = 0.0;  ///< ≤ 0 means 100·m seconds
  BnbOptions solver;
};

/// Moral instances at λ_n = ln m, each solved with τ = 0 and with the
/// early-stopping gap; both arms see identical data.
inline EarlyStopSummary compare_early_stop(int m, int n, const std::vector<std::uint64_t>& seeds,
                                           const EarlyStopOptions& opt = {}) {
  BenchSpec spec;
  spec.m_list = {m};
  spec.n = n;
  spec.d = opt.d;
  spec.seeds = seeds;
  spec.modes = {opt.mode};
  spec.encodings = {opt.encoding};
  spec.lambda_rule = LambdaRule::logm;
  spec.stop.abs_gap = 0.0;
  spec.stop.rel_gap = 0.0;
  spec.stop.time_limit = opt.time_limit > 0.0 ? opt.time_limit : 100.0 * m;
  spec.solver = opt.solver;
  spec.validate();

  auto finish = [](EarlyStopArm& arm) {
    std::vector<double> shds;
    int finished = 0;
    for (const BenchRow& r : arm.rows) {
      if (!r.ok()) {
        ++arm.errors;
        continue;
      }
      arm.total_wall += r.wall_seconds;
      arm.mean_gap += r.gap;
      shds.push_back(static_cast<double>(r.shd));
      if (r.timed_out()) {
        ++arm.timeouts;
      } else {
        ++finished;
        arm.mean_time += r.wall_seconds;
      }
    }
    if (finished) arm.mean_time /= finished;
    if (!shds.empty()) {
      const double k = static_cast<double>(shds.size());
      arm.mean_gap /= k;
      for (double v : shds) arm.mean_shd += v / k;
      for (double v : shds) arm.sd_shd += (v - arm.mean_shd) * (v - arm.mean_shd);
      arm.sd_shd = shds.size() > 1 ? std::sqrt(arm.sd_shd / (k - 1.0)) : 0.0;
    }
  };

  EarlyStopSummary out;
  out.m = m;
  out.n = n;
  // Alternate arms per seed so drift in machine load hits both equally.
  for (auto seed : seeds) {
    const detail::BenchCell cell{m, seed, InstanceClass::moral, opt.mode, opt.encoding, 1.0, 2.0, 0.0};
    spec.early_stop = false;
    out.exact.rows.push_back(detail::run_cell(spec, cell));
    spec.early_stop = true;
    out.early.rows.push_back(detail::run_cell(spec, cell));
  }
  finish(out.exact);
  finish(out.early);
  return out;
}

}  // namespace dagopt
