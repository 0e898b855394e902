#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <optional>
#include <ostream>
#include <queue>
#include <set>
#include <string>
#include <thread>
#include <vector>

#include "dagopt/formulation.hpp"
#include "dagopt/graphs.hpp"
#include "dagopt/relax.hpp"
#include "dagopt/score.hpp"

namespace dagopt {

struct StopRule {
  double abs_gap = 0.0;
  double rel_gap = 0.01;
  double time_limit = std::numeric_limits<double>::infinity();
  long node_limit = std::numeric_limits<long>::max();
};

/// Default limits: 1% relative gap and 50·m seconds.
inline StopRule default_stop_rule(int m) {
  StopRule s;
  s.time_limit = 50.0 * m;
  return s;
}

/// Early-stopping gap s_m·ln(m)/n.
inline double early_stop_threshold(int m, int n, std::size_t s_m) {
  if (m < 1 || n < 1) throw std::invalid_argument("early_stop_threshold: m and n must be positive");
  return static_cast<double>(s_m) * std::log(static_cast<double>(m)) / n;
}

enum class SolveStatus { optimal, gap_reached, time_limit, node_limit, solver_failure, exact };

inline const char* to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::optimal: return "optimal";
    case SolveStatus::gap_reached: return "gap_reached";
    case SolveStatus::time_limit: return "time_limit";
    case SolveStatus::node_limit: return "node_limit";
    case SolveStatus::solver_failure: return "solver_failure";
    case SolveStatus::exact: return "exact";
  }
  return "?";
}

struct Incumbent {
  DirectedGraph dag;
  ArcWeights beta;
  double ub = std::numeric_limits<double>::infinity();
};

struct TrajectoryPoint {
  double t = 0.0;
  double lb = 0.0;
  double ub = 0.0;
};

struct SolveReport {
  SolveStatus status = SolveStatus::optimal;
  double ub = 0.0;
  double lb = 0.0;
  double gap = 0.0;
  double rgap = 0.0;
  long nodes_explored = 0;
  long cuts_added = 0;  ///< cycle cuts plus perspective cuts
  long relaxations = 0;
  long relax_iterations = 0;
  double wall_seconds = 0.0;
  DirectedGraph dag;
  ArcWeights beta;
  double root_lb = 0.0;
  double root_value = 0.0;
  bool big_m_binding = false;
  std::vector<TrajectoryPoint> trajectory;
  std::vector<std::string> warnings;
  // Configuration echo.
  Mode mode = Mode::persp;
  Encoding encoding = Encoding::cp_lazy;
  double lambda_n = 0.0;
  double mu = 0.0;
  double big_m = 0.0;
  StopRule stop;
};

/// Free-g branching variable: closest to 1/2, or the largest fractional value.
enum class BranchRule { most_fractional, largest };

inline const char* to_string(BranchRule b) {
  return b == BranchRule::largest ? "largest" : "most_fractional";
}

struct BnbOptions {
  RelaxOptions relax;
  BranchRule branch = BranchRule::most_fractional;
  int threads = 1;               ///< nodes solved per synchronous batch
  std::ostream* log = nullptr;   ///< progress lines when set
  double log_interval = 1.0;     ///< seconds between progress lines
  int cut_rounds = 20;           ///< perspective-cut rounds per fractional node
  int cut_rounds_integral = 200; ///< rounds before trusting an integral perspcut point
  int failure_iter_factor = 5;   ///< iteration-cap multiplier on the single retry
};

/// |β| ≥ M(1 − 1e-4) on any arc.
inline bool big_m_binding(const ArcWeights& beta, double big_m) {
  for (const auto& [a, w] : beta)
    if (std::abs(w) >= big_m * (1.0 - 1e-4)) return true;
  return false;
}

/// Removes, while a cycle exists, the arc of smallest |weight| on the cycle
/// found by find_cycle (ties: first on the cycle).
inline DirectedGraph break_cycles(DirectedGraph g, const ArcWeights& weight) {
  while (auto cyc = find_cycle(g)) {
    const Arc* worst = &cyc->front();
    for (const Arc& a : *cyc)
      if (std::abs(weight.at(a)) < std::abs(weight.at(*worst))) worst = &a;
    g.remove_arc(*worst);
  }
  return g;
}

/// Thresholds a relaxation point at 1e-3·M, breaks cycles, refits by OLS.
/// Returns the incumbent when it beats `current_ub`.
inline std::optional<Incumbent> primal_heuristic(const ArcWeights& relax_point, const ProblemSpec& spec,
                                                 double current_ub = std::numeric_limits<double>::infinity()) {
  DirectedGraph g(spec.m());
  ArcWeights w;
  for (const auto& [a, b] : relax_point) {
    if (std::abs(b) >= 1e-3 * spec.big_m) {
      g.add_arc(a);
      w[a] = b;
    }
  }
  g = break_cycles(std::move(g), w);
  Refit r = refit_dag(g, spec.gram_data, spec.penalty);
  if (!(r.score < current_ub)) return std::nullopt;
  return Incumbent{std::move(g), std::move(r.beta), r.score};
}

namespace detail {

/// Free arcs (u,v) with v ⇝ u through fixed-one arcs are fixed to zero.
/// Returns false when the fixed-one arcs already contain a cycle.
inline bool propagate_cp(const RelaxModel& model, NodeConstraints& nc) {
  const int m = model.num_nodes();
  DirectedGraph ones(m);
  for (std::size_t i = 0; i < model.num_arcs(); ++i)
    if (nc.fixed_one(i)) ones.add_arc(model.arcs()[i]);
  if (!is_acyclic(ones)) return false;
  const auto succ = ones.successors();
  std::vector<std::vector<char>> reach(static_cast<std::size_t>(m), std::vector<char>(static_cast<std::size_t>(m), 0));
  for (int s = 0; s < m; ++s) {
    std::vector<int> stack{s};
    reach[s][s] = 1;
    while (!stack.empty()) {
      const int u = stack.back();
      stack.pop_back();
      for (int v : succ[u])
        if (!reach[s][v]) {
          reach[s][v] = 1;
          stack.push_back(v);
        }
    }
  }
  for (std::size_t i = 0; i < model.num_arcs(); ++i) {
    if (nc.is_fixed(i)) continue;
    const Arc& a = model.arcs()[i];
    if (reach[a.to][a.from]) nc.g_hi[i] = 0.0;
  }
  return true;
}

/// g = 1 ⇒ z = 1 ⇒ reverse z = 0 ⇒ reverse g = 0; z = 0 ⇒ g = 0.
/// Returns false on a direct contradiction.
inline bool propagate_ln(const RelaxModel& model, NodeConstraints& nc) {
  auto& ln = *nc.ln_state;
  bool changed = true;
  while (changed) {
    changed = false;
    for (std::size_t i = 0; i < model.num_arcs(); ++i) {
      const Arc& a = model.arcs()[i];
      const auto r = static_cast<std::size_t>(model.arc_index(a.to, a.from));
      if (nc.g_lo[i] == 1.0 && ln.z_lo[i] != 1.0) {
        if (ln.z_hi[i] == 0.0) return false;
        ln.z_lo[i] = 1.0;
        changed = true;
      }
      if (ln.z_lo[i] == 1.0 && ln.z_hi[r] != 0.0) {
        if (ln.z_lo[r] == 1.0) return false;
        ln.z_hi[r] = 0.0;
        changed = true;
      }
      if (ln.z_hi[i] == 0.0 && nc.g_hi[i] != 0.0) {
        if (nc.g_lo[i] == 1.0) return false;
        nc.g_hi[i] = 0.0;
        changed = true;
      }
    }
  }
  return true;
}

/// Strongly connected component labels (iterative Tarjan).
inline std::vector<int> scc_labels(int m, const std::vector<std::vector<int>>& adj) {
  std::vector<int> index(static_cast<std::size_t>(m), -1), low(static_cast<std::size_t>(m), 0),
      comp(static_cast<std::size_t>(m), -1);
  std::vector<char> on_stack(static_cast<std::size_t>(m), 0);
  std::vector<int> stack;
  int counter = 0, ncomp = 0;
  for (int root = 0; root < m; ++root) {
    if (index[root] >= 0) continue;
    std::vector<std::pair<int, std::size_t>> call{{root, 0}};
    index[root] = low[root] = counter++;
    stack.push_back(root);
    on_stack[root] = 1;
    while (!call.empty()) {
      auto& [u, pos] = call.back();
      if (pos < adj[u].size()) {
        const int v = adj[u][pos++];
        if (index[v] < 0) {
          index[v] = low[v] = counter++;
          stack.push_back(v);
          on_stack[v] = 1;
          call.push_back({v, 0});
        } else if (on_stack[v]) {
          low[u] = std::min(low[u], index[v]);
        }
      } else {
        const int done = u;
        call.pop_back();
        if (!call.empty()) low[call.back().first] = std::min(low[call.back().first], low[done]);
        if (low[done] == index[done]) {
          int w;
          do {
            w = stack.back();
            stack.pop_back();
            on_stack[w] = 0;
            comp[w] = ncomp;
          } while (w != done);
          ++ncomp;
        }
      }
    }
  }
  return comp;
}

}  // namespace detail

/// Whether the layered-network rows admit an integral completion with
/// support exactly `support` (indices of arcs with g = 1) under the node's z
/// bounds. Strict precedences come from the support and z fixed to one, weak
/// ones from z fixed to zero; feasible iff no strict precedence closes a cycle.
inline bool ln_completion_feasible(const RelaxModel& model, const NodeConstraints& nc,
                                   const std::vector<std::size_t>& support) {
  const int m = model.num_nodes();
  const auto& ln = *nc.ln_state;
  std::vector<std::vector<int>> adj(static_cast<std::size_t>(m));
  std::vector<Arc> strict;
  for (std::size_t i : support) {
    if (ln.z_hi[i] == 0.0) return false;
    strict.push_back(model.arcs()[i]);
  }
  for (std::size_t i = 0; i < model.num_arcs(); ++i) {
    const Arc& a = model.arcs()[i];
    if (ln.z_lo[i] == 1.0) strict.push_back(a);
    if (ln.z_hi[i] == 0.0) adj[a.to].push_back(a.from);  // ψ_to ≤ ψ_from
  }
  for (const Arc& a : strict) adj[a.from].push_back(a.to);
  const auto comp = detail::scc_labels(m, adj);
  for (const Arc& a : strict)
    if (comp[a.from] == comp[a.to]) return false;
  return true;
}

/// Best-first branch-and-bound over the arc indicators.
class BranchAndBound {
 public:
  BranchAndBound(const ProblemSpec& spec, StopRule stop, BnbOptions opt = {})
      : spec_(spec), model_(spec), stop_(stop), opt_(std::move(opt)) {}

  SolveReport run() {
    start_ = Clock::now();
    SolveReport rep;
    rep.mode = spec_.mode;
    rep.encoding = spec_.encoding;
    rep.lambda_n = spec_.penalty.lambda_n;
    rep.mu = spec_.penalty.mu;
    rep.big_m = spec_.big_m;
    rep.stop = stop_;
    rep.warnings = spec_.warnings;
    if (!std::isfinite(stop_.time_limit) && stop_.node_limit == std::numeric_limits<long>::max() &&
        stop_.abs_gap <= 0.0 && stop_.rel_gap <= 0.0)
      rep.warnings.push_back("no finite limit and zero gaps: the search runs until the tree is exhausted");

    // The empty DAG is always feasible.
    {
      DirectedGraph empty(spec_.m());
      Refit r = refit_dag(empty, spec_.gram_data, spec_.penalty);
      inc_ = Incumbent{empty, {}, r.score};
    }
    // Every score is nonnegative, so 0 bounds the optimum from below.
    global_lb_ = 0.0;
    record();

    auto root = std::make_shared<Node>();
    root->nc = NodeConstraints::root(spec_);
    root->key = 0.0;
    root->max_iter = opt_.relax.max_iter;
    if (prepare(*root)) push(root);

    bool root_done = false;
    SolveStatus status = SolveStatus::optimal;
    double last_log = -1e300;
    for (;;) {
      // Lower bound over the open set.
      while (!open_.empty() && open_.top()->key >= inc_.ub - kPruneTol) open_.pop();
      if (open_.empty()) {
        global_lb_ = inc_.ub;
        record();
        status = SolveStatus::optimal;
        break;
      }
      update_lb(std::min(open_.top()->key, inc_.ub));
      const double t = elapsed();
      if (opt_.log && t - last_log >= opt_.log_interval) {
        log_line(*opt_.log);
        last_log = t;
      }
      if (gap_met()) {
        status = SolveStatus::gap_reached;
        break;
      }
      if (t >= stop_.time_limit) {
        status = SolveStatus::time_limit;
        break;
      }
      if (nodes_ >= stop_.node_limit) {
        status = SolveStatus::node_limit;
        break;
      }

      // Synchronous batch, merged in pop order.
      std::vector<std::shared_ptr<Node>> batch;
      const int width = std::max(1, opt_.threads);
      while (!open_.empty() && static_cast<int>(batch.size()) < width &&
             nodes_ + static_cast<long>(batch.size()) < stop_.node_limit) {
        auto nd = open_.top();
        open_.pop();
        if (nd->key >= inc_.ub - kPruneTol) continue;
        batch.push_back(std::move(nd));
      }
      if (batch.empty()) continue;
      std::vector<Outcome> outs(batch.size());
      const std::vector<CycleCut> pool_snapshot = pool_;
      const double ub_snapshot = inc_.ub;
      if (batch.size() == 1) {
        outs[0] = process(*batch[0], pool_snapshot, ub_snapshot);
      } else {
        std::vector<std::thread> workers;
        for (std::size_t i = 0; i < batch.size(); ++i)
          workers.emplace_back([&, i] { outs[i] = process(*batch[i], pool_snapshot, ub_snapshot); });
        for (auto& w : workers) w.join();
      }
      bool abort = false;
      for (std::size_t i = 0; i < batch.size(); ++i) {
        Outcome& o = outs[i];
        ++nodes_;
        relaxations_ += o.relaxations;
        iterations_ += o.iterations;
        persp_cuts_ += o.persp_cuts;
        if (!root_done) {
          root_done = true;
          rep.root_lb = o.root_lb;
          rep.root_value = o.root_value;
        }
        for (const Cycle& c : o.new_cycles) add_cycle(c);
        for (auto& cand : o.incumbents)
          if (cand.ub < inc_.ub) {
            inc_ = std::move(cand);
            record();
          }
        if (o.failed) {
          auto& nd = batch[i];
          if (nd->retries == 0) {
            nd->retries = 1;
            nd->max_iter *= opt_.failure_iter_factor;
            nd->warm.reset();  // a stale parent point can stall the solver; retry cold
            nd->key = std::max(nd->key, o.lb);
            push(nd);
          } else {
            abort = true;
            update_lb(std::min(nd->key, inc_.ub));
            rep.warnings.push_back("relaxation did not converge after a retry; search aborted");
          }
          continue;
        }
        for (auto& child : o.children) push(child);
      }
      if (abort) {
        status = SolveStatus::solver_failure;
        // Open nodes plus the failed one bound the optimum from below.
        if (!open_.empty()) update_lb(std::min(open_.top()->key, inc_.ub));
        break;
      }
    }

    rep.status = status;
    rep.ub = inc_.ub;
    rep.lb = std::min(global_lb_, inc_.ub);
    rep.gap = rep.ub - rep.lb;
    rep.rgap = rep.ub > 0.0 ? rep.gap / rep.ub : 0.0;
    rep.nodes_explored = nodes_;
    rep.cuts_added = static_cast<long>(pool_.size()) + persp_cuts_;
    rep.relaxations = relaxations_;
    rep.relax_iterations = iterations_;
    rep.dag = inc_.dag;
    rep.beta = inc_.beta;
    rep.big_m_binding = big_m_binding(inc_.beta, spec_.big_m);
    if (rep.big_m_binding) rep.warnings.push_back("an incumbent coefficient is within 1e-4·M of the big-M bound");
    rep.wall_seconds = elapsed();
    record();
    rep.trajectory = trajectory_;
    if (opt_.log) log_line(*opt_.log);
    return rep;
  }

 private:
  using Clock = std::chrono::steady_clock;
  static constexpr double kPruneTol = 1e-9;

  struct Node {
    NodeConstraints nc;
    double key = 0.0;
    long seq = 0;
    int retries = 0;
    int max_iter = 20000;
    std::shared_ptr<const RelaxResult> warm;
  };
  struct NodeOrder {
    bool operator()(const std::shared_ptr<Node>& a, const std::shared_ptr<Node>& b) const {
      if (a->key != b->key) return a->key > b->key;
      return a->seq > b->seq;
    }
  };
  struct Outcome {
    std::vector<std::shared_ptr<Node>> children;
    std::vector<Incumbent> incumbents;
    std::vector<Cycle> new_cycles;
    long relaxations = 0;
    long iterations = 0;
    long persp_cuts = 0;
    bool failed = false;
    double lb = -std::numeric_limits<double>::infinity();
    double root_lb = 0.0;
    double root_value = 0.0;
  };

  double elapsed() const { return std::chrono::duration<double>(Clock::now() - start_).count(); }

  void push(std::shared_ptr<Node> nd) {
    nd->seq = seq_++;
    open_.push(std::move(nd));
  }

  void update_lb(double v) {
    if (v > global_lb_) {
      global_lb_ = v;
      record();
    }
  }

  void record() {
    const double lb = std::min(global_lb_, inc_.ub);
    if (!trajectory_.empty() && trajectory_.back().lb == lb && trajectory_.back().ub == inc_.ub) return;
    trajectory_.push_back({elapsed(), lb, inc_.ub});
  }

  bool gap_met() const {
    const double gap = inc_.ub - global_lb_;
    if (stop_.abs_gap > 0.0 && gap <= stop_.abs_gap) return true;
    if (stop_.rel_gap > 0.0 && inc_.ub > 0.0 && gap / inc_.ub <= stop_.rel_gap) return true;
    return gap <= 0.0;
  }

  void log_line(std::ostream& os) const {
    const double lb = std::min(global_lb_, inc_.ub);
    os << "t=" << elapsed() << " lb=" << lb << " ub=" << inc_.ub << " gap=" << (inc_.ub - lb)
       << " open=" << open_.size() << '\n';
  }

  void add_cycle(Cycle c) {
    std::vector<Arc> key(c.begin(), c.end());
    std::sort(key.begin(), key.end());
    if (!cut_keys_.insert(key).second) return;
    pool_.push_back({static_cast<int>(pool_.size()), std::move(c)});
  }

  /// Propagation plus infeasibility screening; false means the node is empty.
  bool prepare(Node& nd) const {
    if (nd.nc.ln_state) {
      if (!detail::propagate_ln(model_, nd.nc)) return false;
      std::vector<std::size_t> ones;
      for (std::size_t i = 0; i < model_.num_arcs(); ++i)
        if (nd.nc.fixed_one(i)) ones.push_back(i);
      return ln_completion_feasible(model_, nd.nc, ones);
    }
    return detail::propagate_cp(model_, nd.nc);
  }

  std::shared_ptr<Node> make_child(const Node& parent, double lb, std::shared_ptr<const RelaxResult> warm) const {
    auto c = std::make_shared<Node>();
    c->nc = parent.nc;
    c->key = lb;
    c->max_iter = opt_.relax.max_iter;
    c->warm = std::move(warm);
    return c;
  }

  Outcome process(Node& nd, const std::vector<CycleCut>& pool, double ub) const {
    Outcome out;
    std::vector<CycleCut> local = pool;
    auto best_ub = [&]() {
      double u = ub;
      for (const auto& c : out.incumbents) u = std::min(u, c.ub);
      return u;
    };
    RelaxOptions ropt = opt_.relax;
    ropt.max_iter = nd.max_iter;
    std::shared_ptr<const RelaxResult> warm = nd.warm;
    int rounds = 0;
    bool first = true;
    for (;;) {
      // Active cycle cuts: those without a fixed-zero arc.
      nd.nc.cycle_cuts.clear();
      if (!nd.nc.ln_state) {
        for (const CycleCut& cc : local) {
          bool active = true;
          for (const Arc& a : cc.cycle)
            if (nd.nc.fixed_zero(static_cast<std::size_t>(model_.arc_index(a.from, a.to)))) {
              active = false;
              break;
            }
          if (active) nd.nc.cycle_cuts.push_back(cc);
        }
      }
      ropt.cutoff = best_ub() - kPruneTol;
      auto res = std::make_shared<RelaxResult>(solve_relaxation(model_, nd.nc, ropt, warm.get()));
      ++out.relaxations;
      out.iterations += res->iterations;
      if (first && nd.seq == 0) {
        out.root_lb = res->certified_lb;
        out.root_value = res->primal_value;
      }
      first = false;
      if (res->status == RelaxStatus::infeasible) return out;
      const double lb = std::max(nd.key, res->certified_lb);
      out.lb = lb;
      if (lb >= best_ub() - kPruneTol) return out;
      if (res->status == RelaxStatus::failure) {
        out.failed = true;
        return out;
      }
      warm = res;

      if (auto h = primal_heuristic(to_arc_weights(model_, res->beta), spec_, best_ub()))
        out.incumbents.push_back(std::move(*h));
      if (lb >= best_ub() - kPruneTol) return out;

      if (spec_.mode == Mode::perspcut) {
        const int cap = res->integral ? opt_.cut_rounds_integral : opt_.cut_rounds;
        if (rounds < cap) {
          const int added = add_perspective_cuts(model_, nd.nc, *res);
          if (added > 0) {
            ++rounds;
            out.persp_cuts += added;
            continue;
          }
        }
      }

      if (res->integral) {
        DirectedGraph support(model_.num_nodes());
        for (std::size_t i = 0; i < model_.num_arcs(); ++i)
          if (res->g(static_cast<Eigen::Index>(i)) >= 0.5) support.add_arc(model_.arcs()[i]);
        if (auto cyc = find_cycle(support)) {
          if (!nd.nc.ln_state) {
            out.new_cycles.push_back(*cyc);
            std::vector<Arc> key(cyc->begin(), cyc->end());
            std::sort(key.begin(), key.end());
            bool known = false;
            for (const auto& cc : local) {
              std::vector<Arc> k2(cc.cycle.begin(), cc.cycle.end());
              std::sort(k2.begin(), k2.end());
              if (k2 == key) {
                known = true;
                break;
              }
            }
            if (known) {
              // The cut is active yet the point is still cyclic: numerical; branch on an arc of it.
              branch_on_cycle(nd, *cyc, lb, res, out);
              return out;
            }
            local.push_back({static_cast<int>(1000000 + local.size()), *cyc});
            continue;
          }
          branch_on_z(nd, lb, res, out);
          return out;
        }
        Refit r = refit_dag(support, spec_.gram_data, spec_.penalty);
        if (r.score < best_ub()) out.incumbents.push_back(Incumbent{support, std::move(r.beta), r.score});
        return out;
      }

      branch_g(nd, pick_branch(nd, *res), lb, res, out);
      return out;
    }
  }

  /// Highest-scoring free fractional g; ties to the smallest arc index.
  std::size_t pick_branch(const Node& nd, const RelaxResult& res) const {
    std::size_t pick = model_.num_arcs();
    double best = -1.0;
    for (std::size_t i = 0; i < model_.num_arcs(); ++i) {
      if (nd.nc.is_fixed(i)) continue;
      const double g = res.g(static_cast<Eigen::Index>(i));
      const double frac = std::min(g, 1.0 - g);
      if (frac <= opt_.relax.int_tol) continue;
      const double score = opt_.branch == BranchRule::largest ? g : frac;
      if (score > best + 1e-12) {
        best = score;
        pick = i;
      }
    }
    // Integrality tolerance can leave every free g "fractional" below int_tol; fall back to the first free arc.
    for (std::size_t i = 0; i < model_.num_arcs() && pick == model_.num_arcs(); ++i)
      if (!nd.nc.is_fixed(i)) pick = i;
    return pick;
  }

  void branch_g(const Node& nd, std::size_t i, double lb, const std::shared_ptr<const RelaxResult>& res,
                Outcome& out) const {
    for (double v : {0.0, 1.0}) {
      auto c = make_child(nd, lb, res);
      c->nc.g_lo[i] = c->nc.g_hi[i] = v;
      if (prepare(*c)) out.children.push_back(std::move(c));
    }
  }

  void branch_on_cycle(const Node& nd, const Cycle& cyc, double lb, const std::shared_ptr<const RelaxResult>& res,
                       Outcome& out) const {
    for (const Arc& a : cyc) {
      const auto i = static_cast<std::size_t>(model_.arc_index(a.from, a.to));
      if (!nd.nc.is_fixed(i)) {
        branch_g(nd, i, lb, res, out);
        return;
      }
    }
  }

  void branch_on_z(const Node& nd, double lb, const std::shared_ptr<const RelaxResult>& res, Outcome& out) const {
    const auto& ln = *nd.nc.ln_state;
    std::size_t pick = model_.num_arcs();
    double best_frac = -1.0;
    for (std::size_t i = 0; i < model_.num_arcs(); ++i) {
      if (ln.z_lo[i] == ln.z_hi[i]) continue;
      const double z = res->w(static_cast<Eigen::Index>(i));
      const double frac = std::min(z, 1.0 - z);
      if (frac > best_frac + 1e-12) {
        best_frac = frac;
        pick = i;
      }
    }
    if (pick == model_.num_arcs()) return;  // every z fixed: the node holds no DAG
    for (double v : {0.0, 1.0}) {
      auto c = make_child(nd, lb, res);
      c->nc.ln_state->z_lo[pick] = c->nc.ln_state->z_hi[pick] = v;
      if (prepare(*c)) out.children.push_back(std::move(c));
    }
  }

  const ProblemSpec& spec_;
  RelaxModel model_;
  StopRule stop_;
  BnbOptions opt_;
  Clock::time_point start_;
  std::priority_queue<std::shared_ptr<Node>, std::vector<std::shared_ptr<Node>>, NodeOrder> open_;
  std::vector<CycleCut> pool_;
  std::set<std::vector<Arc>> cut_keys_;
  Incumbent inc_;
  double global_lb_ = 0.0;
  long seq_ = 0;
  long nodes_ = 0;
  long relaxations_ = 0;
  long iterations_ = 0;
  long persp_cuts_ = 0;
  std::vector<TrajectoryPoint> trajectory_;
};

inline SolveReport solve(const ProblemSpec& spec, const StopRule& stop, const BnbOptions& opt = {}) {
  return BranchAndBound(spec, stop, opt).run();
}

}  // namespace dagopt
