#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

#include "dagopt/formulation.hpp"
#include "dagopt/graphs.hpp"
#include "dagopt/score.hpp"

namespace dagopt {

struct OracleResult {
  DirectedGraph dag;
  ArcWeights beta;
  double score = 0.0;
  std::uint64_t subsets_evaluated = 0;  ///< local scores (DP) or DAGs visited (enumeration)
  bool big_m_exceeded = false;          ///< max|β| > M: the boxed optimum may differ
};

namespace detail {

inline OracleResult finish_oracle(DirectedGraph dag, const ProblemSpec& spec, std::uint64_t count) {
  OracleResult out;
  Refit r = refit_dag(dag, spec.gram_data, spec.penalty);
  std::vector<Arc> support(dag.arcs().begin(), dag.arcs().end());
  out.score = score(r.beta, support, spec.gram_data, spec.penalty);
  if (!std::isfinite(out.score)) throw std::runtime_error("oracle: non-finite score");
  for (const auto& [a, w] : r.beta) out.big_m_exceeded = out.big_m_exceeded || std::abs(w) > spec.big_m;
  out.beta = std::move(r.beta);
  out.dag = std::move(dag);
  out.subsets_evaluated = count;
  return out;
}

}  // namespace detail

/// Exact minimizer of the penalized score over DAGs inside the
/// super-structure, by dynamic programming over node subsets. Ignores the
/// big-M box and flags it instead.
inline OracleResult exact_solve(const ProblemSpec& spec, int max_m = 16) {
  const int m = spec.m();
  if (m > max_m) throw std::invalid_argument("exact_solve: m = " + std::to_string(m) + " exceeds " + std::to_string(max_m));
  if (m > 30) throw std::invalid_argument("exact_solve: m above 30 is not supported");
  const auto cand = candidate_parents(m, spec.super_arcs);
  const double lam = spec.penalty.lambda_n;

  // best_in[v][U]: best local score of v with parents inside candidate mask U.
  std::vector<std::vector<double>> best_in(static_cast<std::size_t>(m));
  std::vector<std::vector<std::uint32_t>> arg_in(static_cast<std::size_t>(m));
  std::uint64_t evaluated = 0;
  for (int v = 0; v < m; ++v) {
    const int p = static_cast<int>(cand[v].size());
    if (p > 20) throw std::invalid_argument("exact_solve: node " + std::to_string(v) + " has more than 20 candidate parents");
    const std::size_t full = std::size_t{1} << p;
    std::vector<double> local(full, std::numeric_limits<double>::infinity());
    for_each_parent_subset(v, cand[v], spec.gram_data, spec.penalty.mu, [&](std::uint32_t mask, double rss) {
      local[mask] = rss + lam * std::popcount(mask);
      ++evaluated;
      return true;
    });
    auto& bi = best_in[v];
    auto& ai = arg_in[v];
    bi.assign(full, 0.0);
    ai.assign(full, 0);
    for (std::size_t u = 0; u < full; ++u) {
      bi[u] = local[u];
      ai[u] = static_cast<std::uint32_t>(u);
      for (int i = 0; i < p; ++i) {
        if (!(u & (std::size_t{1} << i))) continue;
        const std::size_t sub = u & ~(std::size_t{1} << i);
        if (bi[sub] < bi[u]) {
          bi[u] = bi[sub];
          ai[u] = ai[sub];
        }
      }
    }
  }

  auto compress = [&](int v, std::uint32_t nodes) {
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < cand[v].size(); ++i)
      if (nodes & (1u << cand[v][i])) mask |= 1u << i;
    return mask;
  };

  const std::size_t nsets = std::size_t{1} << m;
  std::vector<double> best(nsets, std::numeric_limits<double>::infinity());
  std::vector<int> sink(nsets, -1);
  best[0] = 0.0;
  for (std::size_t s = 1; s < nsets; ++s) {
    for (int v = 0; v < m; ++v) {
      if (!(s & (std::size_t{1} << v))) continue;
      const std::size_t rest = s & ~(std::size_t{1} << v);
      const double val = best[rest] + best_in[v][compress(v, static_cast<std::uint32_t>(rest))];
      if (val < best[s]) {
        best[s] = val;
        sink[s] = v;
      }
    }
  }

  DirectedGraph dag(m);
  std::size_t s = nsets - 1;
  while (s) {
    const int v = sink[s];
    const std::size_t rest = s & ~(std::size_t{1} << v);
    const std::uint32_t pm = arg_in[v][compress(v, static_cast<std::uint32_t>(rest))];
    for (std::size_t i = 0; i < cand[v].size(); ++i)
      if (pm & (1u << i)) dag.add_arc({cand[v][i], v});
    s = rest;
  }
  return detail::finish_oracle(std::move(dag), spec, evaluated);
}

/// Literal enumeration of every DAG inside the super-structure (each edge
/// absent or oriented either way), scored by per-node OLS. m ≤ m_cap.
inline OracleResult enumerate_dags(const ProblemSpec& spec, int m_cap = 5) {
  const int m = spec.m();
  if (m > m_cap) throw std::invalid_argument("enumerate_dags: m = " + std::to_string(m) + " exceeds " + std::to_string(m_cap));
  std::vector<Edge> edges;
  for (const Arc& a : spec.super_arcs)
    if (a.from < a.to) edges.push_back(Edge(a.from, a.to));
  LocalScoreCache cache(spec.gram_data, spec.penalty.mu);
  const std::size_t e = edges.size();
  std::vector<int> state(e, 0);
  double best = std::numeric_limits<double>::infinity();
  DirectedGraph best_dag(m);
  std::uint64_t count = 0;
  for (;;) {
    DirectedGraph g(m);
    for (std::size_t i = 0; i < e; ++i) {
      if (state[i] == 1) g.add_arc({edges[i].u, edges[i].v});
      if (state[i] == 2) g.add_arc({edges[i].v, edges[i].u});
    }
    if (is_acyclic(g)) {
      ++count;
      const auto pred = g.predecessors();
      double val = spec.penalty.lambda_n * static_cast<double>(g.num_arcs());
      for (int k = 0; k < m; ++k) val += cache.get(k, pred[k]).rss;
      if (val < best) {
        best = val;
        best_dag = g;
      }
    }
    std::size_t i = 0;
    while (i < e && state[i] == 2) state[i++] = 0;
    if (i == e) break;
    ++state[i];
  }
  return detail::finish_oracle(std::move(best_dag), spec, count);
}

}  // namespace dagopt
