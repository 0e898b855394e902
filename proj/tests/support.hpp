#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <queue>
#include <vector>

#include "dagopt/datagen.hpp"
#include "dagopt/formulation.hpp"
#include "dagopt/graphs.hpp"

namespace dagopt::fixture {

inline GeneratedInstance instance(int m, std::uint64_t seed, int n = 100, double d = 2.0) {
  GenConfig cfg;
  cfg.m = m;
  cfg.n = n;
  cfg.d = std::min(d, m - 1.0);  // the generator needs d < m
  cfg.seed = seed;
  return make_instance(cfg);
}

inline ProblemSpec problem(const GeneratedInstance& inst, bool complete, Mode mode = Mode::persp,
                           Encoding enc = Encoding::cp_lazy, std::optional<double> lambda = std::nullopt) {
  BuildOptions bo;
  bo.mode = mode;
  bo.encoding = enc;
  bo.lambda_n = lambda;
  return build_problem(inst.data, complete ? inst.complete : inst.moral, bo).first;
}

/// All loop-free digraphs on m nodes, indexed by the bitmask over ordered pairs (u ≠ v).
inline std::vector<DirectedGraph> all_digraphs(int m) {
  std::vector<Arc> pairs;
  for (int u = 0; u < m; ++u)
    for (int v = 0; v < m; ++v)
      if (u != v) pairs.push_back({u, v});
  std::vector<DirectedGraph> out;
  for (std::uint32_t mask = 0; mask < (1u << pairs.size()); ++mask) {
    DirectedGraph g(m);
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (mask & (1u << i)) g.add_arc(pairs[i]);
    out.push_back(std::move(g));
  }
  return out;
}

/// Cycle test by transitive closure: some arc (u,v) with u reachable from v.
inline bool cyclic_by_reachability(const DirectedGraph& g) {
  const int m = g.num_nodes();
  std::vector<std::vector<bool>> reach(m, std::vector<bool>(m, false));
  for (const Arc& a : g.arcs()) reach[a.from][a.to] = true;
  for (int k = 0; k < m; ++k)
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < m; ++j)
        if (reach[i][k] && reach[k][j]) reach[i][j] = true;
  for (int i = 0; i < m; ++i)
    if (reach[i][i]) return true;
  return false;
}

/// Minimum number of single-arc additions, deletions and reversals turning
/// `from` into `to`, by breadth-first search over all digraphs on m ≤ 3 nodes.
inline int shd_by_search(const DirectedGraph& from, const DirectedGraph& to) {
  const int m = from.num_nodes();
  std::vector<Arc> pairs;
  for (int u = 0; u < m; ++u)
    for (int v = 0; v < m; ++v)
      if (u != v) pairs.push_back({u, v});
  auto encode = [&](const DirectedGraph& g) {
    std::uint32_t mask = 0;
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (g.has_arc(pairs[i].from, pairs[i].to)) mask |= 1u << i;
    return mask;
  };
  auto bit = [&](int u, int v) {
    for (std::size_t i = 0; i < pairs.size(); ++i)
      if (pairs[i].from == u && pairs[i].to == v) return 1u << i;
    return 0u;
  };
  const std::uint32_t start = encode(from), goal = encode(to);
  std::vector<int> dist(1u << pairs.size(), -1);
  std::queue<std::uint32_t> q;
  dist[start] = 0;
  q.push(start);
  while (!q.empty()) {
    const std::uint32_t s = q.front();
    q.pop();
    if (s == goal) return dist[s];
    std::vector<std::uint32_t> next;
    for (const Arc& a : pairs) {
      const std::uint32_t b = bit(a.from, a.to), r = bit(a.to, a.from);
      next.push_back(s ^ b);                                    // add or delete
      if ((s & b) && !(s & r)) next.push_back((s & ~b) | r);  // reverse
    }
    for (std::uint32_t t : next)
      if (dist[t] < 0) {
        dist[t] = dist[s] + 1;
        q.push(t);
      }
  }
  return -1;
}

/// Box-constrained ℓ1-penalized least squares, Σ_k ‖X_k − X_P b‖² + c Σ|b|
/// with |b| ≤ box over each node's candidate parents, by cyclic coordinate
/// descent on the Gram matrix. Returns the optimal objective value.
inline double lasso_value(const GramData& gd, const std::vector<Arc>& arcs, double c, double box) {
  const auto cand = candidate_parents(gd.m, arcs);
  double total = 0.0;
  for (int k = 0; k < gd.m; ++k) {
    const auto& p = cand[k];
    const auto np = static_cast<Eigen::Index>(p.size());
    Eigen::VectorXd b = Eigen::VectorXd::Zero(np);
    for (int sweep = 0; sweep < 100000; ++sweep) {
      double change = 0.0;
      for (Eigen::Index j = 0; j < np; ++j) {
        double r = gd.gram(p[j], k);
        for (Eigen::Index l = 0; l < np; ++l)
          if (l != j) r -= gd.gram(p[j], p[l]) * b(l);
        const double gjj = gd.gram(p[j], p[j]);
        double v = 0.0;
        if (gjj > 0.0) {
          const double shrunk = std::copysign(std::max(std::abs(r) - c / 2.0, 0.0), r);
          v = std::clamp(shrunk / gjj, -box, box);
        }
        change = std::max(change, std::abs(v - b(j)));
        b(j) = v;
      }
      if (change < 1e-14) break;
    }
    double val = gd.col_sq(k) + c * b.lpNorm<1>();
    for (Eigen::Index j = 0; j < np; ++j) {
      val -= 2.0 * b(j) * gd.gram(p[j], k);
      for (Eigen::Index l = 0; l < np; ++l) val += b(j) * b(l) * gd.gram(p[j], p[l]);
    }
    total += val;
  }
  return total;
}

}  // namespace dagopt::fixture
