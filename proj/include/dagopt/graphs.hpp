#pragma once

#include <algorithm>
#include <compare>
#include <cstddef>
#include <functional>
#include <optional>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace dagopt {

/// Directed arc `from -> to` between 0-based node indices.
struct Arc {
  int from = 0;
  int to = 0;
  auto operator<=>(const Arc&) const = default;
};

/// Unordered node pair, stored with `u < v`.
struct Edge {
  int u = 0;
  int v = 0;
  Edge() = default;
  Edge(int a, int b) : u(std::min(a, b)), v(std::max(a, b)) {}
  auto operator<=>(const Edge&) const = default;
};

/// A directed cycle as a head-to-tail chain of arcs; the last arc returns to
/// the first arc's tail.
using Cycle = std::vector<Arc>;

class DirectedGraph {
 public:
  DirectedGraph() = default;
  explicit DirectedGraph(int m) : m_(m) {
    if (m < 0) throw std::invalid_argument("DirectedGraph: negative node count");
  }
  DirectedGraph(int m, const std::vector<Arc>& arcs) : DirectedGraph(m) {
    for (const Arc& a : arcs) add_arc(a);
  }

  int num_nodes() const { return m_; }
  std::size_t num_arcs() const { return arcs_.size(); }
  const std::set<Arc>& arcs() const { return arcs_; }
  bool has_arc(int from, int to) const { return arcs_.count(Arc{from, to}) > 0; }

  void add_arc(Arc a) {
    if (a.from == a.to) {
      throw std::invalid_argument("DirectedGraph: self-loop on node " + std::to_string(a.from));
    }
    if (a.from < 0 || a.to < 0 || a.from >= m_ || a.to >= m_) {
      throw std::out_of_range("DirectedGraph: arc (" + std::to_string(a.from) + "," +
                              std::to_string(a.to) + ") outside 0.." + std::to_string(m_ - 1));
    }
    arcs_.insert(a);
  }
  void remove_arc(Arc a) { arcs_.erase(a); }

  /// Out-neighbours per node, ascending.
  std::vector<std::vector<int>> successors() const {
    std::vector<std::vector<int>> out(static_cast<std::size_t>(m_));
    for (const Arc& a : arcs_) out[static_cast<std::size_t>(a.from)].push_back(a.to);
    return out;
  }
  std::vector<std::vector<int>> predecessors() const {
    std::vector<std::vector<int>> in(static_cast<std::size_t>(m_));
    for (const Arc& a : arcs_) in[static_cast<std::size_t>(a.to)].push_back(a.from);
    return in;
  }

  bool operator==(const DirectedGraph&) const = default;

 private:
  int m_ = 0;
  std::set<Arc> arcs_;
};

class UndirectedGraph {
 public:
  UndirectedGraph() = default;
  explicit UndirectedGraph(int m) : m_(m) {
    if (m < 0) throw std::invalid_argument("UndirectedGraph: negative node count");
  }
  UndirectedGraph(int m, const std::vector<Edge>& edges) : UndirectedGraph(m) {
    for (const Edge& e : edges) add_edge(e.u, e.v);
  }

  int num_nodes() const { return m_; }
  std::size_t num_edges() const { return edges_.size(); }
  const std::set<Edge>& edges() const { return edges_; }
  bool has_edge(int a, int b) const { return edges_.count(Edge(a, b)) > 0; }

  void add_edge(int a, int b) {
    if (a == b) throw std::invalid_argument("UndirectedGraph: self-loop on node " + std::to_string(a));
    if (a < 0 || b < 0 || a >= m_ || b >= m_) {
      throw std::out_of_range("UndirectedGraph: edge {" + std::to_string(a) + "," +
                              std::to_string(b) + "} outside 0.." + std::to_string(m_ - 1));
    }
    edges_.insert(Edge(a, b));
  }

  /// Bidirected closure: both (u,v) and (v,u) for every edge, sorted.
  std::vector<Arc> bidirected_arcs() const {
    std::vector<Arc> out;
    out.reserve(2 * edges_.size());
    for (const Edge& e : edges_) {
      out.push_back({e.u, e.v});
      out.push_back({e.v, e.u});
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  std::vector<std::vector<int>> neighbours() const {
    std::vector<std::vector<int>> nb(static_cast<std::size_t>(m_));
    for (const Edge& e : edges_) {
      nb[static_cast<std::size_t>(e.u)].push_back(e.v);
      nb[static_cast<std::size_t>(e.v)].push_back(e.u);
    }
    for (auto& l : nb) std::sort(l.begin(), l.end());
    return nb;
  }

  bool operator==(const UndirectedGraph&) const = default;

 private:
  int m_ = 0;
  std::set<Edge> edges_;
};

inline UndirectedGraph complete_graph(int m) {
  UndirectedGraph g(m);
  for (int u = 0; u < m; ++u)
    for (int v = u + 1; v < m; ++v) g.add_edge(u, v);
  return g;
}

inline UndirectedGraph skeleton(const DirectedGraph& g) {
  UndirectedGraph s(g.num_nodes());
  for (const Arc& a : g.arcs()) s.add_edge(a.from, a.to);
  return s;
}

/// Depth-first search for a directed cycle. Roots and successors are visited in
/// ascending order, so the result is deterministic.
inline std::optional<Cycle> find_cycle(const DirectedGraph& g) {
  const int m = g.num_nodes();
  const auto succ = g.successors();
  enum Colour : unsigned char { kWhite, kGrey, kBlack };
  std::vector<Colour> colour(static_cast<std::size_t>(m), kWhite);
  std::vector<int> path;  // grey nodes in DFS order
  std::vector<std::size_t> next_child(static_cast<std::size_t>(m), 0);

  for (int root = 0; root < m; ++root) {
    if (colour[root] != kWhite) continue;
    path.push_back(root);
    colour[root] = kGrey;
    while (!path.empty()) {
      const int u = path.back();
      auto& idx = next_child[u];
      if (idx < succ[u].size()) {
        const int v = succ[u][idx++];
        if (colour[v] == kGrey) {
          auto it = std::find(path.begin(), path.end(), v);
          Cycle cyc;
          for (; it + 1 != path.end(); ++it) cyc.push_back({*it, *(it + 1)});
          cyc.push_back({u, v});
          return cyc;
        }
        if (colour[v] == kWhite) {
          colour[v] = kGrey;
          path.push_back(v);
        }
      } else {
        colour[u] = kBlack;
        path.pop_back();
      }
    }
  }
  return std::nullopt;
}

inline bool is_acyclic(const DirectedGraph& g) { return !find_cycle(g).has_value(); }

/// Kahn's algorithm; among ready nodes the smallest index goes first.
inline std::optional<std::vector<int>> topological_order(const DirectedGraph& g) {
  const int m = g.num_nodes();
  std::vector<int> indeg(static_cast<std::size_t>(m), 0);
  for (const Arc& a : g.arcs()) ++indeg[a.to];
  const auto succ = g.successors();
  std::priority_queue<int, std::vector<int>, std::greater<>> ready;
  for (int v = 0; v < m; ++v)
    if (indeg[v] == 0) ready.push(v);
  std::vector<int> order;
  order.reserve(static_cast<std::size_t>(m));
  while (!ready.empty()) {
    const int u = ready.top();
    ready.pop();
    order.push_back(u);
    for (int v : succ[u])
      if (--indeg[v] == 0) ready.push(v);
  }
  if (static_cast<int>(order.size()) != m) return std::nullopt;
  return order;
}

/// Skeleton plus an edge between every pair of parents sharing a child.
inline UndirectedGraph moralize(const DirectedGraph& dag) {
  if (!is_acyclic(dag)) throw std::invalid_argument("moralize: input graph has a directed cycle");
  UndirectedGraph moral = skeleton(dag);
  const auto pred = dag.predecessors();
  for (const auto& parents : pred)
    for (std::size_t i = 0; i < parents.size(); ++i)
      for (std::size_t j = i + 1; j < parents.size(); ++j) moral.add_edge(parents[i], parents[j]);
  return moral;
}

/// Structural Hamming distance. Each unordered pair contributes the minimal
/// number of single-arc additions, deletions and reversals needed to turn the
/// estimate's arcs on that pair into the truth's; a reversal is one move.
inline std::size_t shd(const DirectedGraph& truth, const DirectedGraph& estimate) {
  if (truth.num_nodes() != estimate.num_nodes()) {
    throw std::invalid_argument("shd: node counts differ (" + std::to_string(truth.num_nodes()) +
                                " vs " + std::to_string(estimate.num_nodes()) + ")");
  }
  // Pair state bits: 1 = u->v, 2 = v->u (u < v).
  auto state = [](const DirectedGraph& g, int u, int v) {
    return (g.has_arc(u, v) ? 1 : 0) | (g.has_arc(v, u) ? 2 : 0);
  };
  std::set<Edge> pairs;
  for (const Arc& a : truth.arcs()) pairs.insert(Edge(a.from, a.to));
  for (const Arc& a : estimate.arcs()) pairs.insert(Edge(a.from, a.to));
  std::size_t dist = 0;
  for (const Edge& e : pairs) {
    const int s = state(truth, e.u, e.v);
    const int t = state(estimate, e.u, e.v);
    if (s == t) continue;
    // none<->both needs two additions; every other distinct pair of states is one move.
    dist += (s + t == 3 && (s == 0 || t == 0)) ? 2 : 1;
  }
  return dist;
}

}  // namespace dagopt
