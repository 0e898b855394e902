#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "dagopt/datagen.hpp"
#include "dagopt/graphs.hpp"

namespace dagopt {

/// Immutable Gram precomputation; every score evaluation goes through `gram`.
struct GramData {
  int m = 0;
  int n = 0;
  Eigen::MatrixXd gram;    ///< XᵀX
  Eigen::VectorXd col_sq;  ///< diag(XᵀX)
  Eigen::MatrixXd data;    ///< n x m

  GramData() = default;
  explicit GramData(Eigen::MatrixXd x)
      : m(static_cast<int>(x.cols())), n(static_cast<int>(x.rows())), data(std::move(x)) {
    if (!data.allFinite()) throw std::invalid_argument("GramData: data contains non-finite values");
    gram = data.transpose() * data;
    gram = 0.5 * (gram + gram.transpose());
    col_sq = gram.diagonal();
  }
};

struct Penalty {
  double lambda_n = 0.0;
  double mu = 0.0;

  void validate() const {
    if (!(lambda_n >= 0.0)) throw std::invalid_argument("Penalty: lambda_n must be >= 0");
    if (!(mu >= 0.0)) throw std::invalid_argument("Penalty: mu must be >= 0");
  }
};

inline double bic_lambda(int n) {
  if (n < 2) throw std::invalid_argument("bic_lambda: n must be >= 2");
  return std::log(static_cast<double>(n));
}

struct OlsResult {
  Eigen::VectorXd beta;  ///< aligned with the `parents` argument
  double rss = 0.0;      ///< includes the mu‖β‖² term
  bool degenerate = false;
};

/// Node-k regression on `parents`; minimum-norm solution when singular.
inline OlsResult ols(int k, const std::vector<int>& parents, const GramData& gd, double mu) {
  if (k < 0 || k >= gd.m) throw std::out_of_range("ols: node " + std::to_string(k) + " out of range");
  for (int p : parents) {
    if (p < 0 || p >= gd.m) throw std::out_of_range("ols: parent " + std::to_string(p) + " out of range");
    if (p == k) throw std::invalid_argument("ols: parents must exclude the regressed node");
  }
  OlsResult res;
  const auto p = static_cast<Eigen::Index>(parents.size());
  if (p == 0) {
    res.rss = gd.col_sq(k);
    return res;
  }
  Eigen::MatrixXd gpp(p, p);
  Eigen::VectorXd gpk(p);
  for (Eigen::Index a = 0; a < p; ++a) {
    gpk(a) = gd.gram(parents[a], k);
    for (Eigen::Index b = 0; b < p; ++b) gpp(a, b) = gd.gram(parents[a], parents[b]);
  }
  Eigen::MatrixXd lhs = gpp;
  lhs.diagonal().array() += mu;
  Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(lhs);
  res.beta = cod.solve(gpk);
  res.degenerate = mu == 0.0 && cod.rank() < p;
  const double rss = gd.col_sq(k) - 2.0 * res.beta.dot(gpk) + res.beta.dot(gpp * res.beta) +
                     mu * res.beta.squaredNorm();
  res.rss = std::max(rss, 0.0);
  return res;
}

/// ‖X − XB‖²_F + mu‖β‖² + lambda_n·|support|.
inline double score(const ArcWeights& beta, const std::vector<Arc>& support, const GramData& gd,
                    const Penalty& pen) {
  auto check = [&](const Arc& a) {
    if (a.from < 0 || a.to < 0 || a.from >= gd.m || a.to >= gd.m || a.from == a.to)
      throw std::out_of_range("score: arc (" + std::to_string(a.from) + "," + std::to_string(a.to) +
                              ") outside the variable range");
  };
  std::set<Arc> supp;
  for (const Arc& a : support) {
    check(a);
    supp.insert(a);
  }
  std::vector<std::vector<std::pair<int, double>>> cols(static_cast<std::size_t>(gd.m));
  for (const auto& [a, w] : beta) {
    check(a);
    if (w == 0.0) continue;
    if (!supp.count(a)) throw std::invalid_argument("score: nonzero weight outside the support");
    cols[a.to].push_back({a.from, w});
  }
  double total = 0.0;
  for (int k = 0; k < gd.m; ++k) {
    double v = gd.col_sq(k);
    for (const auto& [j, w] : cols[k]) {
      v -= 2.0 * w * gd.gram(j, k);
      for (const auto& [l, u] : cols[k]) v += w * u * gd.gram(j, l);
      v += pen.mu * w * w;
    }
    total += v;
  }
  return std::max(total, 0.0) + pen.lambda_n * static_cast<double>(supp.size());
}

/// Per-node OLS refit of a structure; returns the weights and the score.
struct Refit {
  ArcWeights beta;
  double score = 0.0;
  bool degenerate = false;
};

inline Refit refit_dag(const DirectedGraph& dag, const GramData& gd, const Penalty& pen) {
  Refit out;
  const auto pred = dag.predecessors();
  double total = 0.0;
  for (int k = 0; k < dag.num_nodes(); ++k) {
    const OlsResult r = ols(k, pred[k], gd, pen.mu);
    out.degenerate = out.degenerate || r.degenerate;
    total += r.rss;
    for (std::size_t i = 0; i < pred[k].size(); ++i) out.beta[Arc{pred[k][i], k}] = r.beta(static_cast<Eigen::Index>(i));
  }
  out.score = total + pen.lambda_n * static_cast<double>(dag.num_arcs());
  return out;
}

/// Depth-first enumeration of the parent subsets of node k drawn from
/// `candidates` (at most 31), reporting the penalized residual
/// min_β ‖X_k − X_P β‖² + mu‖β‖² of each. Subsets are bitmasks over candidate
/// positions, generated in lexicographic DFS order starting from the empty set.
/// Each step extends a Cholesky factor of (G + mu I) by one row; a column that
/// is numerically dependent on the current ones leaves the residual unchanged
/// and is skipped in later solves. `visit(mask, rss)` returns false to skip
/// supersets of `mask`.
template <class Visit>
void for_each_parent_subset(int k, const std::vector<int>& candidates, const GramData& gd, double mu,
                            Visit&& visit) {
  const int p = static_cast<int>(candidates.size());
  if (p > 31) throw std::invalid_argument("for_each_parent_subset: more than 31 candidates");
  // Per depth: active column list, factor rows, projected rhs.
  struct Level {
    std::vector<int> active;  // candidate positions with a nonzero pivot
    double rss = 0.0;
  };
  Eigen::MatrixXd lmat = Eigen::MatrixXd::Zero(p, p);  // rows indexed by depth of activation
  Eigen::VectorXd y = Eigen::VectorXd::Zero(p);
  std::vector<int> stack_cand;
  std::vector<Level> levels;
  levels.reserve(static_cast<std::size_t>(p) + 1);
  levels.push_back({{}, gd.col_sq(k)});
  Eigen::VectorXd l(p);

  auto a_of = [&](int ci, int cj) {
    return gd.gram(candidates[ci], candidates[cj]) + (ci == cj ? mu : 0.0);
  };

  std::uint32_t mask = 0;
  // Recursive lambda over the next candidate position to consider.
  auto recurse = [&](auto&& self, int start) -> void {
    for (int c = start; c < p; ++c) {
      const Level& cur = levels.back();
      const int r = static_cast<int>(cur.active.size());
      for (int i = 0; i < r; ++i) {
        double s = a_of(cur.active[i], c);
        for (int t = 0; t < i; ++t) s -= lmat(i, t) * l(t);
        l(i) = s / lmat(i, i);
      }
      const double acc = a_of(c, c);
      const double d2 = acc - l.head(r).squaredNorm();
      Level next = cur;
      if (d2 > 1e-12 * std::max(acc, 1e-300)) {
        const double d = std::sqrt(d2);
        for (int t = 0; t < r; ++t) lmat(r, t) = l(t);
        lmat(r, r) = d;
        const double bc = gd.gram(candidates[c], k);
        const double ynew = (bc - l.head(r).dot(y.head(r))) / d;
        y(r) = ynew;
        next.active.push_back(c);
        next.rss = std::max(cur.rss - ynew * ynew, 0.0);
      }
      mask |= (1u << c);
      levels.push_back(std::move(next));
      if (visit(mask, levels.back().rss)) self(self, c + 1);
      levels.pop_back();
      mask &= ~(1u << c);
    }
  };
  if (visit(0u, levels.back().rss)) recurse(recurse, 0);
}

/// Thread-safe memo of node-wise OLS fits keyed by (node, sorted parents).
class LocalScoreCache {
 public:
  struct Entry {
    double rss = 0.0;
    Eigen::VectorXd beta;
  };

  explicit LocalScoreCache(const GramData& gd, double mu) : gd_(&gd), mu_(mu) {}

  Entry get(int k, std::vector<int> parents) const {
    std::sort(parents.begin(), parents.end());
    const Key key{k, parents};
    {
      std::shared_lock lock(mutex_);
      auto it = map_.find(key);
      if (it != map_.end()) return it->second;
    }
    const OlsResult r = ols(k, parents, *gd_, mu_);
    Entry e{r.rss, r.beta};
    std::unique_lock lock(mutex_);
    map_.try_emplace(key, e);
    return e;
  }

  std::size_t size() const {
    std::shared_lock lock(mutex_);
    return map_.size();
  }

 private:
  struct Key {
    int k;
    std::vector<int> parents;
    bool operator==(const Key&) const = default;
  };
  struct KeyHash {
    std::size_t operator()(const Key& key) const {
      std::size_t h = std::hash<int>{}(key.k);
      for (int p : key.parents) h ^= std::hash<int>{}(p) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
      return h;
    }
  };

  const GramData* gd_;
  double mu_;
  mutable std::shared_mutex mutex_;
  mutable std::unordered_map<Key, Entry, KeyHash> map_;
};

}  // namespace dagopt
