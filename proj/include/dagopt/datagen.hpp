#pragma once

#include <cstdint>
#include <map>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dagopt/graphs.hpp"
#include "dagopt/rng.hpp"

namespace dagopt {

using ArcWeights = std::map<Arc, double>;

struct GenConfig {
  int m = 10;
  int n = 100;
  double d = 2.0;  ///< expected out-degree
  double weight_low = 0.1;
  double weight_high = 1.0;
  double noise_sd = 1.0;
  std::uint64_t seed = 0;
  bool sign_flip = false;  ///< negate each weight with probability 1/2

  void validate() const {
    if (m < 2) throw std::invalid_argument("GenConfig: m must be >= 2");
    if (n < 1) throw std::invalid_argument("GenConfig: n must be >= 1");
    if (!(d > 0.0 && d < m)) throw std::invalid_argument("GenConfig: degree must lie in (0, m)");
    if (!(weight_low > 0.0 && weight_low <= weight_high))
      throw std::invalid_argument("GenConfig: need 0 < weight_low <= weight_high");
    if (!(noise_sd >= 0.0)) throw std::invalid_argument("GenConfig: noise_sd must be >= 0");
  }
};

struct GeneratedInstance {
  GenConfig config;
  DirectedGraph true_dag;
  ArcWeights true_beta;
  Eigen::MatrixXd data;  ///< n x m, rows are samples
  UndirectedGraph moral;
  UndirectedGraph complete;
};

/// Random DAG over a uniformly random topological order. Draw sequence on
/// stream (seed, 0): Fisher-Yates permutation (i = m-1 down to 1, swap with
/// uniform_int(i+1)); then for each position pair i < j in row-major order one
/// uniform01() for presence with probability d/(m-1), and for a present arc one
/// uniform weight, followed by one uniform01() sign draw when sign_flip is on.
inline std::pair<DirectedGraph, ArcWeights> random_dag(const GenConfig& cfg) {
  cfg.validate();
  auto rng = Xoshiro256::stream(cfg.seed, 0);
  std::vector<int> perm(static_cast<std::size_t>(cfg.m));
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = cfg.m - 1; i > 0; --i) {
    const auto j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(perm[i], perm[j]);
  }
  const double p = cfg.d / (cfg.m - 1);
  DirectedGraph dag(cfg.m);
  ArcWeights beta;
  for (int i = 0; i < cfg.m; ++i) {
    for (int j = i + 1; j < cfg.m; ++j) {
      if (rng.uniform01() >= p) continue;
      double w = rng.uniform(cfg.weight_low, cfg.weight_high);
      if (cfg.sign_flip && rng.uniform01() < 0.5) w = -w;
      const Arc a{perm[i], perm[j]};
      dag.add_arc(a);
      beta[a] = w;
    }
  }
  return {dag, beta};
}

/// Linear SEM sampling with Gaussian noise. Rows are generated one at a time;
/// within a row nodes are visited in topological order and each draws one
/// normal() from the supplied generator.
inline Eigen::MatrixXd sample_sem(const DirectedGraph& dag, const ArcWeights& beta, int n,
                                  double noise_sd, Xoshiro256& rng) {
  const auto order = topological_order(dag);
  if (!order) throw std::invalid_argument("sample_sem: graph has a directed cycle");
  for (const Arc& a : dag.arcs())
    if (!beta.count(a)) throw std::invalid_argument("sample_sem: missing weight for an arc");
  for (const auto& [a, w] : beta)
    if (!dag.has_arc(a.from, a.to)) throw std::invalid_argument("sample_sem: weight on a non-arc");
  const auto pred = dag.predecessors();
  Eigen::MatrixXd x(n, dag.num_nodes());
  for (int r = 0; r < n; ++r) {
    for (int k : *order) {
      double v = noise_sd * rng.normal();
      for (int j : pred[k]) v += beta.at(Arc{j, k}) * x(r, j);
      x(r, k) = v;
    }
  }
  return x;
}

/// Uses stream (seed, 1).
inline Eigen::MatrixXd sample_sem(const DirectedGraph& dag, const ArcWeights& beta,
                                  const GenConfig& cfg) {
  cfg.validate();
  auto rng = Xoshiro256::stream(cfg.seed, 1);
  return sample_sem(dag, beta, cfg.n, cfg.noise_sd, rng);
}

inline GeneratedInstance make_instance(const GenConfig& cfg) {
  auto [dag, beta] = random_dag(cfg);
  GeneratedInstance inst;
  inst.config = cfg;
  inst.data = sample_sem(dag, beta, cfg);
  inst.moral = moralize(dag);
  inst.complete = complete_graph(cfg.m);
  inst.true_dag = std::move(dag);
  inst.true_beta = std::move(beta);
  return inst;
}

}  // namespace dagopt
