#pragma once

#include <algorithm>
#include <bit>
#include <cstdint>
#include <limits>
#include <cmath>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "dagopt/graphs.hpp"
#include "dagopt/score.hpp"

namespace dagopt {

enum class Mode { bigm, persp, perspcut };
enum class Encoding { cp_lazy, ln };
enum class DeltaRule { eig, greedy, zero };

inline const char* to_string(Mode m) {
  switch (m) {
    case Mode::bigm: return "bigm";
    case Mode::persp: return "persp";
    case Mode::perspcut: return "perspcut";
  }
  return "?";
}
inline const char* to_string(Encoding e) { return e == Encoding::ln ? "ln" : "cp_lazy"; }
inline const char* to_string(DeltaRule d) {
  switch (d) {
    case DeltaRule::eig: return "eig";
    case DeltaRule::greedy: return "greedy";
    case DeltaRule::zero: return "zero";
  }
  return "?";
}

/// Result of an in-place Cholesky attempt A = LLᵀ tolerant of semidefinite
/// input: a pivot in [-tol, tol] zeroes its column, a pivot below -tol fails.
struct CholeskyCheck {
  bool ok = false;
  double min_pivot = 0.0;
  Eigen::MatrixXd lower;  ///< valid when ok
};

inline CholeskyCheck psd_cholesky(const Eigen::MatrixXd& a, double tol) {
  const Eigen::Index m = a.rows();
  CholeskyCheck out;
  out.lower = Eigen::MatrixXd::Zero(m, m);
  out.min_pivot = m ? std::numeric_limits<double>::infinity() : 0.0;
  auto& l = out.lower;
  for (Eigen::Index j = 0; j < m; ++j) {
    const double d = a(j, j) - l.row(j).head(j).squaredNorm();
    out.min_pivot = std::min(out.min_pivot, d);
    if (d < -tol) return out;
    if (d <= tol) continue;  // column stays zero
    const double s = std::sqrt(d);
    l(j, j) = s;
    for (Eigen::Index i = j + 1; i < m; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / s;
  }
  out.ok = true;
  return out;
}

/// Cholesky that requires every pivot to be at least `eps`.
inline bool cholesky_pivots_at_least(const Eigen::MatrixXd& a, double eps) {
  const Eigen::Index m = a.rows();
  Eigen::MatrixXd l = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const double d = a(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d >= eps && d > 0.0)) return false;
    const double s = std::sqrt(d);
    l(j, j) = s;
    for (Eigen::Index i = j + 1; i < m; ++i)
      l(i, j) = (a(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / s;
  }
  return true;
}

inline Eigen::VectorXd select_delta_eig(const Eigen::MatrixXd& gram_plus_mu, double eps = 1e-6) {
  const Eigen::Index m = gram_plus_mu.rows();
  if (m == 0) return {};
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(gram_plus_mu, Eigen::EigenvaluesOnly);
  const double lmin = es.eigenvalues().minCoeff();
  return Eigen::VectorXd::Constant(m, std::max(lmin - eps, 0.0));
}

/// Coordinate ascent on Σδ subject to a Cholesky certificate of
/// (A − diag δ) with pivots ≥ eps, started from the eigenvalue choice.
inline Eigen::VectorXd select_delta_greedy(const Eigen::MatrixXd& gram_plus_mu, double eps = 1e-6) {
  const Eigen::Index m = gram_plus_mu.rows();
  Eigen::VectorXd delta = select_delta_eig(gram_plus_mu, eps);
  if (m == 0) return delta;
  Eigen::MatrixXd work = gram_plus_mu;
  work.diagonal() -= delta;
  // The eig start may itself fail the pivot test by rounding; back off until it passes.
  while (!cholesky_pivots_at_least(work, eps) && delta.maxCoeff() > 0.0) {
    work.diagonal() += delta;
    delta *= 0.5;
    if (delta.maxCoeff() < 1e-12) delta.setZero();
    work.diagonal() -= delta;
  }
  if (!cholesky_pivots_at_least(work, eps)) return delta;
  double step = gram_plus_mu.diagonal().maxCoeff() / 4.0;
  while (step >= 1e-6) {
    bool grew = true;
    while (grew) {
      grew = false;
      for (Eigen::Index i = 0; i < m; ++i) {
        work(i, i) -= step;
        if (cholesky_pivots_at_least(work, eps)) {
          delta(i) += step;
          grew = true;
        } else {
          work(i, i) += step;
        }
      }
    }
    step *= 0.5;
  }
  return delta;
}

struct QSplit {
  Eigen::MatrixXd q_mat;  ///< XᵀX + mu I − diag(δ)
  Eigen::MatrixXd chol;   ///< upper factor q with Q = qᵀq
};

struct ProblemSpec {
  GramData gram_data;
  std::vector<Arc> super_arcs;  ///< bidirected, sorted
  Penalty penalty;
  double big_m = 1.0;
  Eigen::VectorXd delta;  ///< indexed by parent node
  Mode mode = Mode::persp;
  Encoding encoding = Encoding::cp_lazy;
  std::vector<std::string> warnings;

  int m() const { return gram_data.m; }
};

struct BuildOptions {
  std::optional<double> lambda_n;  ///< default bic_lambda(n)
  double mu = 0.0;
  double gamma = 2.0;
  double big_m_floor = 1.0;
  std::optional<double> big_m;  ///< override estimate_big_m
  DeltaRule delta_rule = DeltaRule::greedy;
  double delta_eps = 1e-6;
  Mode mode = Mode::persp;
  Encoding encoding = Encoding::cp_lazy;
};

/// Candidate parents of every node under a bidirected arc set.
inline std::vector<std::vector<int>> candidate_parents(int m, const std::vector<Arc>& arcs) {
  std::vector<std::vector<int>> cand(static_cast<std::size_t>(m));
  for (const Arc& a : arcs) cand[a.to].push_back(a.from);
  for (auto& c : cand) {
    std::sort(c.begin(), c.end());
    c.erase(std::unique(c.begin(), c.end()), c.end());
  }
  return cand;
}

/// Best ℓ0-penalized parent set of node k ignoring acyclicity: exhaustive
/// (with superset pruning) up to 20 candidates, greedy forward selection above.
inline std::vector<int> best_subset_parents(int k, const std::vector<int>& cand, const GramData& gd,
                                            const Penalty& pen) {
  const int p = static_cast<int>(cand.size());
  if (p <= 20) {
    const double rss_full = ols(k, cand, gd, pen.mu).rss;
    double best = std::numeric_limits<double>::infinity();
    std::uint32_t best_mask = 0;
    for_each_parent_subset(k, cand, gd, pen.mu, [&](std::uint32_t mask, double rss) {
      const auto size = std::popcount(mask);
      const double val = rss + pen.lambda_n * size;
      if (val < best) {
        best = val;
        best_mask = mask;
      }
      // Any strict superset costs at least rss_full + lambda (|mask| + 1).
      return rss_full + pen.lambda_n * (size + 1) < best;
    });
    std::vector<int> out;
    for (int i = 0; i < p; ++i)
      if (best_mask & (1u << i)) out.push_back(cand[i]);
    return out;
  }
  std::vector<int> chosen;
  double cur = ols(k, chosen, gd, pen.mu).rss;
  for (;;) {
    int best_c = -1;
    double best_val = cur;
    for (int c : cand) {
      if (std::find(chosen.begin(), chosen.end(), c) != chosen.end()) continue;
      auto trial = chosen;
      trial.push_back(c);
      const double v = ols(k, trial, gd, pen.mu).rss + pen.lambda_n;
      if (v < best_val) {
        best_val = v;
        best_c = c;
      }
    }
    if (best_c < 0) break;
    chosen.push_back(best_c);
    cur = best_val - pen.lambda_n;
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

/// M = gamma · max|β^R| over the acyclicity-free fit; `floor` when all zero.
inline double estimate_big_m(const GramData& gd, const std::vector<Arc>& super_arcs, const Penalty& pen,
                             double gamma = 2.0, double floor = 1.0) {
  if (!(gamma >= 1.0)) throw std::invalid_argument("estimate_big_m: gamma must be >= 1");
  const auto cand = candidate_parents(gd.m, super_arcs);
  double max_abs = 0.0;
  for (int k = 0; k < gd.m; ++k) {
    const auto parents = best_subset_parents(k, cand[k], gd, pen);
    const OlsResult r = ols(k, parents, gd, pen.mu);
    if (r.beta.size() > 0) max_abs = std::max(max_abs, r.beta.cwiseAbs().maxCoeff());
  }
  return max_abs > 0.0 ? gamma * max_abs : floor;
}

inline QSplit make_qsplit(const GramData& gd, double mu, const Eigen::VectorXd& delta) {
  QSplit qs;
  qs.q_mat = gd.gram;
  qs.q_mat.diagonal().array() += mu;
  qs.q_mat.diagonal() -= delta;
  const CholeskyCheck c = psd_cholesky(qs.q_mat, 1e-8 * (1.0 + qs.q_mat.cwiseAbs().maxCoeff()));
  if (!c.ok) {
    std::ostringstream os;
    os << "build_problem: XᵀX + mu I − diag(δ) is not PSD (min Cholesky pivot " << c.min_pivot << ")";
    throw std::runtime_error(os.str());
  }
  qs.chol = c.lower.transpose();
  return qs;
}

inline std::pair<ProblemSpec, QSplit> build_problem(const Eigen::MatrixXd& data,
                                                    const UndirectedGraph& super_structure,
                                                    const BuildOptions& opt = {}) {
  if (data.cols() != super_structure.num_nodes())
    throw std::invalid_argument("build_problem: data has " + std::to_string(data.cols()) +
                                " columns but the super-structure has " +
                                std::to_string(super_structure.num_nodes()) + " nodes");
  ProblemSpec spec;
  spec.gram_data = GramData(data);
  spec.super_arcs = super_structure.bidirected_arcs();
  const int n = spec.gram_data.n;
  spec.penalty.lambda_n = opt.lambda_n ? *opt.lambda_n : bic_lambda(std::max(n, 2));
  spec.penalty.mu = opt.mu;
  spec.penalty.validate();
  spec.mode = opt.mode;
  spec.encoding = opt.encoding;
  if (n < spec.m() && opt.mu == 0.0)
    spec.warnings.push_back("n < m with mu = 0: XᵀX is not full rank, so the eigenvalue δ is zero");
  spec.big_m = opt.big_m ? *opt.big_m
                         : estimate_big_m(spec.gram_data, spec.super_arcs, spec.penalty, opt.gamma,
                                          opt.big_m_floor);
  if (!(spec.big_m > 0.0)) throw std::invalid_argument("build_problem: big-M must be > 0");

  Eigen::MatrixXd gpm = spec.gram_data.gram;
  gpm.diagonal().array() += opt.mu;
  switch (opt.delta_rule) {
    case DeltaRule::eig: spec.delta = select_delta_eig(gpm, opt.delta_eps); break;
    case DeltaRule::greedy: spec.delta = select_delta_greedy(gpm, opt.delta_eps); break;
    case DeltaRule::zero: spec.delta = Eigen::VectorXd::Zero(spec.m()); break;
  }
  if (opt.mode != Mode::bigm && spec.m() > 0 && spec.delta.maxCoeff() == 0.0)
    spec.warnings.push_back("δ is zero: the perspective relaxation coincides with big-M");
  QSplit qs = make_qsplit(spec.gram_data, opt.mu, spec.delta);
  return {std::move(spec), std::move(qs)};
}

}  // namespace dagopt
