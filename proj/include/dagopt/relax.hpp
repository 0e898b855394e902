#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "dagopt/formulation.hpp"
#include "dagopt/graphs.hpp"

namespace dagopt {

/// Cycle inequality Σ_{a∈C} g_a ≤ |C| − 1; `id` is the position in the
/// global pool and keys warm-started multipliers.
struct CycleCut {
  int id = -1;
  Cycle cycle;
};

/// Bounds of the layered-network auxiliaries. z is indexed like the arcs;
/// the layer variables ψ are stored divided by m − 1, in [0, 1], and are never branched on.
struct LnState {
  std::vector<double> z_lo, z_hi;
};

/// Branching state of one node. Arc indices refer to the sorted super arcs.
struct NodeConstraints {
  std::vector<double> g_lo, g_hi;  ///< each 0 or 1; lo == hi means fixed
  std::vector<CycleCut> cycle_cuts;
  std::vector<std::vector<double>> persp_cuts;  ///< per arc: sorted tangent points β̄ (0 always present)
  std::optional<LnState> ln_state;

  static NodeConstraints root(const ProblemSpec& spec) {
    NodeConstraints nc;
    const std::size_t a = spec.super_arcs.size();
    nc.g_lo.assign(a, 0.0);
    nc.g_hi.assign(a, 1.0);
    if (spec.mode == Mode::perspcut) nc.persp_cuts.assign(a, std::vector<double>{0.0});
    if (spec.encoding == Encoding::ln) nc.ln_state = LnState{std::vector<double>(a, 0.0), std::vector<double>(a, 1.0)};
    return nc;
  }

  bool is_fixed(std::size_t i) const { return g_lo[i] == g_hi[i]; }
  bool fixed_one(std::size_t i) const { return g_lo[i] == 1.0; }
  bool fixed_zero(std::size_t i) const { return g_hi[i] == 0.0; }

  /// Adds tangent point β̄ on arc i; returns false when already present.
  bool add_persp_cut(std::size_t i, double beta_bar) {
    auto& bars = persp_cuts.at(i);
    auto it = std::lower_bound(bars.begin(), bars.end(), beta_bar);
    if (it != bars.end() && std::abs(*it - beta_bar) <= 1e-12) return false;
    if (it != bars.begin() && std::abs(*(it - 1) - beta_bar) <= 1e-12) return false;
    bars.insert(it, beta_bar);
    return true;
  }
};

enum class RelaxStatus { optimal, infeasible, failure };

inline const char* to_string(RelaxStatus s) {
  switch (s) {
    case RelaxStatus::optimal: return "optimal";
    case RelaxStatus::infeasible: return "infeasible";
    case RelaxStatus::failure: return "failure";
  }
  return "?";
}

struct RelaxResult {
  RelaxStatus status = RelaxStatus::failure;
  Eigen::VectorXd beta;  ///< per super arc
  Eigen::VectorXd g;     ///< per super arc
  Eigen::VectorXd w;     ///< LN auxiliaries: z per arc, then ψ per node
  std::map<int, double> cut_duals;  ///< cycle-cut multipliers by pool id
  Eigen::VectorXd ln_duals;
  double primal_value = std::numeric_limits<double>::infinity();
  double certified_lb = -std::numeric_limits<double>::infinity();
  bool integral = false;
  double kkt_residual = std::numeric_limits<double>::infinity();
  double violation = 0.0;
  int iterations = 0;
};

struct RelaxOptions {
  double tol = 1e-6;        ///< relative gap pv − lb ≤ tol (1 + |pv|)
  int max_iter = 20000;
  int check_every = 10;
  double feas_tol = 1e-6;
  double int_tol = 1e-6;
  double cutoff = std::numeric_limits<double>::infinity();  ///< stop once the certified bound reaches it
};

/// Precomputed per-instance data shared by every node solve.
class RelaxModel {
 public:
  explicit RelaxModel(const ProblemSpec& spec) : spec_(&spec) {
    const int m = spec.m();
    arcs_ = spec.super_arcs;
    if (!std::is_sorted(arcs_.begin(), arcs_.end())) std::sort(arcs_.begin(), arcs_.end());
    index_.assign(static_cast<std::size_t>(m) * m, -1);
    for (std::size_t i = 0; i < arcs_.size(); ++i) {
      const Arc& a = arcs_[i];
      if (a.from < 0 || a.to < 0 || a.from >= m || a.to >= m || a.from == a.to)
        throw std::invalid_argument("RelaxModel: super arc outside the node range");
      index_[a.from * m + a.to] = static_cast<int>(i);
    }
    for (const Arc& a : arcs_)
      if (index_[a.to * m + a.from] < 0) throw std::invalid_argument("RelaxModel: super arcs are not symmetric");

    const bool use_delta = spec.mode != Mode::bigm;
    if (use_delta && spec.delta.size() != m) throw std::invalid_argument("RelaxModel: δ has the wrong length");
    Eigen::MatrixXd q = spec.gram_data.gram;
    q.diagonal().array() += spec.penalty.mu;
    if (use_delta) q.diagonal() -= spec.delta;

    nodes_.resize(static_cast<std::size_t>(m));
    delta_arc_.assign(arcs_.size(), 0.0);
    double lmax = 0.0;
    constant_ = 0.0;
    for (int k = 0; k < m; ++k) {
      NodeBlock& nb = nodes_[k];
      for (std::size_t i = 0; i < arcs_.size(); ++i)
        if (arcs_[i].to == k) nb.arc_ids.push_back(static_cast<int>(i));
      const auto p = static_cast<Eigen::Index>(nb.arc_ids.size());
      nb.q.resize(p, p);
      nb.gk.resize(p);
      for (Eigen::Index a = 0; a < p; ++a) {
        const int ja = arcs_[nb.arc_ids[a]].from;
        nb.gk(a) = spec.gram_data.gram(ja, k);
        for (Eigen::Index b = 0; b < p; ++b) nb.q(a, b) = q(ja, arcs_[nb.arc_ids[b]].from);
      }
      if (p > 0) {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(nb.q, Eigen::EigenvaluesOnly);
        lmax = std::max(lmax, es.eigenvalues().maxCoeff());
      }
      constant_ += spec.gram_data.col_sq(k);
    }
    if (use_delta)
      for (std::size_t i = 0; i < arcs_.size(); ++i) delta_arc_[i] = std::max(spec.delta(arcs_[i].from), 0.0);
    lipschitz_ = std::max(2.0 * lmax, 1e-12);
  }

  const ProblemSpec& spec() const { return *spec_; }
  const std::vector<Arc>& arcs() const { return arcs_; }
  std::size_t num_arcs() const { return arcs_.size(); }
  int num_nodes() const { return spec_->m(); }
  /// Index of arc (j,k) among the super arcs, or -1.
  int arc_index(int j, int k) const { return index_[j * num_nodes() + k]; }
  double delta_arc(std::size_t i) const { return delta_arc_[i]; }
  double lipschitz() const { return lipschitz_; }
  double big_m() const { return spec_->big_m; }
  double lambda() const { return spec_->penalty.lambda_n; }
  Mode mode() const { return spec_->mode; }

  /// Smooth part f(β) = ‖X − XB‖² + mu‖β‖² − Σ δ_j β_jk².
  double smooth_value(const Eigen::VectorXd& beta) const {
    double v = constant_;
    Eigen::VectorXd b;
    for (const NodeBlock& nb : nodes_) {
      gather(nb, beta, b);
      v += b.dot(nb.q * b) - 2.0 * b.dot(nb.gk);
    }
    return v;
  }

  void smooth_gradient(const Eigen::VectorXd& beta, Eigen::VectorXd& grad) const {
    grad.resize(beta.size());
    Eigen::VectorXd b;
    for (const NodeBlock& nb : nodes_) {
      gather(nb, beta, b);
      const Eigen::VectorXd gb = 2.0 * (nb.q * b - nb.gk);
      for (std::size_t a = 0; a < nb.arc_ids.size(); ++a) grad(nb.arc_ids[a]) = gb(static_cast<Eigen::Index>(a));
    }
  }

 private:
  struct NodeBlock {
    std::vector<int> arc_ids;
    Eigen::MatrixXd q;   ///< Q restricted to the candidate parents
    Eigen::VectorXd gk;  ///< G_{P,k}
  };

  static void gather(const NodeBlock& nb, const Eigen::VectorXd& beta, Eigen::VectorXd& b) {
    b.resize(static_cast<Eigen::Index>(nb.arc_ids.size()));
    for (std::size_t a = 0; a < nb.arc_ids.size(); ++a) b(static_cast<Eigen::Index>(a)) = beta(nb.arc_ids[a]);
  }

  const ProblemSpec* spec_;
  std::vector<Arc> arcs_;
  std::vector<int> index_;
  std::vector<NodeBlock> nodes_;
  std::vector<double> delta_arc_;
  double lipschitz_ = 1.0;
  double constant_ = 0.0;
};

namespace detail {

/// Separable per-arc penalty Ψ(t) of the scaled coefficient t = β/g on
/// [−M, M]: zero (big-M), δt² (perspective) or δ·max(0, max_i 2β̄_i t − β̄_i²)
/// (perspective cuts; `bars` sorted and containing 0).
struct ArcPsi {
  enum Kind { zero, quad, pwl } kind = zero;
  double delta = 0.0;
  const std::vector<double>* bars = nullptr;

  double value(double t) const {
    switch (kind) {
      case zero: return 0.0;
      case quad: return delta * t * t;
      case pwl: {
        double q = 0.0;
        for (double b : *bars) q = std::max(q, 2.0 * b * t - b * b);
        return delta * q;
      }
    }
    return 0.0;
  }
};

struct PsiMin {
  double t = 0.0;
  double psi = 0.0;
};

/// argmin over |t| ≤ M of Ψ(t) + a t²/2 − b t, a ≥ 0.
inline PsiMin psi_min(const ArcPsi& psi, double a, double b, double big_m) {
  auto clamp = [big_m](double t) { return std::clamp(t, -big_m, big_m); };
  switch (psi.kind) {
    case ArcPsi::zero: {
      double t;
      if (a > 0.0) t = clamp(b / a);
      else t = b > 0.0 ? big_m : (b < 0.0 ? -big_m : 0.0);
      return {t, 0.0};
    }
    case ArcPsi::quad: {
      const double den = 2.0 * psi.delta + a;
      double t;
      if (den > 0.0) t = clamp(b / den);
      else t = b > 0.0 ? big_m : (b < 0.0 ? -big_m : 0.0);
      return {t, psi.delta * t * t};
    }
    case ArcPsi::pwl: {
      const auto& bars = *psi.bars;
      const std::size_t n = bars.size();
      PsiMin best{0.0, 0.0};
      double best_obj = std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < n; ++i) {
        // Tangent i is the active envelope piece between neighbouring midpoints.
        const double lo = i == 0 ? -big_m : std::max(-big_m, 0.5 * (bars[i - 1] + bars[i]));
        const double hi = i + 1 == n ? big_m : std::min(big_m, 0.5 * (bars[i] + bars[i + 1]));
        if (lo > hi) continue;
        const double slope = 2.0 * psi.delta * bars[i];
        double t;
        if (a > 0.0) t = std::clamp((b - slope) / a, lo, hi);
        else t = slope - b > 0.0 ? lo : hi;
        const double piece = psi.delta * (2.0 * bars[i] * t - bars[i] * bars[i]);
        const double obj = piece + 0.5 * a * t * t - b * t;
        if (obj < best_obj) {
          best_obj = obj;
          best = {t, std::max(piece, 0.0)};
        }
      }
      return best;
    }
  }
  return {};
}

/// Prox of g·Ψ(β/g) + lam·g + box on g with steps (tb, 1/inv_tg):
/// argmin (β − β0)²/(2tb) + (g − g0)²·inv_tg/2 + gΨ(β/g) + lam·g, g ∈ [lo, hi], |β| ≤ M g.
inline std::pair<double, double> prox_arc(const ArcPsi& psi, double beta0, double g0, double tb,
                                          double inv_tg, double lam, double lo, double hi, double big_m) {
  const double b = beta0 / tb;
  auto at = [&](double g) { return psi_min(psi, g / tb, b, big_m); };
  auto deriv = [&](double g, const PsiMin& s) {
    return s.psi + s.t * (g * s.t - beta0) / tb + lam + (g - g0) * inv_tg;
  };
  if (lo == hi) {
    if (lo == 0.0) return {0.0, 0.0};
    const PsiMin s = at(lo);
    return {lo * s.t, lo};
  }
  PsiMin s_lo = at(lo);
  if (deriv(lo, s_lo) >= 0.0) return {lo * s_lo.t, lo};
  PsiMin s_hi = at(hi);
  if (deriv(hi, s_hi) <= 0.0) return {hi * s_hi.t, hi};
  // Illinois regula falsi on the monotone envelope derivative.
  double l = lo, h = hi;
  double dl = deriv(lo, s_lo), dh = deriv(hi, s_hi);
  int side = 0;
  double g = 0.5 * (l + h);
  PsiMin sg = s_lo;
  for (int it = 0; it < 200; ++it) {
    g = (l * dh - h * dl) / (dh - dl);
    if (!(g > l && g < h)) g = 0.5 * (l + h);
    sg = at(g);
    const double d = deriv(g, sg);
    if (d > 0.0) {
      h = g;
      dh = d;
      if (side == 1) dl *= 0.5;
      side = 1;
    } else {
      l = g;
      dl = d;
      if (side == -1) dh *= 0.5;
      side = -1;
    }
    if (h - l <= 1e-14 * (1.0 + h) || d == 0.0) break;
  }
  return {g * sg.t, g};
}

/// Sparse linear row Σ coef·x ≤ rhs over the (g, z, ψ) coordinates.
struct Row {
  std::vector<std::pair<int, double>> coef;
  double rhs = 0.0;
};

}  // namespace detail

/// Number of LN rows for `num_arcs` arcs: g ≤ z, layering, and z_jk + z_kj ≤ 1.
inline std::size_t ln_row_count(std::size_t num_arcs) { return num_arcs + num_arcs + num_arcs / 2; }

/// Continuous relaxation of the node, solved by accelerated proximal
/// gradient (adaptive restart) with an augmented Lagrangian on the linear
/// rows. The lower bound is certified for any iterate: convexity of f gives
/// f(β) ≥ f(β̄) + ∇f(β̄)ᵀ(β − β̄), and with multipliers ν ≥ 0 on the rows the
/// remaining Lagrangian separates per arc into min over g ∈ {lo, hi} of
/// g·(min_t Ψ(t) + c t + λ + (Rᵀν)_g), evaluated exactly.
inline RelaxResult solve_relaxation(const RelaxModel& model, const NodeConstraints& node,
                                    const RelaxOptions& opt = {}, const RelaxResult* warm = nullptr) {
  using detail::ArcPsi;
  const std::size_t na = model.num_arcs();
  const int m = model.num_nodes();
  const auto nai = static_cast<Eigen::Index>(na);
  const double big_m = model.big_m();
  const double lam = model.lambda();
  if (node.g_lo.size() != na || node.g_hi.size() != na)
    throw std::invalid_argument("solve_relaxation: node bounds do not match the super arcs");
  if (model.mode() == Mode::perspcut && node.persp_cuts.size() != na)
    throw std::invalid_argument("solve_relaxation: perspective cut lists do not match the super arcs");

  RelaxResult res;

  // Per-arc penalty kinds.
  std::vector<ArcPsi> psi(na);
  for (std::size_t i = 0; i < na; ++i) {
    const double d = model.delta_arc(i);
    if (d > 0.0 && model.mode() == Mode::persp) psi[i] = {ArcPsi::quad, d, nullptr};
    else if (d > 0.0 && model.mode() == Mode::perspcut) psi[i] = {ArcPsi::pwl, d, &node.persp_cuts[i]};
  }

  // Rows over y = (g [na], z [na], ψ [m]).
  const bool ln = node.ln_state.has_value();
  const Eigen::Index nw = ln ? nai + m : 0;
  std::vector<detail::Row> rows;
  std::vector<int> row_cut_id;  // pool id for cycle rows, -1 for LN rows
  for (const CycleCut& cc : node.cycle_cuts) {
    detail::Row r;
    for (const Arc& a : cc.cycle) {
      const int i = model.arc_index(a.from, a.to);
      if (i < 0) throw std::invalid_argument("solve_relaxation: cycle cut uses a non-super arc");
      r.coef.push_back({i, 1.0});
    }
    r.rhs = static_cast<double>(cc.cycle.size()) - 1.0;
    rows.push_back(std::move(r));
    row_cut_id.push_back(cc.id);
  }
  const std::size_t first_ln_row = rows.size();
  if (ln) {
    for (std::size_t i = 0; i < na; ++i)
      rows.push_back({{{static_cast<int>(i), 1.0}, {static_cast<int>(na + i), -1.0}}, 0.0});
    for (std::size_t i = 0; i < na; ++i) {
      const Arc& a = model.arcs()[i];
      const int rev = model.arc_index(a.to, a.from);
      const int zi = static_cast<int>(na + i), zr = static_cast<int>(na) + rev;
      const int pj = static_cast<int>(2 * na) + a.from, pk = static_cast<int>(2 * na) + a.to;
      rows.push_back({{{zi, 1.0}, {zr, -(m - 1.0)}, {pk, -(m - 1.0)}, {pj, m - 1.0}}, 0.0});
    }
    for (std::size_t i = 0; i < na; ++i) {
      const Arc& a = model.arcs()[i];
      if (a.from > a.to) continue;
      const int rev = model.arc_index(a.to, a.from);
      rows.push_back({{{static_cast<int>(na + i), 1.0}, {static_cast<int>(na) + rev, 1.0}}, 1.0});
    }
    row_cut_id.resize(rows.size(), -1);
  }
  const std::size_t nr = rows.size();
  // Unit rows keep the layered rows, with coefficients up to m − 1, from dictating the step.
  for (auto& r : rows) {
    double s = 0.0;
    for (const auto& [c, v] : r.coef) s += v * v;
    s = std::sqrt(s);
    for (auto& cv : r.coef) cv.second /= s;
    r.rhs /= s;
  }

  // Box on (g, w).
  Eigen::VectorXd ylo(nai + nw), yhi(nai + nw);
  for (std::size_t i = 0; i < na; ++i) {
    ylo(static_cast<Eigen::Index>(i)) = node.g_lo[i];
    yhi(static_cast<Eigen::Index>(i)) = node.g_hi[i];
  }
  if (ln) {
    for (std::size_t i = 0; i < na; ++i) {
      ylo(nai + static_cast<Eigen::Index>(i)) = node.ln_state->z_lo[i];
      yhi(nai + static_cast<Eigen::Index>(i)) = node.ln_state->z_hi[i];
    }
    for (int v = 0; v < m; ++v) {
      ylo(2 * nai + v) = 0.0;
      yhi(2 * nai + v) = 1.0;
    }
  }

  // Quick infeasibility: a row whose minimum over the box exceeds rhs.
  for (const auto& r : rows) {
    double mn = 0.0;
    for (const auto& [c, v] : r.coef) mn += v > 0 ? v * ylo(c) : v * yhi(c);
    if (mn > r.rhs + 1e-9) {
      res.status = RelaxStatus::infeasible;
      res.certified_lb = std::numeric_limits<double>::infinity();
      return res;
    }
  }

  // ‖R‖₂² ≤ ‖R‖₁‖R‖∞.
  double rnorm2 = 0.0;
  if (nr > 0) {
    Eigen::VectorXd colsum = Eigen::VectorXd::Zero(nai + nw);
    double rowmax = 0.0;
    for (const auto& r : rows) {
      double s = 0.0;
      for (const auto& [c, v] : r.coef) {
        s += std::abs(v);
        colsum(c) += std::abs(v);
      }
      rowmax = std::max(rowmax, s);
    }
    rnorm2 = rowmax * colsum.maxCoeff();
  }

  auto row_values = [&](const Eigen::VectorXd& y, Eigen::VectorXd& out) {
    out.resize(static_cast<Eigen::Index>(nr));
    for (std::size_t r = 0; r < nr; ++r) {
      double s = -rows[r].rhs;
      for (const auto& [c, v] : rows[r].coef) s += v * y(c);
      out(static_cast<Eigen::Index>(r)) = s;
    }
  };
  auto rows_transpose = [&](const Eigen::VectorXd& nu, Eigen::VectorXd& out) {
    out = Eigen::VectorXd::Zero(nai + nw);
    for (std::size_t r = 0; r < nr; ++r) {
      const double s = nu(static_cast<Eigen::Index>(r));
      if (s == 0.0) continue;
      for (const auto& [c, v] : rows[r].coef) out(c) += v * s;
    }
  };

  // Starting point.
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(nai);
  Eigen::VectorXd y = ylo;  // (g, w)
  Eigen::VectorXd nu = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(nr));
  if (warm && warm->beta.size() == nai && warm->g.size() == nai) {
    for (Eigen::Index i = 0; i < nai; ++i) {
      const double g = std::clamp(warm->g(i), ylo(i), yhi(i));
      y(i) = g;
      beta(i) = std::clamp(warm->beta(i), -big_m * g, big_m * g);
    }
    if (ln && warm->w.size() == nw)
      for (Eigen::Index i = 0; i < nw; ++i) y(nai + i) = std::clamp(warm->w(i), ylo(nai + i), yhi(nai + i));
    for (std::size_t r = 0; r < nr; ++r) {
      if (row_cut_id[r] >= 0) {
        auto it = warm->cut_duals.find(row_cut_id[r]);
        if (it != warm->cut_duals.end()) nu(static_cast<Eigen::Index>(r)) = it->second;
      } else if (warm->ln_duals.size() == static_cast<Eigen::Index>(nr - first_ln_row)) {
        nu(static_cast<Eigen::Index>(r)) = warm->ln_duals(static_cast<Eigen::Index>(r - first_ln_row));
      }
    }
  }

  const double tb = 1.0 / model.lipschitz();
  double rho = 5.0 * std::max(1.0, lam);
  const double rho_max = 100.0 * rho;  // a larger penalty starves the (g, w) step
  auto gw_step = [&]() { return nr > 0 ? 1.0 / (rho * std::max(rnorm2, 1e-12)) : 0.0; };
  double tgw = gw_step();

  Eigen::VectorXd grad, gw_grad, rv, rt, tmp;
  auto objective = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& yy) {
    double v = model.smooth_value(b);
    for (std::size_t i = 0; i < na; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const double g = yy(ii);
      if (g > 0.0) v += g * psi[i].value(b(ii) / g);
      v += lam * g;
    }
    return v;
  };

  // Certified bound at linearization point b with multipliers nu_c ≥ 0.
  auto lower_bound = [&](const Eigen::VectorXd& b, const Eigen::VectorXd& nu_c) {
    model.smooth_gradient(b, tmp);
    double lb = model.smooth_value(b) - tmp.dot(b);
    Eigen::VectorXd rtn;
    if (nr > 0) rows_transpose(nu_c, rtn);
    for (std::size_t i = 0; i < na; ++i) {
      const auto ii = static_cast<Eigen::Index>(i);
      const detail::PsiMin s = detail::psi_min(psi[i], 0.0, -tmp(ii), big_m);
      double kappa = s.psi + tmp(ii) * s.t + lam;
      if (nr > 0) kappa += rtn(ii);
      lb += std::min(ylo(ii) * kappa, yhi(ii) * kappa);
    }
    for (Eigen::Index i = 0; i < nw; ++i) {
      const double c = rtn(nai + i);
      lb += std::min(ylo(nai + i) * c, yhi(nai + i) * c);
    }
    for (std::size_t r = 0; r < nr; ++r) lb -= rows[r].rhs * nu_c(static_cast<Eigen::Index>(r));
    return lb;
  };

  Eigen::VectorXd beta_prev = beta, y_prev = y;
  Eigen::VectorXd zb = beta, zy = y;  // extrapolated points
  double theta = 1.0;
  double best_lb = -std::numeric_limits<double>::infinity();
  double last_viol = std::numeric_limits<double>::infinity();
  // Multipliers move once the inner iterate settles, or every 200 iterations.
  // The layered rows couple many variables and need a tighter inner solve.
  const int alm_period = 200;
  const double alm_tol = ln ? 1e-4 : 1e-2;
  int since_alm = 0;
  bool converged = false;
  int it = 0;
  double pv = std::numeric_limits<double>::infinity(), viol = 0.0, resid = 0.0;

  auto evaluate = [&]() {
    pv = objective(beta, y);
    viol = 0.0;
    if (nr > 0) {
      row_values(y, rv);
      viol = std::max(0.0, rv.maxCoeff());
    }
    double lb = lower_bound(beta, nu);
    if (nr > 0) {
      const Eigen::VectorXd nu_t = (nu + rho * rv).cwiseMax(0.0);
      lb = std::max(lb, lower_bound(beta, nu_t));
    }
    best_lb = std::max(best_lb, lb);
  };

  for (it = 1; it <= opt.max_iter; ++it) {
    // Gradient step at the extrapolated point.
    model.smooth_gradient(zb, grad);
    Eigen::VectorXd g0 = zy;
    if (nr > 0) {
      row_values(zy, rv);
      const Eigen::VectorXd s = (rv + nu / rho).cwiseMax(0.0);
      rows_transpose(rho * s, gw_grad);
      g0 = zy - tgw * gw_grad;
    }
    const double inv_tg = nr > 0 ? 1.0 / tgw : 0.0;
    Eigen::VectorXd nb(nai), ny(nai + nw);
    for (Eigen::Index i = 0; i < nai; ++i) {
      const auto [b1, g1] = detail::prox_arc(psi[static_cast<std::size_t>(i)], zb(i) - tb * grad(i), g0(i), tb,
                                             inv_tg, lam, ylo(i), yhi(i), big_m);
      nb(i) = b1;
      ny(i) = g1;
    }
    for (Eigen::Index i = nai; i < nai + nw; ++i) ny(i) = std::clamp(g0(i), ylo(i), yhi(i));

    // Scaled prox-gradient residual and restart test.
    const Eigen::VectorXd db = zb - nb;
    Eigen::VectorXd dy = zy - ny;
    if (nr == 0) dy.setZero();
    resid = std::sqrt(db.squaredNorm() / (tb * tb) + (nr > 0 ? dy.squaredNorm() / (tgw * tgw) : 0.0));
    const double restart_dot = db.dot(nb - beta) / tb + (nr > 0 ? dy.dot(ny - y) / tgw : 0.0);

    beta_prev = beta;
    y_prev = y;
    beta = nb;
    y = ny;
    if (restart_dot > 0.0) {
      theta = 1.0;
      zb = beta;
      zy = y;
    } else {
      const double theta_next = 0.5 * (1.0 + std::sqrt(1.0 + 4.0 * theta * theta));
      const double mom = (theta - 1.0) / theta_next;
      zb = beta + mom * (beta - beta_prev);
      zy = nr > 0 ? Eigen::VectorXd(y + mom * (y - y_prev)) : y;
      // Keep the extrapolated point inside the box so the gradient is taken where f is defined.
      for (Eigen::Index i = 0; i < nai + nw; ++i) zy(i) = std::clamp(zy(i), ylo(i), yhi(i));
      theta = theta_next;
    }

    if (it % opt.check_every == 0 || it == opt.max_iter) {
      evaluate();
      const double gap = pv - best_lb;
      if ((viol <= opt.feas_tol && gap <= opt.tol * (1.0 + std::abs(pv))) || best_lb >= opt.cutoff) {
        converged = true;
        break;
      }
    }

    if (nr > 0 && (++since_alm >= alm_period || (since_alm >= 5 && resid <= alm_tol))) {
      since_alm = 0;
      row_values(y, rv);
      const double v = std::max(0.0, rv.maxCoeff());
      nu = (nu + rho * rv).cwiseMax(0.0);
      if (v > opt.feas_tol && v > 0.25 * last_viol) {
        rho = std::min(rho * 5.0, rho_max);
        tgw = gw_step();
      }
      last_viol = v;
      theta = 1.0;
      zb = beta;
      zy = y;
    }
  }
  if (!converged) evaluate();

  res.status = converged ? RelaxStatus::optimal : RelaxStatus::failure;
  res.iterations = std::min(it, opt.max_iter);
  res.beta = beta;
  res.g = y.head(nai);
  res.w = y.tail(nw);
  res.primal_value = pv;
  res.certified_lb = std::min(best_lb, pv);
  res.violation = viol;
  res.kkt_residual = resid;
  for (std::size_t r = 0; r < nr; ++r) {
    if (row_cut_id[r] >= 0) res.cut_duals[row_cut_id[r]] = nu(static_cast<Eigen::Index>(r));
  }
  if (ln) res.ln_duals = nu.tail(static_cast<Eigen::Index>(nr - first_ln_row));
  res.integral = true;
  for (std::size_t i = 0; i < na; ++i) {
    if (node.is_fixed(i)) continue;
    const double g = res.g(static_cast<Eigen::Index>(i));
    if (std::min(g, 1.0 - g) > opt.int_tol) {
      res.integral = false;
      break;
    }
  }
  return res;
}

/// Convenience overload building the model on the fly.
inline RelaxResult solve_relaxation(const ProblemSpec& spec, const NodeConstraints& node, double tol = 1e-6) {
  const RelaxModel model(spec);
  RelaxOptions opt;
  opt.tol = tol;
  return solve_relaxation(model, node, opt);
}

/// Tangent v ≥ 2β̄β − β̄²g of the perspective β²/g.
struct PerspectiveCut {
  double beta_bar = 0.0;
  double violation = 0.0;
};

/// Separation at (β, g, v) with β̄ = β/g clamped to [−M, M]; returns the cut
/// only when it is violated by more than 1e-7.
inline std::optional<PerspectiveCut> separate_perspective_cut(double beta_val, double g_val, double v_val,
                                                              double big_m) {
  if (!(g_val > 0.0)) return std::nullopt;
  const double bar = std::clamp(beta_val / g_val, -big_m, big_m);
  const double viol = 2.0 * bar * beta_val - bar * bar * g_val - v_val;
  if (viol > 1e-7) return PerspectiveCut{bar, viol};
  return std::nullopt;
}

/// One separation round over all arcs of a perspcut relaxation point; the
/// implied v is g·q(β/g) under the node's current tangents. Returns the
/// number of cuts added to `node`.
inline int add_perspective_cuts(const RelaxModel& model, NodeConstraints& node, const RelaxResult& r) {
  int added = 0;
  const double big_m = model.big_m();
  for (std::size_t i = 0; i < model.num_arcs(); ++i) {
    if (model.delta_arc(i) <= 0.0) continue;
    const auto ii = static_cast<Eigen::Index>(i);
    const double g = r.g(ii), b = r.beta(ii);
    if (!(g > 0.0)) continue;
    const detail::ArcPsi unit{detail::ArcPsi::pwl, 1.0, &node.persp_cuts[i]};
    const double v = g * unit.value(b / g);
    if (auto cut = separate_perspective_cut(b, g, v, big_m))
      if (node.add_persp_cut(i, cut->beta_bar)) ++added;
  }
  return added;
}

/// Relaxation point as arc weights (zeros dropped).
inline ArcWeights to_arc_weights(const RelaxModel& model, const Eigen::VectorXd& beta) {
  ArcWeights out;
  for (std::size_t i = 0; i < model.num_arcs(); ++i)
    if (beta(static_cast<Eigen::Index>(i)) != 0.0) out[model.arcs()[i]] = beta(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace dagopt
