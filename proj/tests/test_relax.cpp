#include <gtest/gtest.h>

#include <cmath>
#include <memory>

#include "dagopt/relax.hpp"
#include "support.hpp"

using namespace dagopt;

namespace {

double rel_tol(double v, double t) { return t * (1.0 + std::abs(v)); }

/// Arc 0→1 with δ_0 = 1, λ = 4, G = [[11, 12], [12, 20]]; the reverse arc is
/// fixed off. The relaxed optimum has β = 1 and g = |β|√(δ/λ) = 1/2.
ProblemSpec single_arc_spec() {
  Eigen::Matrix2d g;
  g << 11, 12, 12, 20;
  const Eigen::Matrix2d x = g.llt().matrixU();
  ProblemSpec spec;
  spec.gram_data = GramData(Eigen::MatrixXd(x));
  spec.super_arcs = {Arc{0, 1}, Arc{1, 0}};
  spec.penalty = Penalty{4.0, 0.0};
  spec.big_m = 10.0;
  spec.delta = Eigen::Vector2d(1.0, 0.0);
  spec.mode = Mode::persp;
  return spec;
}

}  // namespace

TEST(Relax, AllFixedZeroIsExact) {
  const auto inst = fixture::instance(5, 1);
  const auto spec = fixture::problem(inst, true);
  auto nc = NodeConstraints::root(spec);
  std::fill(nc.g_hi.begin(), nc.g_hi.end(), 0.0);
  const auto r = solve_relaxation(spec, nc);
  ASSERT_EQ(r.status, RelaxStatus::optimal);
  EXPECT_TRUE(r.beta.isZero(0.0));
  EXPECT_NEAR(r.primal_value, spec.gram_data.col_sq.sum(), 1e-9);
  EXPECT_NEAR(r.certified_lb, r.primal_value, 1e-9);
}

TEST(Relax, SingleArcClosedForm) {
  const auto spec = single_arc_spec();
  auto nc = NodeConstraints::root(spec);
  nc.g_hi[1] = 0.0;  // sorted arcs: 0→1, 1→0
  const auto r = solve_relaxation(spec, nc, 1e-10);
  ASSERT_EQ(r.status, RelaxStatus::optimal);
  EXPECT_EQ(r.beta(1), 0.0);
  EXPECT_NEAR(r.beta(0), 1.0, 1e-4);
  EXPECT_NEAR(r.g(0), 0.5, 1e-4);
  const double penalty = spec.delta(0) * r.beta(0) * r.beta(0) / r.g(0) + 4.0 * r.g(0);
  EXPECT_NEAR(penalty, 4.0, 1e-4);
  // ‖x_0‖² + f(β) with f(β) = 20 − 24β + 10β² + 2√(δλ)|β|, at β = 1.
  EXPECT_NEAR(r.primal_value, 11.0 + 20.0 - 24.0 + 10.0 + 4.0, 1e-6);
}

// Relaxed big-M equals ℓ1 with λ/M whenever M dominates the fit.
TEST(RelaxProperty, BigMRootIsLasso) {
  for (std::uint64_t seed = 0; seed < 4; ++seed) {
    const auto inst = fixture::instance(6, seed);
    const auto spec = fixture::problem(inst, seed % 2 == 0, Mode::bigm);
    const auto r = solve_relaxation(spec, NodeConstraints::root(spec), 1e-9);
    const double lasso =
        fixture::lasso_value(spec.gram_data, spec.super_arcs, spec.penalty.lambda_n / spec.big_m, spec.big_m);
    EXPECT_NEAR(r.primal_value, lasso, 1e-5 * lasso);
  }
}

TEST(RelaxProperty, BigMBoxHolds) {
  const auto inst = fixture::instance(7, 3);
  const auto spec = fixture::problem(inst, true, Mode::bigm);
  const auto r = solve_relaxation(spec, NodeConstraints::root(spec));
  for (Eigen::Index i = 0; i < r.beta.size(); ++i) EXPECT_LE(std::abs(r.beta(i)), spec.big_m * r.g(i) + 1e-8);
}

TEST(RelaxProperty, CertifiedBoundBelowTightPrimal) {
  for (Mode mode : {Mode::bigm, Mode::persp}) {
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      const auto inst = fixture::instance(6, seed);
      const auto spec = fixture::problem(inst, true, mode);
      auto nc = NodeConstraints::root(spec);
      // A node with fixings and every 2-cycle cut.
      nc.g_lo[0] = nc.g_hi[0] = 1.0;
      nc.g_hi[3] = 0.0;
      const RelaxModel model(spec);
      for (const Arc& a : model.arcs())
        if (a.from < a.to) nc.cycle_cuts.push_back({static_cast<int>(nc.cycle_cuts.size()), {a, Arc{a.to, a.from}}});
      RelaxOptions loose, tight;
      tight.tol = 1e-9;
      tight.feas_tol = 1e-9;
      tight.max_iter = 200000;
      const auto a = solve_relaxation(model, nc, loose);
      const auto b = solve_relaxation(model, nc, tight);
      ASSERT_EQ(a.status, RelaxStatus::optimal);
      ASSERT_EQ(b.status, RelaxStatus::optimal);
      EXPECT_LE(a.certified_lb, b.primal_value + rel_tol(b.primal_value, 1e-9));
      EXPECT_LE(a.certified_lb, a.primal_value + rel_tol(a.primal_value, 1e-12));
      for (const auto& cut : nc.cycle_cuts) {
        double s = 0.0;
        for (const Arc& arc : cut.cycle) s += a.g(model.arc_index(arc.from, arc.to));
        EXPECT_LE(s, static_cast<double>(cut.cycle.size()) - 1.0 + 1e-6);
      }
    }
  }
}

TEST(RelaxProperty, PerspDominatesBigM) {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto inst = fixture::instance(8, seed);
    const auto p = fixture::problem(inst, true, Mode::persp);
    const auto b = fixture::problem(inst, true, Mode::bigm);
    const double lp = solve_relaxation(p, NodeConstraints::root(p)).certified_lb;
    const double lb = solve_relaxation(b, NodeConstraints::root(b)).certified_lb;
    EXPECT_GE(lp, lb - rel_tol(lb, 1e-8));
  }
}

TEST(RelaxProperty, FixingNeverLowersTheBound) {
  const auto inst = fixture::instance(6, 7);
  const auto spec = fixture::problem(inst, false);
  const RelaxModel model(spec);
  const auto root = NodeConstraints::root(spec);
  const auto parent = solve_relaxation(model, root, RelaxOptions{});
  for (std::size_t i = 0; i < model.num_arcs(); ++i) {
    for (double v : {0.0, 1.0}) {
      auto child = root;
      child.g_lo[i] = child.g_hi[i] = v;
      const auto r = solve_relaxation(model, child, RelaxOptions{});
      ASSERT_EQ(r.status, RelaxStatus::optimal);
      EXPECT_GE(r.primal_value, parent.certified_lb - rel_tol(parent.certified_lb, 1e-9));
      if (v == 0.0) EXPECT_EQ(r.beta(static_cast<Eigen::Index>(i)), 0.0);
      EXPECT_EQ(r.g(static_cast<Eigen::Index>(i)), v);
    }
  }
}

TEST(Relax, ConflictingFixingsAreInfeasible) {
  const auto inst = fixture::instance(4, 2);
  const auto spec = fixture::problem(inst, true);
  const RelaxModel model(spec);
  auto nc = NodeConstraints::root(spec);
  const int a = model.arc_index(0, 1), b = model.arc_index(1, 0);
  nc.g_lo[a] = nc.g_hi[a] = 1.0;
  nc.g_lo[b] = nc.g_hi[b] = 1.0;
  nc.cycle_cuts.push_back({0, {Arc{0, 1}, Arc{1, 0}}});
  EXPECT_EQ(solve_relaxation(model, nc, RelaxOptions{}).status, RelaxStatus::infeasible);
}

TEST(Relax, PerspectiveCutExamples) {
  // β̄ = 1 is tangent at (1, 1).
  EXPECT_FALSE(separate_perspective_cut(1.0, 1.0, 1.0, 5.0));
  const auto cut = separate_perspective_cut(1.0, 0.5, 1.0, 5.0);
  ASSERT_TRUE(cut);
  EXPECT_DOUBLE_EQ(cut->beta_bar, 2.0);
  EXPECT_DOUBLE_EQ(cut->violation, 1.0);
  EXPECT_FALSE(separate_perspective_cut(0.0, 0.3, 0.0, 5.0));
  // Clamped to the big-M range.
  EXPECT_DOUBLE_EQ(separate_perspective_cut(1.0, 0.1, 0.0, 4.0)->beta_bar, 4.0);
}

TEST(RelaxProperty, PerspectiveCutsConvergeToPersp) {
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto inst = fixture::instance(8, seed);
    const auto persp = fixture::problem(inst, true, Mode::persp);
    auto cut = persp;
    cut.mode = Mode::perspcut;
    const double target = solve_relaxation(persp, NodeConstraints::root(persp)).certified_lb;
    const RelaxModel model(cut);
    auto nc = NodeConstraints::root(cut);
    std::shared_ptr<RelaxResult> warm;
    RelaxResult r;
    int rounds = 0;
    for (; rounds < 200; ++rounds) {
      r = solve_relaxation(model, nc, RelaxOptions{}, warm.get());
      warm = std::make_shared<RelaxResult>(r);
      if (add_perspective_cuts(model, nc, r) == 0) break;
    }
    EXPECT_LT(rounds, 200);
    EXPECT_NEAR(r.certified_lb, target, 1e-4 * std::abs(target));
    // Outer approximation: never above the conic bound beyond solver tolerance.
    EXPECT_LE(r.certified_lb, target + rel_tol(target, 1e-5));
  }
}

TEST(RelaxProperty, LayeredEncodingBoundIsValid) {
  const auto inst = fixture::instance(5, 4);
  const auto spec = fixture::problem(inst, true, Mode::persp, Encoding::ln);
  const auto plain = fixture::problem(inst, true, Mode::persp);
  const auto r = solve_relaxation(spec, NodeConstraints::root(spec));
  const auto p = solve_relaxation(plain, NodeConstraints::root(plain));
  ASSERT_EQ(r.status, RelaxStatus::optimal);
  EXPECT_LE(r.certified_lb, r.primal_value + rel_tol(r.primal_value, 1e-12));
  // Extra constraints can only raise the relaxation.
  EXPECT_GE(r.primal_value, p.certified_lb - rel_tol(p.certified_lb, 1e-9));
}
