#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "dagopt/datagen.hpp"
#include "dagopt/rng.hpp"
#include "dagopt/score.hpp"
#include "support.hpp"

using namespace dagopt;

TEST(Rng, StreamsAreReproducibleAndDistinct) {
  auto a = Xoshiro256::stream(7, 0), b = Xoshiro256::stream(7, 0), c = Xoshiro256::stream(7, 1);
  bool differs = false;
  for (int i = 0; i < 16; ++i) {
    const auto x = a.next();
    EXPECT_EQ(x, b.next());
    differs = differs || x != c.next();
  }
  EXPECT_TRUE(differs);
}

TEST(Rng, UniformIntInRangeAndNormalMoments) {
  Xoshiro256 r(11);
  for (int i = 0; i < 1000; ++i) EXPECT_LT(r.uniform_int(7), 7u);
  const int n = 200000;
  double s = 0.0, s2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = r.normal();
    s += z;
    s2 += z * z;
  }
  EXPECT_NEAR(s / n, 0.0, 0.02);
  EXPECT_NEAR(s2 / n, 1.0, 0.02);
}

TEST(Datagen, ForcedArcAtTwoNodes) {
  GenConfig cfg;
  cfg.m = 2;
  cfg.d = 1.0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    cfg.seed = seed;
    auto [dag, beta] = random_dag(cfg);
    ASSERT_EQ(dag.num_arcs(), 1u);
    const double w = beta.begin()->second;
    EXPECT_GE(w, 0.1);
    EXPECT_LE(w, 1.0);
  }
}

TEST(Datagen, SameSeedSameInstance) {
  const auto a = fixture::instance(8, 42), b = fixture::instance(8, 42);
  EXPECT_EQ(a.true_dag, b.true_dag);
  EXPECT_EQ(a.data, b.data);
  EXPECT_EQ(a.moral, moralize(a.true_dag));
}

// Expected arc count C(m,2)·d/(m−1) = m·d/2 = 10 at m = 10, d = 2.
TEST(DatagenProperty, MeanArcCountMatchesBinomial) {
  GenConfig cfg;
  cfg.m = 10;
  cfg.d = 2.0;
  const int seeds = 10000;
  const double p = cfg.d / (cfg.m - 1), pairs = 45.0;
  double sum = 0.0;
  for (int s = 0; s < seeds; ++s) {
    cfg.seed = static_cast<std::uint64_t>(s);
    const auto [dag, beta] = random_dag(cfg);
    ASSERT_TRUE(is_acyclic(dag));
    sum += static_cast<double>(dag.num_arcs());
  }
  const double se = std::sqrt(pairs * p * (1 - p) / seeds);
  EXPECT_NEAR(sum / seeds, 10.0, 3.0 * se);
}

// For X1 = w X0 + e, Var(X1) = w² + 1 and Cov(X0, X1) = w.
TEST(DatagenProperty, SemSecondMoments) {
  DirectedGraph dag(2, {{0, 1}});
  ArcWeights beta{{Arc{0, 1}, 0.8}};
  auto rng = Xoshiro256::stream(3, 1);
  const int n = 200000;
  const Eigen::MatrixXd x = sample_sem(dag, beta, n, 1.0, rng);
  const Eigen::MatrixXd cov = x.transpose() * x / n;
  EXPECT_NEAR(cov(0, 0), 1.0, 0.02);
  EXPECT_NEAR(cov(0, 1), 0.8, 0.02);
  EXPECT_NEAR(cov(1, 1), 1.64, 0.03);
}

TEST(Datagen, ZeroNoiseGivesZeroData) {
  DirectedGraph dag(3, {{0, 1}});
  auto rng = Xoshiro256::stream(1, 1);
  EXPECT_TRUE(sample_sem(dag, {{Arc{0, 1}, 0.5}}, 5, 0.0, rng).isZero());
}

TEST(Datagen, RejectsBadConfig) {
  GenConfig cfg;
  cfg.weight_low = 0.0;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
  cfg = GenConfig{};
  cfg.m = 1;
  EXPECT_THROW(cfg.validate(), std::invalid_argument);
}

namespace {

GramData handmade() {
  Eigen::MatrixXd x(4, 2);
  x << 1, 2, -1, -2, 2, 4, 0, 0;
  return GramData(x);
}

}  // namespace

TEST(Score, HandExamples) {
  const GramData gd = handmade();
  const Penalty pen{1.0, 0.0};
  EXPECT_DOUBLE_EQ(score({{Arc{0, 1}, 2.0}}, {Arc{0, 1}}, gd, pen), 7.0);
  EXPECT_DOUBLE_EQ(score({}, {}, gd, pen), 30.0);
}

TEST(Score, RejectsOffSupportAndRange) {
  const GramData gd = handmade();
  EXPECT_THROW(score({{Arc{0, 1}, 1.0}}, {}, gd, {}), std::invalid_argument);
  EXPECT_THROW(score({}, {Arc{0, 5}}, gd, {}), std::out_of_range);
}

TEST(Score, OlsExactFit) {
  const GramData gd = handmade();
  const auto r = ols(1, {0}, gd, 0.0);
  EXPECT_NEAR(r.beta(0), 2.0, 1e-12);
  EXPECT_NEAR(r.rss, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(ols(0, {}, gd, 0.0).rss, 6.0);
  EXPECT_THROW(ols(0, {0}, gd, 0.0), std::invalid_argument);
}

TEST(Score, OlsSingularIsMinimumNorm) {
  Eigen::MatrixXd x(5, 3);
  x << 1, 1, 2, 2, 2, 4, -1, -1, -2, 0, 0, 0, 3, 3, 6;
  const GramData gd(x);
  const auto r = ols(2, {0, 1}, gd, 0.0);
  EXPECT_TRUE(r.degenerate);
  EXPECT_NEAR(r.beta(0), 1.0, 1e-9);
  EXPECT_NEAR(r.beta(1), 1.0, 1e-9);
  EXPECT_NEAR(r.rss, 0.0, 1e-9);
}

TEST(Score, BicLambda) {
  EXPECT_NEAR(bic_lambda(100), 4.60517, 1e-5);
  EXPECT_NEAR(4.0 * bic_lambda(100), 18.42, 1e-2);
  EXPECT_THROW(bic_lambda(1), std::invalid_argument);
}

TEST(ScoreProperty, RefitDecomposesIntoNodeTerms) {
  const auto inst = fixture::instance(6, 5);
  const GramData gd(inst.data);
  const Penalty pen{bic_lambda(100), 0.0};
  const Refit r = refit_dag(inst.true_dag, gd, pen);
  const std::vector<Arc> supp(inst.true_dag.arcs().begin(), inst.true_dag.arcs().end());
  EXPECT_NEAR(score(r.beta, supp, gd, pen), r.score, 1e-8 * r.score);
  // Residuals recomputed from raw data.
  Eigen::MatrixXd b = Eigen::MatrixXd::Zero(6, 6);
  for (const auto& [a, w] : r.beta) b(a.from, a.to) = w;
  const double direct = (inst.data - inst.data * b).squaredNorm() + pen.lambda_n * supp.size();
  EXPECT_NEAR(direct, r.score, 1e-8 * r.score);
  std::vector<Arc> reversed(supp.rbegin(), supp.rend());
  EXPECT_DOUBLE_EQ(score(r.beta, reversed, gd, pen), score(r.beta, supp, gd, pen));
}

// The incremental-Cholesky enumeration against independent per-subset OLS, and rss monotonicity.
TEST(ScoreProperty, SubsetEnumerationMatchesOls) {
  const auto inst = fixture::instance(5, 9);
  const GramData gd(inst.data);
  for (int k = 0; k < 5; ++k) {
    std::vector<int> cand;
    for (int j = 0; j < 5; ++j)
      if (j != k) cand.push_back(j);
    std::vector<double> rss(16, -1.0);
    int visits = 0;
    for_each_parent_subset(k, cand, gd, 0.0, [&](std::uint32_t mask, double v) {
      rss[mask] = v;
      ++visits;
      std::vector<int> parents;
      for (int i = 0; i < 4; ++i)
        if (mask & (1u << i)) parents.push_back(cand[i]);
      EXPECT_NEAR(v, ols(k, parents, gd, 0.0).rss, 1e-8 * (1.0 + v));
      return true;
    });
    EXPECT_EQ(visits, 16);
    for (std::uint32_t a = 0; a < 16; ++a)
      for (std::uint32_t b = 0; b < 16; ++b)
        if ((a & b) == a) EXPECT_LE(rss[b], rss[a] + 1e-9);
  }
}

TEST(ScoreProperty, RidgeShrinksCoefficients) {
  const auto inst = fixture::instance(6, 2);
  const GramData gd(inst.data);
  const double l = bic_lambda(100);
  for (int k = 0; k < 6; ++k) {
    std::vector<int> parents;
    for (int j = 0; j < 6; ++j)
      if (j != k) parents.push_back(j);
    const double n0 = ols(k, parents, gd, 0.0).beta.norm();
    const double n1 = ols(k, parents, gd, l).beta.norm();
    const double n2 = ols(k, parents, gd, 2 * l).beta.norm();
    EXPECT_LE(n1, n0 + 1e-12);
    EXPECT_LE(n2, n1 + 1e-12);
  }
}

TEST(Score, LocalScoreCacheMatchesOls) {
  const auto inst = fixture::instance(5, 1);
  const GramData gd(inst.data);
  LocalScoreCache cache(gd, 0.0);
  const auto e1 = cache.get(3, {2, 0});
  const auto e2 = cache.get(3, {0, 2});
  EXPECT_EQ(cache.size(), 1u);
  EXPECT_DOUBLE_EQ(e1.rss, e2.rss);
  EXPECT_NEAR(e1.rss, ols(3, {0, 2}, gd, 0.0).rss, 1e-12);
}

TEST(Score, GramRejectsNonFinite) {
  Eigen::MatrixXd x = Eigen::MatrixXd::Ones(3, 2);
  x(1, 1) = std::nan("");
  EXPECT_THROW(GramData{x}, std::invalid_argument);
}
