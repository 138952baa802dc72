#include <gtest/gtest.h>

#include <cmath>

#include "niece/pmd.hpp"
#include "niece/simgen.hpp"
#include "test_util.hpp"

using namespace niece;
using niece::testing::max_sine;

namespace {

VectorXd vec(std::initializer_list<double> xs) {
  VectorXd v(xs.size());
  Index i = 0;
  for (double x : xs) v(i++) = x;
  return v;
}

PmdConfig inactive(Index p) {
  PmdConfig cfg;
  cfg.c = std::sqrt(static_cast<double>(p));
  cfg.rel_tol = 1e-14;
  cfg.v_tol = 1e-10;
  cfg.max_alt_iters = 20000;
  return cfg;
}

}  // namespace

TEST(SoftThreshold, InactiveConstraint) {
  const VectorXd w = vec({3, 1});
  const auto st = soft_threshold_unit<double>(w, std::sqrt(2.0));
  EXPECT_LT((st.v - w / std::sqrt(10.0)).norm(), 1e-15);
}

TEST(SoftThreshold, UnitBudgetIsOneSparse) {
  const auto st = soft_threshold_unit<double>(vec({3, 1}), 1.0);
  EXPECT_NEAR(st.v(0), 1.0, 1e-8);
  EXPECT_NEAR(st.v(1), 0.0, 1e-8);
}

TEST(SoftThreshold, MatchesGridSearch) {
  const VectorXd w = vec({2, 1, 1});
  const double c = 1.3;
  const auto st = soft_threshold_unit<double>(w, c);
  EXPECT_LE(st.v.lpNorm<1>(), c + 1e-8);
  EXPECT_LE(st.v.norm(), 1 + 1e-10);
  // w > 0, so the optimum lies in the positive octant on the face {sum v = c} of the L1
  // ball (the inactive case was ruled out above), cut by the unit L2 ball. Grid the face
  // coarsely, then zoom in around the winner.
  ASSERT_GT((w / w.norm()).lpNorm<1>(), c);
  auto search = [&](double a0, double a1, double b0, double b1, int m, double& ba, double& bb) {
    // The argmax set of a grid is a short chord; keep its midpoint.
    double best = -1, sum = 0;
    int count = 0;
    for (int i = 0; i <= m; ++i) {
      const double a = a0 + (a1 - a0) * i / m;
      for (int j = 0; j <= m; ++j) {
        const double b = b0 + (b1 - b0) * j / m;
        const VectorXd v = vec({a, b, c - a - b});
        if (v.minCoeff() < 0 || v.squaredNorm() > 1) continue;
        const double obj = w.dot(v);
        if (obj > best + 1e-15) {
          best = obj, ba = a, sum = b, count = 1;
        } else if (std::abs(obj - best) <= 1e-15) {
          sum += b, ++count;
        }
      }
    }
    bb = sum / count;
    return best;
  };
  double ba = 0, bb = 0;
  search(0, c, 0, c, 500, ba, bb);
  const double h = c / 500;
  double best = 0;
  for (int zoom = 0; zoom < 8; ++zoom) {
    const double r = 4 * h / std::pow(10.0, zoom);
    best = search(ba - r, ba + r, bb - r, bb + r, 400, ba, bb);
  }
  const VectorXd arg = vec({ba, bb, c - ba - bb});
  EXPECT_NEAR(w.dot(st.v), best, 1e-4);
  EXPECT_LT((st.v - arg).cwiseAbs().maxCoeff(), 1e-4);
}

TEST(SoftThreshold, ZeroInputAndBadBudget) {
  EXPECT_TRUE((soft_threshold_unit<double>(VectorXd::Zero(3), 1.5).zero));
  EXPECT_THROW(soft_threshold_unit<double>(vec({1, 2}), 0.5), PreconditionError);
}

TEST(SoftThreshold, TiedMaximumWithTightBudget) {
  const auto st = soft_threshold_unit<double>(vec({1, 1, 1, 0.2}), 1.2);
  EXPECT_TRUE(st.l2_deficient);
  EXPECT_LE(st.v.lpNorm<1>(), 1.2 + 1e-12);
  EXPECT_LT(st.v.norm(), 1.0);
}

TEST(Deflate, Examples) {
  Rng rng(1);
  const MatrixXd x = standard_normal(rng, 6, 4);
  EXPECT_EQ(deflate(x, VectorXd::Zero(4)), x);
  const MatrixXd d = deflate(x, VectorXd::Unit(4, 0));
  EXPECT_LT(d.col(0).norm(), 1e-15);
  EXPECT_EQ(d.rightCols(3), x.rightCols(3));
  EXPECT_THROW(deflate(x, VectorXd::Zero(3)), DimensionError);
}

TEST(Deflate, QuadraticFormIdentity) {
  Rng rng(2);
  const MatrixXd x = standard_normal(rng, 8, 5);
  const VectorXd v = standard_normal(rng, 5, 1).normalized();
  const MatrixXd d = deflate(x, v);
  const MatrixXd proj = MatrixXd::Identity(5, 5) - v * v.transpose();
  EXPECT_LT((d.transpose() * d - proj * x.transpose() * x * proj).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(PmdRankOne, ExactRankOne) {
  Rng rng(3);
  const VectorXd a = standard_normal(rng, 7, 1).normalized();
  const VectorXd b = standard_normal(rng, 5, 1).normalized();
  const MatrixXd x = 4.0 * a * b.transpose();
  const PmdFactord f = pmd_rank_one(x, inactive(5));
  EXPECT_NEAR(f.sigma, 4.0, 1e-8);
  EXPECT_NEAR(std::abs(f.v.dot(b)), 1.0, 1e-8);
  EXPECT_NEAR(std::abs(f.u_vec.dot(a)), 1.0, 1e-8);
}

TEST(PmdRankOne, MatchesSvdWhenInactive) {
  Rng rng(4);
  const MatrixXd x = standard_normal(rng, 30, 8);
  const PmdFactord f = pmd_rank_one(x, inactive(8));
  Eigen::JacobiSVD<MatrixXd> svd(x, Eigen::ComputeThinV);
  EXPECT_LT(max_sine(f.v, svd.matrixV().col(0)), 1e-6);
  EXPECT_NEAR(f.sigma, svd.singularValues()(0), 1e-8);
}

TEST(PmdRankOne, DominantColumnWithUnitBudget) {
  Rng rng(5);
  MatrixXd x = 0.1 * standard_normal(rng, 20, 6);
  x.col(3) += 5.0 * standard_normal(rng, 20, 1);
  PmdConfig cfg;
  cfg.c = 1.0;
  const PmdFactord f = pmd_rank_one(x, cfg);
  // Brute force over the basis vectors e_j: the best is the largest column norm.
  Index best;
  x.colwise().norm().maxCoeff(&best);
  EXPECT_EQ(best, 3);
  EXPECT_NEAR(f.v(3), 1.0, 1e-8);
  EXPECT_NEAR(f.v.lpNorm<1>(), 1.0, 1e-8);
}

TEST(PmdRankOne, ObjectiveMonotoneAndFeasible) {
  Rng rng(6);
  for (double c : {1.2, 2.0, 3.0}) {
    const MatrixXd x = standard_normal(rng, 25, 12);
    PmdConfig cfg;
    cfg.c = c;
    const PmdFactord f = pmd_rank_one(x, cfg);
    for (std::size_t k = 1; k < f.objective_trace.size(); ++k) {
      EXPECT_GE(f.objective_trace[k], f.objective_trace[k - 1] - 1e-12);
    }
    EXPECT_LE(f.v.norm(), 1 + 1e-10);
    EXPECT_LE(f.v.lpNorm<1>(), c + 1e-8);
    EXPECT_NEAR(f.u_vec.norm(), 1.0, 1e-10);
    EXPECT_GE(f.sigma, 0.0);
  }
}

TEST(PmdRankOne, ScalingEquivariance) {
  Rng rng(7);
  const MatrixXd x = standard_normal(rng, 15, 6);
  PmdConfig cfg;
  cfg.c = 1.7;
  const PmdFactord a = pmd_rank_one(x, cfg);
  const PmdFactord b = pmd_rank_one(MatrixXd(3.0 * x), cfg);
  EXPECT_LT((a.v - b.v).norm(), 1e-10);
  EXPECT_NEAR(b.sigma, 3.0 * a.sigma, 1e-10);
}

TEST(PmdRankOne, ZeroMatrix) {
  EXPECT_THROW(pmd_rank_one(MatrixXd::Zero(3, 3), PmdConfig{}), PreconditionError);
}

TEST(PmdDecompose, SingleFactorMatchesRankOne) {
  Rng rng(8);
  const MatrixXd x = standard_normal(rng, 10, 5);
  PmdConfig cfg;
  cfg.c = 1.5;
  const auto fs = pmd_decompose(x, 1, cfg);
  const PmdFactord f = pmd_rank_one(x, cfg);
  ASSERT_EQ(fs.size(), 1u);
  EXPECT_EQ(fs[0].v, f.v);
  EXPECT_EQ(fs[0].sigma, f.sigma);
}

TEST(PmdDecompose, ExactLowRank) {
  Rng rng(9);
  const MatrixXd x = standard_normal(rng, 20, 2) * standard_normal(rng, 2, 6);
  const auto fs = pmd_decompose(x, 4, inactive(6));
  EXPECT_FALSE(fs[0].zero);
  EXPECT_FALSE(fs[1].zero);
  EXPECT_TRUE(fs[2].zero);
  EXPECT_TRUE(fs[3].zero);
  MatrixXd v(6, 2);
  v << fs[0].v, fs[1].v;
  Eigen::JacobiSVD<MatrixXd> svd(x, Eigen::ComputeThinV);
  EXPECT_LT(projection_distance(orthonormalize(v), orthonormalize(MatrixXd(svd.matrixV().leftCols(2)))), 1e-5);
}

TEST(PmdDecompose, OrthogonalColumnsInNormOrder) {
  MatrixXd x = MatrixXd::Zero(6, 4);
  x(0, 0) = 2;
  x(1, 1) = 5;
  x(2, 2) = 1;
  x(3, 3) = 3;
  const auto fs = pmd_decompose(x, 4, inactive(4));
  const Index order[] = {1, 3, 0, 2};
  for (int k = 0; k < 4; ++k) EXPECT_NEAR(fs[k].v(order[k]), 1.0, 1e-8) << k;
}

TEST(PmdDecompose, BadCount) {
  EXPECT_THROW(pmd_decompose(MatrixXd::Ones(3, 5), 4, PmdConfig{}), PreconditionError);
}
