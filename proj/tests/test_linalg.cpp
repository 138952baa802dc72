#include <gtest/gtest.h>

#include <cmath>
#include <numeric>

#include "niece/linalg.hpp"
#include "test_util.hpp"

using namespace niece;
using niece::testing::random_basis;

TEST(SymEigen, Identity) {
  const EigenSystemd es = sym_eigen(SymmetricMatrixd(MatrixXd::Identity(3, 3)), 3);
  EXPECT_TRUE(es.values.isApprox(VectorXd::Ones(3)));
  EXPECT_LT((es.vectors.transpose() * es.vectors - MatrixXd::Identity(3, 3)).norm(), 1e-12);
}

TEST(SymEigen, Diagonal) {
  MatrixXd m = VectorXd::LinSpaced(3, 3, 1).asDiagonal();
  const EigenSystemd es = sym_eigen(SymmetricMatrixd(m), 2);
  EXPECT_NEAR(es.values(0), 3, 1e-14);
  EXPECT_NEAR(es.values(1), 2, 1e-14);
  EXPECT_LT((es.vectors - MatrixXd::Identity(3, 2)).norm(), 1e-14);
}

TEST(SymEigen, TwoByTwo) {
  MatrixXd m(2, 2);
  m << 2, 1, 1, 2;
  const EigenSystemd es = sym_eigen(SymmetricMatrixd(m), 2);
  EXPECT_NEAR(es.values(0), 3, 1e-14);
  EXPECT_NEAR(es.values(1), 1, 1e-14);
  const double r = 1 / std::sqrt(2.0);
  // Sign rule: |entries| tie, so the lowest index is made positive.
  EXPECT_NEAR(es.vectors(0, 0), r, 1e-14);
  EXPECT_NEAR(es.vectors(1, 0), r, 1e-14);
  EXPECT_NEAR(es.vectors(0, 1), r, 1e-14);
  EXPECT_NEAR(es.vectors(1, 1), -r, 1e-14);
}

TEST(SymEigen, ResidualReconstructionAndSign) {
  Rng rng(7);
  const MatrixXd a = standard_normal(rng, 12, 12);
  const SymmetricMatrixd s(a + a.transpose());
  const EigenSystemd es = sym_eigen(s, 12);
  for (Index j = 0; j + 1 < es.size(); ++j) EXPECT_GE(es.values(j), es.values(j + 1));
  for (Index j = 0; j < es.size(); ++j) {
    const VectorXd v = es.vectors.col(j);
    EXPECT_LE((s.matrix() * v - es.values(j) * v).norm(), 1e-9 * (1 + std::abs(es.values(0))));
    Index arg;
    v.cwiseAbs().maxCoeff(&arg);
    EXPECT_GT(v(arg), 0);
  }
  const MatrixXd rec = es.vectors * es.values.asDiagonal() * es.vectors.transpose();
  EXPECT_LT((rec - s.matrix()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(SymEigen, PermutationSimilarity) {
  Rng rng(11);
  const MatrixXd a = standard_normal(rng, 8, 8);
  const MatrixXd s = a * a.transpose();
  std::vector<int> idx(8);
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  Eigen::PermutationMatrix<Eigen::Dynamic> perm(Eigen::Map<Eigen::VectorXi>(idx.data(), 8));
  const MatrixXd ps = perm * s * perm.transpose();
  const EigenSystemd e1 = sym_eigen(SymmetricMatrixd(s), 4);
  const EigenSystemd e2 = sym_eigen(SymmetricMatrixd(ps), 4);
  EXPECT_LT((e1.values - e2.values).cwiseAbs().maxCoeff(), 1e-10);
  for (Index j = 0; j < 4; ++j) {
    const Basisd b1 = orthonormalize(MatrixXd(perm * e1.vectors.col(j)));
    const Basisd b2 = orthonormalize(MatrixXd(e2.vectors.col(j)));
    EXPECT_LT(projection_distance(b1, b2), 1e-9);
  }
}

TEST(SymEigen, BadRequest) {
  EXPECT_THROW(sym_eigen(SymmetricMatrixd(MatrixXd::Identity(3, 3)), 4), PreconditionError);
  EXPECT_THROW(sym_eigen(SymmetricMatrixd(MatrixXd::Identity(3, 3)), 0), PreconditionError);
  EXPECT_THROW(SymmetricMatrixd(MatrixXd::Zero(2, 3)), DimensionError);
}

TEST(SymmetricMatrix, SymmetrizesInput) {
  MatrixXd a(2, 2);
  a << 1, 2, 4, 1;
  const SymmetricMatrixd s(a);
  EXPECT_EQ(s(0, 1), s(1, 0));
  EXPECT_EQ(s(0, 1), 3.0);
}

TEST(ProjectionDistance, Examples) {
  const Basisd e1 = Basisd::from_orthonormal(MatrixXd::Identity(2, 1));
  const Basisd e2 = Basisd::from_orthonormal(MatrixXd(MatrixXd::Identity(2, 2).col(1)));
  MatrixXd d(2, 1);
  d << 1, 1;
  const Basisd diag = orthonormalize(d);
  EXPECT_NEAR(projection_distance(e1, e1), 0, 1e-15);
  EXPECT_NEAR(projection_distance(e1, e2), std::sqrt(2.0), 1e-14);
  EXPECT_NEAR(projection_distance(e1, diag), 1.0, 1e-14);
  EXPECT_NEAR(principal_sines(e1, e2)(0), 1.0, 1e-14);
  EXPECT_LT(principal_sines(e1, e1).norm(), 1e-15);
}

TEST(ProjectionDistance, MatchesProjectorFormulaAndIsSymmetric) {
  Rng rng(3);
  for (int t = 0; t < 20; ++t) {
    const Basisd a = random_basis(rng, 9, 3);
    const Basisd b = random_basis(rng, 9, 3);
    const double direct = (a.projector() - b.projector()).norm();
    EXPECT_NEAR(projection_distance(a, b), direct, 1e-12);
    EXPECT_NEAR(projection_distance(a, b), projection_distance(b, a), 1e-14);
    EXPECT_NEAR(projection_distance(a, b), std::sqrt(2.0) * principal_sines(a, b).norm(), 1e-10);
    EXPECT_LE(projection_distance(a, b), std::sqrt(6.0) + 1e-12);
  }
}

TEST(ProjectionDistance, OrthogonalSubspacesReachMaximum) {
  const MatrixXd id = MatrixXd::Identity(6, 6);
  const Basisd a = Basisd::from_orthonormal(id.leftCols(3));
  const Basisd b = Basisd::from_orthonormal(id.rightCols(3));
  EXPECT_NEAR(projection_distance(a, b), std::sqrt(6.0), 1e-14);
}

TEST(ProjectionDistance, DimensionMismatch) {
  const Basisd a = Basisd::from_orthonormal(MatrixXd::Identity(3, 1));
  const Basisd b = Basisd::from_orthonormal(MatrixXd::Identity(4, 1));
  EXPECT_THROW(projection_distance(a, b), DimensionError);
  EXPECT_THROW(principal_sines(a, b), DimensionError);
}

TEST(Orthonormalize, HandGramSchmidt) {
  MatrixXd v(2, 2);
  v << 1, 1, 0, 1;
  const Basisd b = orthonormalize(v);
  EXPECT_LT((b.matrix() - MatrixXd::Identity(2, 2)).norm(), 1e-15);
}

TEST(Orthonormalize, AlreadyOrthonormal) {
  Rng rng(5);
  const Basisd b = random_basis(rng, 7, 3);
  EXPECT_LT((orthonormalize(b.matrix()).matrix() - b.matrix()).norm(), 1e-12);
}

TEST(Orthonormalize, RandomMatchesSvdColumnSpace) {
  Rng rng(9);
  const MatrixXd v = standard_normal(rng, 10, 3);
  const Basisd b = orthonormalize(v);
  EXPECT_LT((b.matrix().transpose() * b.matrix() - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
  Eigen::JacobiSVD<MatrixXd> svd(v, Eigen::ComputeThinU);
  EXPECT_LT(projection_distance(b, Basisd::from_orthonormal(svd.matrixU())), 1e-10);
}

TEST(Orthonormalize, RankDeficientNamesColumn) {
  MatrixXd v(3, 3);
  v << 1, 0, 1, 0, 1, 1, 0, 0, 0;
  try {
    orthonormalize(v);
    FAIL();
  } catch (const NumericalError& e) {
    EXPECT_NE(std::string(e.what()).find("column 2"), std::string::npos);
  }
}

TEST(Covariance, HandComputation) {
  MatrixXd x(2, 2);
  x << 0, 0, 2, 0;
  const SymmetricMatrixd s = sample_covariance(x);
  MatrixXd expect(2, 2);
  expect << 1, 0, 0, 0;
  EXPECT_LT((s.matrix() - expect).norm(), 1e-15);
  EXPECT_THROW(sample_covariance(MatrixXd::Ones(1, 2)), PreconditionError);
}

TEST(Covariance, ConstantColumnAndRowPermutation) {
  Rng rng(2);
  MatrixXd x = standard_normal(rng, 20, 3);
  x.col(1).setConstant(4.0);
  const SymmetricMatrixd s = sample_covariance(x);
  EXPECT_LT(s.matrix().row(1).norm(), 1e-14);
  EXPECT_LT(s.matrix().col(1).norm(), 1e-14);
  const MatrixXd xr = x.colwise().reverse();
  EXPECT_LT((sample_covariance(xr).matrix() - s.matrix()).cwiseAbs().maxCoeff(), 1e-13);
  EXPECT_GT(sym_eigen(s, 3).values.minCoeff(), -1e-10);
}

TEST(Covariance, MonteCarloDiagonal) {
  Rng rng(20240101);
  MatrixXd x = standard_normal(rng, 1000, 2);
  x.col(0) *= 2.0;
  const SymmetricMatrixd s = sample_covariance(x);
  EXPECT_NEAR(s(0, 0), 4.0, 0.3);
  EXPECT_NEAR(s(1, 1), 1.0, 0.3);
}

TEST(CrossCovariance, Identities) {
  Rng rng(4);
  const MatrixXd x = standard_normal(rng, 30, 4);
  EXPECT_LT((cross_covariance(x, x) - sample_covariance(x).matrix()).norm(), 1e-14);
  const MatrixXd b = standard_normal(rng, 2, 4);
  const MatrixXd y = x * b.transpose();
  EXPECT_LT((cross_covariance(x, y) - sample_covariance(x).matrix() * b.transpose()).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_THROW(cross_covariance(x, MatrixXd(y.topRows(5))), DimensionError);
}

TEST(CrossCovariance, IndependentNoise) {
  Rng rng(8);
  const MatrixXd x = standard_normal(rng, 1000, 3);
  const MatrixXd y = standard_normal(rng, 1000, 2);
  EXPECT_LT(cross_covariance(x, y).cwiseAbs().maxCoeff(), 0.1);
}

TEST(LowRankPsd, MatchesDense) {
  Rng rng(6);
  const MatrixXd f = standard_normal(rng, 6, 2);
  const SymmetricMatrixd u(f * f.transpose());
  const LowRankPsdd lr = LowRankPsdd::from_symmetric(u);
  EXPECT_EQ(lr.factor().cols(), 2);
  const VectorXd v = standard_normal(rng, 6, 1);
  EXPECT_NEAR(lr.quad_form(v), v.dot(u.matrix() * v), 1e-10);
  EXPECT_NEAR(lr.op_norm(), sym_eigen(u, 1).values(0), 1e-10);
  MatrixXd neg = -MatrixXd::Identity(3, 3);
  EXPECT_THROW(LowRankPsdd::from_symmetric(SymmetricMatrixd(neg)), PreconditionError);
}
