#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "niece/simgen.hpp"
#include "test_util.hpp"

using namespace niece;

namespace {

VectorXd ascending_eigenvalues(const MatrixXd& m) {
  return Eigen::SelfAdjointEigenSolver<MatrixXd>(m, Eigen::EigenvaluesOnly).eigenvalues();
}

VectorXd top_eigenvector(const MatrixXd& m) { return sym_eigen(SymmetricMatrixd(m), 1).vectors.col(0); }

}  // namespace

TEST(StreamSeed, DistinctAndDeterministic) {
  std::set<std::uint64_t> seen;
  for (std::uint64_t r = 0; r < 50; ++r) {
    for (std::uint64_t s = 0; s < 5; ++s) seen.insert(stream_seed(1, r, s));
  }
  EXPECT_EQ(seen.size(), 250u);
  EXPECT_EQ(stream_seed(9, 3, 2), stream_seed(9, 3, 2));
}

TEST(RandomOrthogonal, IsOrthogonal) {
  Rng rng(1);
  const MatrixXd q = random_orthogonal(rng, 12);
  EXPECT_LT((q.transpose() * q - MatrixXd::Identity(12, 12)).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(GenSigma, Sigma1LinearSpectrum) {
  Rng rng(2);
  const SigmaDesign s = gen_sigma(1, Family::linear, 10, 3, rng);
  const VectorXd ev = ascending_eigenvalues(s.sigma);
  for (Index k = 1; k <= 10; ++k) EXPECT_NEAR(ev(k - 1), std::pow(k + 1.0, 3), 1e-9 * 1331);
  EXPECT_LT((s.gamma_s.transpose() * s.gamma_s - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GenSigma, Sigma3Spectrum) {
  for (Family fam : {Family::linear, Family::glm}) {
    Rng rng(3);
    const SigmaDesign s = gen_sigma(3, fam, 10, 3, rng);
    const VectorXd ev = ascending_eigenvalues(s.sigma);
    const double scale = fam == Family::linear ? 1.0 : 1.0 / 16.0;
    for (Index k = 0; k < 7; ++k) EXPECT_NEAR(ev(k), 0.01 * scale, 1e-12);
    EXPECT_NEAR(ev(7), 4 * scale, 1e-10);
    EXPECT_NEAR(ev(8), 9 * scale, 1e-10);
    EXPECT_NEAR(ev(9), 16 * scale, 1e-10);
  }
}

TEST(GenSigma, Sigma2Spectra) {
  Rng rng(4);
  const VectorXd lin = ascending_eigenvalues(gen_sigma(2, Family::linear, 10, 3, rng).sigma);
  VectorXd expect(10);
  expect << 1, 1, 1, 1, 1, 1, 8, 27, 50, 64;
  EXPECT_LT((lin - expect).cwiseAbs().maxCoeff(), 1e-9);
  const VectorXd glm = ascending_eigenvalues(gen_sigma(2, Family::glm, 10, 3, rng).sigma);
  expect << 0.01, 0.01, 0.01, 0.01, 0.01, 0.01, 4, 9, 16, 50;
  EXPECT_LT((glm - expect / 50).cwiseAbs().maxCoeff(), 1e-10);
}

TEST(GenSigma, Sigma1GlmSpectrumIsScaled) {
  Rng rng(5);
  const VectorXd ev = ascending_eigenvalues(gen_sigma(1, Family::glm, 10, 3, rng).sigma);
  for (Index k = 1; k <= 10; ++k) EXPECT_NEAR(ev(k - 1), std::pow(3.0, k + 1) / std::pow(3.0, 11), 1e-12);
}

TEST(GenSigma, FirstPrincipalComponentOutsideEnvelope) {
  struct Case {
    int kind;
    Family fam;
  };
  for (Case c : {Case{1, Family::linear}, Case{1, Family::glm}, Case{2, Family::glm}}) {
    Rng rng(6);
    const SigmaDesign s = gen_sigma(c.kind, c.fam, 10, 3, rng);
    EXPECT_LT((s.gamma_s.transpose() * top_eigenvector(s.sigma)).cwiseAbs().maxCoeff(), 1e-10) << c.kind;
  }
}

TEST(GenSigma, InvalidKind) {
  Rng rng(7);
  EXPECT_THROW(gen_sigma(4, Family::linear, 10, 3, rng), PreconditionError);
}

TEST(GenModel, TruthInvariants) {
  for (Model m : {Model::M1, Model::M2, Model::M3, Model::M4}) {
    for (int kind : {1, 2, 3}) {
      SimConfig cfg;
      cfg.model = m;
      cfg.cov_kind = kind;
      cfg.p = 40;
      const SimData sd = gen_model(cfg, 3);
      const SimTruth& t = sd.truth;
      EXPECT_NEAR(t.beta.norm(), 10.0, 1e-12);
      EXPECT_LT((t.gamma.transpose() * t.gamma - MatrixXd::Identity(3, 3)).cwiseAbs().maxCoeff(), 1e-10);
      EXPECT_EQ(t.gamma.bottomRows(30).cwiseAbs().maxCoeff(), 0.0);
      if (m == Model::M1) {
        EXPECT_EQ(t.beta.bottomRows(30).cwiseAbs().maxCoeff(), 0.0);
      } else {
        EXPECT_EQ(t.beta.rightCols(30).cwiseAbs().maxCoeff(), 0.0);
      }
      sd.data.validate();
    }
  }
}

TEST(GenModel, Shapes) {
  SimConfig cfg;
  cfg.p = 50;
  const SimData m1 = gen_model(cfg);
  EXPECT_EQ(m1.data.x.rows(), 200);
  EXPECT_EQ(m1.data.x.cols(), 10);
  EXPECT_EQ(std::get<ContinuousResponse>(m1.data.response).y.cols(), 50);
  EXPECT_EQ(m1.truth.beta.rows(), 50);
  EXPECT_EQ(m1.truth.beta.cols(), 10);
  cfg.model = Model::M2;
  const SimData m2 = gen_model(cfg);
  EXPECT_EQ(m2.data.x.cols(), 50);
  EXPECT_EQ(std::get<ContinuousResponse>(m2.data.response).y.cols(), 5);
  EXPECT_EQ(m2.truth.beta.rows(), 5);
  EXPECT_EQ(m2.truth.beta.cols(), 50);
}

TEST(GenModel, DeterministicPerSeedAndReplicate) {
  SimConfig cfg;
  cfg.model = Model::M2;
  cfg.p = 30;
  const SimData a = gen_model(cfg, 1), b = gen_model(cfg, 1), c = gen_model(cfg, 2);
  EXPECT_EQ(a.data.x, b.data.x);
  EXPECT_NE(a.data.x, c.data.x);
  cfg.seed += 1;
  EXPECT_NE(gen_model(cfg, 1).data.x, a.data.x);
}

TEST(GenModel, M3ClassBalance) {
  SimConfig cfg;
  cfg.model = Model::M3;
  cfg.cov_kind = 2;
  cfg.p = 400;
  for (std::uint64_t r = 0; r < 100; ++r) {
    const VectorXd& y = std::get<BinaryResponse>(gen_model(cfg, r).data.response).y;
    EXPECT_GT(y.sum(), 0);
    EXPECT_LT(y.sum(), y.size());
  }
}

TEST(GenModel, M4CensoringFraction) {
  SimConfig cfg;
  cfg.model = Model::M4;
  cfg.cov_kind = 3;
  cfg.p = 100;
  double censored = 0;
  const int reps = 50;
  for (int r = 0; r < reps; ++r) {
    const VectorXd& e = std::get<SurvivalResponse>(gen_model(cfg, static_cast<std::uint64_t>(r)).data.response).event;
    censored += 1.0 - e.mean();
  }
  censored /= reps;
  EXPECT_GT(censored, 0.1);
  EXPECT_LT(censored, 0.9);
}

TEST(GenModel, InvalidCombination) {
  SimConfig cfg;
  cfg.model = Model::M3;
  cfg.q = 3;
  EXPECT_THROW(gen_model(cfg), PreconditionError);
  cfg.model = Model::M1;
  cfg.p = 5;
  EXPECT_THROW(gen_model(cfg), PreconditionError);
}

TEST(Wishart, MonteCarloMean) {
  Rng rng(8);
  const MatrixXd a = standard_normal(rng, 4, 4);
  const MatrixXd m = a * a.transpose() + MatrixXd::Identity(4, 4);
  const MatrixXd f = LowRankPsdd::from_symmetric(SymmetricMatrixd(m)).factor();
  MatrixXd mean = MatrixXd::Zero(4, 4);
  const int reps = 2000;
  for (int r = 0; r < reps; ++r) mean += wishart_sample(f, 10, rng);
  mean /= reps;
  EXPECT_LT((mean - m).cwiseAbs().maxCoeff(), 0.1 * m.cwiseAbs().maxCoeff());
}

TEST(Wishart, Concentration) {
  Rng rng(9);
  const MatrixXd m = MatrixXd::Identity(3, 3) * 2.0;
  const MatrixXd w = wishart_sample(LowRankPsdd::from_symmetric(SymmetricMatrixd(m)).factor(), 1000000, rng);
  EXPECT_LT((w - m).cwiseAbs().maxCoeff(), 0.01 * 2.0);
}

TEST(Wishart, ZeroAndRankDeficient) {
  Rng rng(10);
  const WishartPair wp = wishart_pair(SymmetricMatrixd(MatrixXd(MatrixXd::Identity(3, 3))),
                                      SymmetricMatrixd(MatrixXd(MatrixXd::Zero(3, 3))), 5, rng);
  EXPECT_EQ(wp.u_hat.matrix(), MatrixXd::Zero(3, 3));
  const VectorXd v = VectorXd::Unit(3, 1);
  const MatrixXd w = wishart_sample(v, 5, rng);
  EXPECT_NEAR(w(0, 0), 0.0, 1e-15);
  EXPECT_GT(w(1, 1), 0.0);
  EXPECT_THROW(wishart_pair(SymmetricMatrixd(MatrixXd(MatrixXd::Identity(3, 3))),
                            SymmetricMatrixd(MatrixXd(-MatrixXd::Identity(3, 3))), 5, rng),
               PreconditionError);
}

TEST(WishartDesign, Structure) {
  Rng rng(11);
  const WishartDesign w = wishart_design(100, 2.0, rng);
  const VectorXd ev = ascending_eigenvalues(w.m.matrix());
  EXPECT_NEAR(ev(99), 8000, 1e-8);
  EXPECT_NEAR(ev(0), 0.05, 1e-10);
  // U = delta_u Gamma Phi Gamma^T with Phi = O diag(1..5) O^T.
  const VectorXd uev = ascending_eigenvalues(w.u.matrix()).tail(5);
  for (Index k = 0; k < 5; ++k) EXPECT_NEAR(uev(k), 2.0 * (k + 1), 1e-10);
  const MatrixXd mg = w.m.matrix() * w.gamma;
  EXPECT_LT((mg - w.gamma * (w.gamma.transpose() * mg)).norm(), 1e-8);
}

TEST(Metrics, Examples) {
  const MatrixXd e1 = MatrixXd::Identity(2, 1);
  MatrixXd diag(2, 1);
  diag << 1, 1;
  diag /= std::sqrt(2.0);
  EXPECT_EQ(delta_gamma(e1, e1), 0.0);
  EXPECT_NEAR(delta_gamma(e1, MatrixXd(MatrixXd::Identity(2, 2).col(1))), 1.0, 1e-15);
  EXPECT_NEAR(delta_gamma(e1, diag), 1 / std::sqrt(2.0), 1e-15);
  const MatrixXd id = MatrixXd::Identity(6, 6);
  EXPECT_NEAR(delta_gamma(id.leftCols(3), id.rightCols(3)), 1.0, 1e-15);
  EXPECT_EQ(delta_beta(e1, e1), 0.0);
  EXPECT_NEAR(delta_beta(e1, diag), (e1 - diag).norm(), 1e-15);
  EXPECT_THROW(delta_beta(e1, MatrixXd::Identity(3, 1)), DimensionError);
}
