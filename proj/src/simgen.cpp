#include "niece/simgen.hpp"

#include <cmath>

#include "niece/error.hpp"

namespace niece {

namespace {

std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Thin Q of a QR factorization with the signs fixed so that diag(R) > 0.
MatrixXd signed_q(const MatrixXd& a, Index cols) {
  Eigen::HouseholderQR<MatrixXd> qr(a);
  MatrixXd q = qr.householderQ();
  const Index k = std::min(a.rows(), a.cols());
  for (Index j = 0; j < k; ++j) {
    if (qr.matrixQR()(j, j) < 0) q.col(j) = -q.col(j);
  }
  return q.leftCols(cols);
}

MatrixXd sqrt_factor(const MatrixXd& sigma) {
  Eigen::LLT<MatrixXd> llt(sigma);
  if (llt.info() != Eigen::Success) throw NumericalError("covariance is not positive definite");
  return llt.matrixL();
}

}  // namespace

std::uint64_t stream_seed(std::uint64_t master, std::uint64_t replicate, std::uint64_t stream) {
  std::uint64_t s = master;
  std::uint64_t h = splitmix64(s);
  s = h ^ (replicate * 0xd1b54a32d192ed03ULL);
  h = splitmix64(s);
  s = h ^ (stream * 0x8cb92ba72f3d8dd7ULL);
  return splitmix64(s);
}

MatrixXd standard_normal(Rng& rng, Index rows, Index cols) {
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = z(rng);
  return m;
}

MatrixXd uniform01(Rng& rng, Index rows, Index cols) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  MatrixXd m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = u(rng);
  return m;
}

MatrixXd random_orthogonal(Rng& rng, Index n) {
  if (n < 1) throw PreconditionError("random_orthogonal: n must be >= 1");
  return signed_q(standard_normal(rng, n, n), n);
}

const char* to_string(Model m) {
  switch (m) {
    case Model::M1: return "M1";
    case Model::M2: return "M2";
    case Model::M3: return "M3";
    case Model::M4: return "M4";
  }
  return "?";
}

std::optional<Model> parse_model(const std::string& s) {
  for (Model m : {Model::M1, Model::M2, Model::M3, Model::M4}) {
    if (s == to_string(m)) return m;
  }
  return std::nullopt;
}

SigmaDesign gen_sigma(int kind, Family family, Index s, Index u, Rng& rng) {
  if (u < 1 || s < u) throw PreconditionError("gen_sigma: need s >= u >= 1");
  const bool lin = family == Family::linear;
  SigmaDesign out;
  if (kind == 1) {
    if (s < u + 1) throw PreconditionError("gen_sigma: covariance 1 needs s > u");
    const MatrixXd v = random_orthogonal(rng, s);
    VectorXd d(s);
    for (Index k = 1; k <= s; ++k) {
      d(k - 1) = lin ? std::pow(double(k + 1), 3.0) : std::pow(3.0, double(k + 1));
    }
    out.sigma = v * d.asDiagonal() * v.transpose();
    // v_{s-u}, ..., v_{s-1}: the top eigenvector v_s stays outside the envelope.
    out.gamma_s = v.middleCols(s - u - 1, u);
  } else if (kind == 2 || kind == 3) {
    const MatrixXd q = signed_q(uniform01(rng, s, u), s);
    out.gamma_s = q.leftCols(u);
    const MatrixXd g0 = q.rightCols(s - u);
    const MatrixXd o = random_orthogonal(rng, u);
    VectorXd d(u);
    for (Index k = 1; k <= u; ++k) {
      d(k - 1) = (kind == 2 && lin) ? std::pow(double(k + 1), 3.0) : std::pow(double(k + 1), 2.0);
    }
    const MatrixXd omega = o * d.asDiagonal() * o.transpose();
    VectorXd d0 = VectorXd::Constant(s - u, kind == 3 ? 0.01 : (lin ? 1.0 : 0.01));
    if (kind == 2 && s > u) d0(0) = 50.0;
    out.sigma = out.gamma_s * omega * out.gamma_s.transpose() + g0 * d0.asDiagonal() * g0.transpose();
  } else {
    throw PreconditionError("gen_sigma: covariance kind must be 1, 2 or 3 (got " + std::to_string(kind) + ")");
  }
  out.sigma = (out.sigma + out.sigma.transpose()) / 2.0;
  if (!lin) {
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(out.sigma, Eigen::EigenvaluesOnly);
    out.sigma /= es.eigenvalues().maxCoeff();
  }
  return out;
}

Index default_q(Model m) {
  switch (m) {
    case Model::M1: return 10;
    case Model::M2: return 5;
    default: return 1;
  }
}

SimData gen_model(const SimConfig& cfg, std::uint64_t replicate) {
  const Index n = cfg.n, p = cfg.p, u = cfg.u, s = cfg.s;
  const Index q = cfg.q > 0 ? cfg.q : default_q(cfg.model);
  if (n < 3) throw PreconditionError("gen_model: n must be >= 3");
  if (p < s) throw PreconditionError("gen_model: p must be >= s");
  if ((cfg.model == Model::M3 || cfg.model == Model::M4) && q != 1) {
    throw PreconditionError(std::string("gen_model: ") + to_string(cfg.model) + " has a univariate response");
  }
  Rng rng = make_rng(cfg.seed, replicate, 0);
  const Family fam = (cfg.model == Model::M1 || cfg.model == Model::M2) ? Family::linear : Family::glm;
  const SigmaDesign sd = gen_sigma(cfg.cov_kind, fam, s, u, rng);

  SimData out;
  SimTruth& t = out.truth;
  t.config = cfg;
  t.config.q = q;
  t.sigma = sd.sigma;
  t.gamma = MatrixXd::Zero(p, u);
  t.gamma.topRows(s) = sd.gamma_s;
  const MatrixXd eta = uniform01(rng, u, q);
  MatrixXd beta = t.gamma * eta;  // p x q
  beta *= 10.0 / beta.norm();
  const MatrixXd l = sqrt_factor(sd.sigma);

  Dataset& data = out.data;
  auto gen_x_block = [&]() {
    MatrixXd x = standard_normal(rng, n, p);
    x.leftCols(s) = x.leftCols(s) * l.transpose();
    x.rightCols(p - s) *= 0.1;
    return x;
  };

  switch (cfg.model) {
    case Model::M1: {
      const double sx = cfg.cov_kind == 1 ? std::sqrt(30.0) : 1.0;
      data.x = sx * standard_normal(rng, n, q);
      MatrixXd eps = standard_normal(rng, n, p);
      eps.leftCols(s) = eps.leftCols(s) * l.transpose();
      data.response = ContinuousResponse{data.x * beta.transpose() + eps};
      t.beta = beta;
      break;
    }
    case Model::M2: {
      const double sigma = cfg.cov_kind == 1 ? 200.0 : (cfg.cov_kind == 2 ? 20.0 : 10.0);
      data.x = gen_x_block();
      const MatrixXd eps = sigma * standard_normal(rng, n, q);
      data.response = ContinuousResponse{data.x * beta + eps};
      t.beta = beta.transpose();
      break;
    }
    case Model::M3: {
      data.x = gen_x_block();
      const VectorXd lin = data.x * beta.col(0);
      std::uniform_real_distribution<double> unif(0.0, 1.0);
      VectorXd y(n);
      for (Index i = 0; i < n; ++i) {
        const double pr = 1.0 / (1.0 + std::exp(-lin(i)));
        y(i) = unif(rng) < pr ? 1.0 : 0.0;
      }
      data.response = BinaryResponse{y};
      t.beta = beta.transpose();
      break;
    }
    case Model::M4: {
      data.x = gen_x_block();
      const VectorXd lin = data.x * beta.col(0);
      std::exponential_distribution<double> unit(1.0);
      VectorXd time(n), event(n);
      for (Index i = 0; i < n; ++i) {
        const double fail = unit(rng) / std::exp(lin(i));
        const double cens = unit(rng) / 0.5;
        time(i) = std::min(fail, cens);
        event(i) = fail <= cens ? 1.0 : 0.0;
      }
      data.response = SurvivalResponse{time, event};
      t.beta = beta.transpose();
      break;
    }
  }
  for (Index j = 0; j < data.x.cols(); ++j) data.x_names.push_back("x" + std::to_string(j + 1));
  if (const auto* c = std::get_if<ContinuousResponse>(&data.response)) {
    for (Index j = 0; j < c->y.cols(); ++j) data.y_names.push_back("y" + std::to_string(j + 1));
  } else if (is_binary(data)) {
    data.y_names = {"y"};
  } else {
    data.y_names = {"time", "event"};
  }
  return out;
}

MatrixXd wishart_sample(const MatrixXd& factor, Index dof, Rng& rng) {
  const Index dim = factor.rows();
  const Index k = factor.cols();
  if (k == 0) return MatrixXd::Zero(dim, dim);
  if (dof < k) {
    throw PreconditionError("wishart: dof = " + std::to_string(dof) + " is below the rank " + std::to_string(k));
  }
  std::normal_distribution<double> z(0.0, 1.0);
  MatrixXd a = MatrixXd::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    std::chi_squared_distribution<double> chi(static_cast<double>(dof - i));
    a(i, i) = std::sqrt(chi(rng));
    for (Index j = 0; j < i; ++j) a(i, j) = z(rng);
  }
  const MatrixXd fa = factor * a;
  MatrixXd w = fa * fa.transpose() / static_cast<double>(dof);
  return (w + w.transpose()) / 2.0;
}

WishartPair wishart_pair(const SymmetricMatrixd& m, const SymmetricMatrixd& u, Index dof, Rng& rng) {
  if (m.dim() != u.dim()) throw DimensionError("wishart_pair: M and U differ in dimension");
  if (dof < m.dim()) throw PreconditionError("wishart_pair: dof must be >= the dimension");
  const MatrixXd fm = LowRankPsdd::from_symmetric(m).factor();
  const MatrixXd fu = LowRankPsdd::from_symmetric(u).factor();
  WishartPair out;
  out.m_hat = SymmetricMatrixd(wishart_sample(fm, dof, rng));
  out.u_hat = SymmetricMatrixd(wishart_sample(fu, dof, rng));
  return out;
}

WishartDesign wishart_design(Index p, double delta_u, Rng& rng) {
  if (p < 20) throw PreconditionError("wishart_design: p must be >= 20");
  if (!(delta_u >= 0)) throw PreconditionError("wishart_design: delta_u must be >= 0");
  const MatrixXd v = random_orthogonal(rng, p);
  VectorXd lambda(p);
  for (Index k = 1; k <= p; ++k) lambda(k - 1) = k <= 20 ? std::pow(double(k), 3.0) : 0.05;
  const Index idx[] = {1, 2, 9, 10, 18};
  const Index u = 5;
  MatrixXd gamma(p, u);
  for (Index j = 0; j < u; ++j) gamma.col(j) = v.col(idx[j]);
  const MatrixXd o = random_orthogonal(rng, u);
  const VectorXd d = VectorXd::LinSpaced(u, 1.0, double(u));
  const MatrixXd phi = o * d.asDiagonal() * o.transpose();
  WishartDesign out;
  out.m = SymmetricMatrixd(v * lambda.asDiagonal() * v.transpose());
  out.u = SymmetricMatrixd(delta_u * gamma * phi * gamma.transpose());
  out.gamma = gamma;
  return out;
}

double delta_beta(const MatrixXd& beta_true, const MatrixXd& beta_hat) {
  if (beta_true.rows() != beta_hat.rows() || beta_true.cols() != beta_hat.cols()) {
    throw DimensionError("delta_beta: coefficient shapes differ");
  }
  return (beta_true - beta_hat).norm();
}

double delta_gamma(const MatrixXd& gamma_true, const MatrixXd& gamma_hat) {
  if (gamma_true.rows() != gamma_hat.rows() || gamma_true.cols() != gamma_hat.cols()) {
    throw DimensionError("delta_gamma: bases have different shapes");
  }
  const Index u = gamma_true.cols();
  if (u == 0) return 0.0;
  const double d = projection_distance(Basisd::from_orthonormal(gamma_true, 1e-8),
                                       Basisd::from_orthonormal(gamma_hat, 1e-8)) /
                   std::sqrt(2.0 * static_cast<double>(u));
  return std::clamp(d, 0.0, 1.0 + 1e-10);
}

}  // namespace niece
