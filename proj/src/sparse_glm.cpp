#include "niece/sparse_glm.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "niece/error.hpp"

namespace niece {

namespace {

double softplus(double t) { return t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t)); }

double sigmoid(double t) {
  if (t >= 0) return 1.0 / (1.0 + std::exp(-t));
  const double e = std::exp(t);
  return e / (1.0 + e);
}

double soft(double z, double g) {
  if (z > g) return z - g;
  if (z < -g) return z + g;
  return 0.0;
}

void check_binary(const VectorXd& y, Index n) {
  if (y.size() != n) {
    throw DimensionError("logistic: " + std::to_string(y.size()) + " labels for " +
                         std::to_string(n) + " rows");
  }
  for (Index i = 0; i < n; ++i) {
    if (y(i) != 0.0 && y(i) != 1.0) {
      throw PreconditionError("logistic: label at row " + std::to_string(i) + " is not 0/1");
    }
  }
}

void check_both_classes(const VectorXd& y) {
  const double s = y.sum();
  if (s == 0.0 || s == static_cast<double>(y.size())) {
    throw PreconditionError("logistic: only one class present in the labels");
  }
}

void check_survival(const VectorXd& time, const VectorXd& event, Index n) {
  if (time.size() != n || event.size() != n) {
    throw DimensionError("cox: time/event lengths do not match " + std::to_string(n) + " rows");
  }
  bool any = false;
  for (Index i = 0; i < n; ++i) {
    if (!(time(i) > 0.0) || !std::isfinite(time(i))) {
      throw PreconditionError("cox: survival time at row " + std::to_string(i) + " is not positive");
    }
    if (event(i) != 0.0 && event(i) != 1.0) {
      throw PreconditionError("cox: event flag at row " + std::to_string(i) + " is not 0/1");
    }
    any = any || event(i) == 1.0;
  }
  if (!any) throw PreconditionError("cox: no events (all observations censored)");
}

double l1(const VectorXd& b) { return b.lpNorm<1>(); }

double kkt_residual(const VectorXd& grad, const VectorXd& beta, double lambda) {
  double r = 0.0;
  for (Index j = 0; j < beta.size(); ++j) {
    const double v = beta(j) != 0.0 ? std::abs(grad(j) + (beta(j) > 0 ? lambda : -lambda))
                                    : std::max(std::abs(grad(j)) - lambda, 0.0);
    r = std::max(r, v);
  }
  return r;
}

// Coordinate descent for  (1/2) sum_i w_i (z_i - b0 - x_i^T beta)^2 / scale + lambda ||beta||_1.
// `resid` holds z - b0 - X beta on entry and is kept current.
void weighted_lasso_cd(const MatrixXd& xc, const VectorXd& w, double scale, double lambda,
                       bool with_intercept, double inner_tol, int max_sweeps, VectorXd& beta,
                       double& b0, VectorXd& resid) {
  const Index p = xc.cols();
  VectorXd xwx(p);
  for (Index j = 0; j < p; ++j) xwx(j) = (xc.col(j).array().square() * w.array()).sum() / scale;
  const double wsum = w.sum();

  auto sweep = [&](bool full) {
    double worst = 0.0;
    if (with_intercept && wsum > 0) {
      const double delta = w.dot(resid) / wsum;
      b0 += delta;
      resid.array() -= delta;
      worst = std::max(worst, std::abs(delta) * wsum / scale);
    }
    for (Index j = 0; j < p; ++j) {
      if (!full && beta(j) == 0.0) continue;
      if (xwx(j) <= 0.0) {
        if (beta(j) != 0.0) {
          resid += xc.col(j) * beta(j);
          beta(j) = 0.0;
        }
        continue;
      }
      const double g = (xc.col(j).array() * w.array() * resid.array()).sum() / scale + xwx(j) * beta(j);
      const double nb = soft(g, lambda) / xwx(j);
      const double diff = nb - beta(j);
      if (diff != 0.0) {
        resid -= xc.col(j) * diff;
        beta(j) = nb;
        worst = std::max(worst, xwx(j) * std::abs(diff));
      }
    }
    return worst;
  };

  for (int s = 0; s < max_sweeps;) {
    double worst = 0.0;
    do {
      worst = sweep(false);
      ++s;
    } while (worst > inner_tol && s < max_sweeps);
    worst = sweep(true);
    ++s;
    if (worst <= inner_tol) break;
  }
}

double logistic_penalized(const MatrixXd& xc, const VectorXd& y, const VectorXd& beta, double b0,
                          double lambda) {
  const VectorXd eta = (xc * beta).array() + b0;
  double v = 0.0;
  for (Index i = 0; i < eta.size(); ++i) v += softplus(eta(i)) - y(i) * eta(i);
  return v / static_cast<double>(eta.size()) + lambda * l1(beta);
}

// Risk-set bookkeeping for the Breslow partial likelihood.
struct CoxOrder {
  std::vector<Index> desc;                 // indices sorted by decreasing time
  std::vector<std::pair<Index, Index>> groups;  // [begin, end) runs of equal times in `desc`
};

CoxOrder cox_order(const VectorXd& time) {
  CoxOrder o;
  o.desc.resize(static_cast<std::size_t>(time.size()));
  std::iota(o.desc.begin(), o.desc.end(), Index(0));
  std::stable_sort(o.desc.begin(), o.desc.end(), [&](Index a, Index b) { return time(a) > time(b); });
  Index begin = 0;
  const Index n = time.size();
  for (Index k = 1; k <= n; ++k) {
    if (k == n || time(o.desc[static_cast<std::size_t>(k)]) != time(o.desc[static_cast<std::size_t>(begin)])) {
      o.groups.emplace_back(begin, k);
      begin = k;
    }
  }
  return o;
}

struct CoxEval {
  double value = 0.0;
  VectorXd grad_eta;
  VectorXd hess_diag;
  VectorXd e;                   // exp(eta - shift)
  VectorXd a;                   // sum over event groups at or before T_j of d_g / S_g
  std::vector<double> group_s;  // risk-set sums of e
  std::vector<double> group_d;  // events per tied group
};

CoxEval cox_eval(const VectorXd& eta, const VectorXd& event, const CoxOrder& o, bool need_derivs) {
  const Index n = eta.size();
  const double shift = eta.maxCoeff();
  CoxEval out;
  out.e = (eta.array() - shift).exp();
  const VectorXd& e = out.e;
  std::vector<double>& group_s = out.group_s;
  std::vector<double>& group_d = out.group_d;
  group_s.resize(o.groups.size());
  group_d.resize(o.groups.size());
  double cum = 0.0;
  for (std::size_t g = 0; g < o.groups.size(); ++g) {
    for (Index k = o.groups[g].first; k < o.groups[g].second; ++k) cum += e(o.desc[static_cast<std::size_t>(k)]);
    group_s[g] = cum;
    double d = 0.0;
    for (Index k = o.groups[g].first; k < o.groups[g].second; ++k) {
      const Index i = o.desc[static_cast<std::size_t>(k)];
      if (event(i) == 1.0) {
        d += 1.0;
        out.value -= eta(i) - (shift + std::log(cum));
      }
    }
    group_d[g] = d;
  }
  out.value /= static_cast<double>(n);
  if (!need_derivs) return out;
  out.grad_eta.resize(n);
  out.hess_diag.resize(n);
  out.a.resize(n);
  // Ascending in time: A_j = sum over events with T_i <= T_j of 1/S_i.
  double a = 0.0, b = 0.0;
  for (std::size_t gg = o.groups.size(); gg-- > 0;) {
    a += group_d[gg] / group_s[gg];
    b += group_d[gg] / (group_s[gg] * group_s[gg]);
    for (Index k = o.groups[gg].first; k < o.groups[gg].second; ++k) {
      const Index j = o.desc[static_cast<std::size_t>(k)];
      out.a(j) = a;
      out.grad_eta(j) = -(event(j) - e(j) * a) / static_cast<double>(n);
      out.hess_diag(j) = (e(j) * a - e(j) * e(j) * b) / static_cast<double>(n);
    }
  }
  return out;
}

// Eta-space Hessian of the Breslow loss times v, in O(n).
VectorXd cox_hess_times(const CoxEval& ev, const CoxOrder& o, const VectorXd& v) {
  const Index n = v.size();
  std::vector<double> c(o.groups.size());
  double cum = 0.0;
  for (std::size_t g = 0; g < o.groups.size(); ++g) {
    for (Index k = o.groups[g].first; k < o.groups[g].second; ++k) {
      const Index i = o.desc[static_cast<std::size_t>(k)];
      cum += ev.e(i) * v(i);
    }
    c[g] = cum;
  }
  VectorXd out(n);
  double acc = 0.0;
  for (std::size_t gg = o.groups.size(); gg-- > 0;) {
    acc += ev.group_d[gg] * c[gg] / (ev.group_s[gg] * ev.group_s[gg]);
    for (Index k = o.groups[gg].first; k < o.groups[gg].second; ++k) {
      const Index j = o.desc[static_cast<std::size_t>(k)];
      out(j) = ev.e(j) * (ev.a(j) * v(j) - acc);
    }
  }
  return out / static_cast<double>(n);
}

template <typename Eval, typename Penalized>
GlmFit prox_newton(const MatrixXd& xc, double lambda, bool with_intercept, const SolverControl& ctl,
                   VectorXd beta, double b0, Eval&& quad, Penalized&& objective) {
  GlmFit fit;
  fit.lambda = lambda;
  double f = objective(beta, b0);
  std::vector<double> trace{f};
  const double inner_tol = 0.01 * ctl.kkt_tol;
  if (beta.isZero(0.0)) {
    // Zero is optimal exactly when the KKT conditions hold there; skip the solver so the
    // solution is exactly zero rather than zero up to rounding.
    VectorXd w, z, grad;
    double g0 = 0.0;
    quad(beta, b0, w, z, grad, g0);
    if (grad.cwiseAbs().maxCoeff() <= lambda && (!with_intercept || std::abs(g0) <= ctl.kkt_tol)) {
      fit.beta = beta;
      fit.intercept = b0;
      fit.objective = f;
      fit.kkt_residual = with_intercept ? std::abs(g0) : 0.0;
      fit.converged = true;
      fit.objective_trace = std::move(trace);
      return fit;
    }
  }
  for (int it = 1; it <= ctl.max_iters; ++it) {
    fit.iterations = it;
    VectorXd w, z, grad;
    double g0 = 0.0;
    quad(beta, b0, w, z, grad, g0);
    const VectorXd eta = (xc * beta).array() + b0;
    VectorXd resid = z - eta;
    VectorXd nb = beta;
    double nb0 = b0;
    weighted_lasso_cd(xc, w, with_intercept ? static_cast<double>(xc.rows()) : 1.0, lambda,
                      with_intercept, inner_tol, ctl.max_sweeps, nb, nb0, resid);
    const VectorXd db = nb - beta;
    const double db0 = nb0 - b0;
    double t = 1.0;
    double fnew = objective(beta + db, b0 + db0);
    while (!(fnew <= f) && t > 1e-12) {
      t *= 0.5;
      fnew = objective(beta + t * db, b0 + t * db0);
    }
    const double prev = f;
    if (fnew <= f) {
      beta += t * db;
      b0 += t * db0;
      f = fnew;
    }
    trace.push_back(f);
    const double rel = (prev - f) / std::max(1.0, std::abs(f));
    quad(beta, b0, w, z, grad, g0);
    fit.kkt_residual = std::max(kkt_residual(grad, beta, lambda), with_intercept ? std::abs(g0) : 0.0);
    if (fit.kkt_residual <= ctl.kkt_tol && rel <= ctl.tol) {
      fit.converged = true;
      break;
    }
    if (t <= 1e-12 && rel <= ctl.tol) break;  // stalled
  }
  fit.beta = beta;
  fit.intercept = b0;
  fit.objective = f;
  fit.objective_trace = std::move(trace);
  return fit;
}

// Proximal Newton for the lasso Cox loss. Each step minimizes the exact second-order
// model over a working set (nonzeros plus KKT violators) by coordinate descent.
GlmFit cox_prox_newton(const MatrixXd& xc, const VectorXd& event, const CoxOrder& o, double lambda,
                       const SolverControl& ctl, VectorXd beta) {
  const Index n = xc.rows();
  auto objective = [&](const VectorXd& b) { return cox_eval(xc * b, event, o, false).value + lambda * l1(b); };
  GlmFit fit;
  fit.lambda = lambda;
  double f = objective(beta);
  std::vector<double> trace{f};
  const double inner_tol = 0.01 * ctl.kkt_tol;
  double rel = 0.0;
  for (int it = 0;; ++it) {
    const CoxEval ev = cox_eval(xc * beta, event, o, true);
    const VectorXd grad = xc.transpose() * ev.grad_eta;
    fit.kkt_residual = kkt_residual(grad, beta, lambda);
    if (fit.kkt_residual <= ctl.kkt_tol && rel <= ctl.tol) {
      fit.converged = true;
      break;
    }
    if (it == ctl.max_iters) break;
    fit.iterations = it + 1;

    std::vector<Index> ws;
    for (Index j = 0; j < beta.size(); ++j)
      if (beta(j) != 0.0 || std::abs(grad(j)) > lambda) ws.push_back(j);
    const Index m = static_cast<Index>(ws.size());
    MatrixXd xw(n, m), hx(n, m);
    VectorXd bw(m), lin(m);
    for (Index k = 0; k < m; ++k) {
      const Index j = ws[static_cast<std::size_t>(k)];
      xw.col(k) = xc.col(j);
      hx.col(k) = cox_hess_times(ev, o, xw.col(k));
      bw(k) = beta(j);
      lin(k) = grad(j);
    }
    const MatrixXd q = xw.transpose() * hx;
    // Model in the new coefficients b: (grad - Q bw)' b + b'Qb / 2 + lambda |b|_1.
    lin -= q * bw;
    VectorXd nb = bw;
    VectorXd qb = q * nb;
    for (int sw = 0; sw < ctl.max_sweeps; ++sw) {
      double worst = 0.0;
      for (Index k = 0; k < m; ++k) {
        const double qkk = q(k, k);
        if (qkk <= 0.0) continue;
        const double g = lin(k) + qb(k) - qkk * nb(k);
        const double v = soft(-g, lambda) / qkk;
        const double diff = v - nb(k);
        if (diff != 0.0) {
          qb += q.col(k) * diff;
          nb(k) = v;
          worst = std::max(worst, qkk * std::abs(diff));
        }
      }
      if (worst <= inner_tol) break;
    }
    VectorXd db = VectorXd::Zero(beta.size());
    for (Index k = 0; k < m; ++k) db(ws[static_cast<std::size_t>(k)]) = nb(k) - bw(k);
    double t = 1.0;
    double fnew = objective(beta + db);
    while (!(fnew <= f) && t > 1e-12) {
      t *= 0.5;
      fnew = objective(beta + t * db);
    }
    const double prev = f;
    if (fnew <= f) {
      beta += t * db;
      f = fnew;
    }
    trace.push_back(f);
    rel = (prev - f) / std::max(1.0, std::abs(f));
    if (t <= 1e-12 && rel <= ctl.tol) {
      const VectorXd g2 = xc.transpose() * cox_eval(xc * beta, event, o, true).grad_eta;
      fit.kkt_residual = kkt_residual(g2, beta, lambda);
      break;  // stalled
    }
  }
  fit.beta = beta;
  fit.objective = f;
  fit.objective_trace = std::move(trace);
  return fit;
}

}  // namespace

ValueGradient logistic_nll(const VectorXd& beta, double intercept, const MatrixXd& x, const VectorXd& y) {
  const Index n = x.rows();
  if (beta.size() != x.cols()) throw DimensionError("logistic_nll: beta length does not match X");
  check_binary(y, n);
  const VectorXd eta = (x * beta).array() + intercept;
  ValueGradient out;
  VectorXd resid(n);
  for (Index i = 0; i < n; ++i) {
    out.value += softplus(eta(i)) - y(i) * eta(i);
    resid(i) = sigmoid(eta(i)) - y(i);
  }
  const double nd = static_cast<double>(n);
  out.value /= nd;
  out.gradient = x.transpose() * resid / nd;
  out.intercept_gradient = resid.sum() / nd;
  return out;
}

double logistic_lambda_max(const MatrixXd& x, const VectorXd& y) {
  check_binary(y, x.rows());
  const MatrixXd xc = center_columns(x);
  const VectorXd r = y.array() - y.mean();
  return (xc.transpose() * r).cwiseAbs().maxCoeff() / static_cast<double>(x.rows());
}

GlmFit lasso_logistic(const MatrixXd& x, const VectorXd& y, double lambda, const SolverControl& ctl,
                      const GlmFit* warm_start) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (n < 2) throw PreconditionError("lasso_logistic needs at least 2 rows");
  if (!(lambda >= 0)) throw PreconditionError("lasso_logistic: lambda must be >= 0");
  check_binary(y, n);
  check_both_classes(y);
  const VectorXd xm = x.colwise().mean().transpose();
  const MatrixXd xc = x.rowwise() - xm.transpose();
  VectorXd beta = VectorXd::Zero(p);
  const double ybar = y.mean();
  double b0 = std::log(ybar / (1.0 - ybar));
  if (warm_start && warm_start->beta.size() == p) {
    beta = warm_start->beta;
    b0 = warm_start->intercept + xm.dot(beta);
  }
  const double nd = static_cast<double>(n);
  auto quad = [&](const VectorXd& b, double c0, VectorXd& w, VectorXd& z, VectorXd& grad, double& g0) {
    const VectorXd eta = (xc * b).array() + c0;
    w.resize(n);
    z.resize(n);
    VectorXd r(n);
    for (Index i = 0; i < n; ++i) {
      const double pi = sigmoid(eta(i));
      w(i) = std::max(pi * (1.0 - pi), 1e-10);
      z(i) = eta(i) + (y(i) - pi) / w(i);
      r(i) = pi - y(i);
    }
    grad = xc.transpose() * r / nd;
    g0 = r.sum() / nd;
  };
  auto objective = [&](const VectorXd& b, double c0) { return logistic_penalized(xc, y, b, c0, lambda); };
  GlmFit fit = prox_newton(xc, lambda, true, ctl, beta, b0, quad, objective);
  fit.intercept = fit.intercept - xm.dot(fit.beta);
  return fit;
}

std::vector<GlmFit> lasso_logistic_path(const MatrixXd& x, const VectorXd& y,
                                        const std::vector<double>& lambdas, const SolverControl& ctl) {
  std::vector<GlmFit> out;
  out.reserve(lambdas.size());
  for (double lam : lambdas) out.push_back(lasso_logistic(x, y, lam, ctl, out.empty() ? nullptr : &out.back()));
  return out;
}

ValueGradient cox_neg_partial_loglik(const VectorXd& beta, const MatrixXd& x, const VectorXd& time,
                                     const VectorXd& event) {
  if (beta.size() != x.cols()) throw DimensionError("cox: beta length does not match X");
  check_survival(time, event, x.rows());
  const CoxOrder o = cox_order(time);
  const CoxEval ev = cox_eval(x * beta, event, o, true);
  ValueGradient out;
  out.value = ev.value;
  out.gradient = x.transpose() * ev.grad_eta;
  return out;
}

double cox_lambda_max(const MatrixXd& x, const VectorXd& time, const VectorXd& event) {
  return cox_neg_partial_loglik(VectorXd::Zero(x.cols()), x, time, event).gradient.cwiseAbs().maxCoeff();
}

GlmFit lasso_cox(const MatrixXd& x, const VectorXd& time, const VectorXd& event, double lambda,
                 const SolverControl& ctl, const GlmFit* warm_start) {
  const Index n = x.rows();
  const Index p = x.cols();
  if (!(lambda >= 0)) throw PreconditionError("lasso_cox: lambda must be >= 0");
  check_survival(time, event, n);
  const MatrixXd xc = center_columns(x);
  const CoxOrder o = cox_order(time);
  VectorXd beta = VectorXd::Zero(p);
  if (warm_start && warm_start->beta.size() == p) beta = warm_start->beta;
  GlmFit fit = cox_prox_newton(xc, event, o, lambda, ctl, beta);
  fit.intercept = 0.0;
  return fit;
}

std::vector<GlmFit> lasso_cox_path(const MatrixXd& x, const VectorXd& time, const VectorXd& event,
                                   const std::vector<double>& lambdas, const SolverControl& ctl) {
  std::vector<GlmFit> out;
  out.reserve(lambdas.size());
  for (double lam : lambdas) out.push_back(lasso_cox(x, time, event, lam, ctl, out.empty() ? nullptr : &out.back()));
  return out;
}

namespace {

void check_full_rank(const MatrixXd& zc, const char* what) {
  Eigen::ColPivHouseholderQR<MatrixXd> qr(zc);
  qr.setThreshold(1e-10);
  if (qr.rank() < zc.cols()) {
    throw NumericalError(std::string(what) + ": reduced design is rank deficient (rank " +
                         std::to_string(qr.rank()) + " < " + std::to_string(zc.cols()) + ")");
  }
}

}  // namespace

Refit refit_linear(const MatrixXd& z, const MatrixXd& y) {
  if (z.rows() != y.rows()) throw DimensionError("linear refit: row counts differ");
  if (z.cols() > z.rows() - 2) {
    throw PreconditionError("linear refit: u = " + std::to_string(z.cols()) + " exceeds n - 2");
  }
  const VectorXd zm = z.colwise().mean().transpose();
  const VectorXd ym = y.colwise().mean().transpose();
  const MatrixXd zc = z.rowwise() - zm.transpose();
  const MatrixXd yc = y.rowwise() - ym.transpose();
  Eigen::ColPivHouseholderQR<MatrixXd> qr(zc);
  qr.setThreshold(1e-10);
  if (qr.rank() < zc.cols()) {
    throw NumericalError("linear refit: reduced design is rank deficient (rank " +
                         std::to_string(qr.rank()) + " < " + std::to_string(zc.cols()) + ")");
  }
  Refit r;
  r.coef = qr.solve(yc);
  r.intercept = ym - r.coef.transpose() * zm;
  return r;
}

Refit refit_logistic(const MatrixXd& z, const VectorXd& y) {
  const Index n = z.rows();
  const Index u = z.cols();
  check_binary(y, n);
  check_both_classes(y);
  if (u > n - 2) throw PreconditionError("logistic refit: u = " + std::to_string(u) + " exceeds n - 2");
  const VectorXd zm = z.colwise().mean().transpose();
  const MatrixXd zc = z.rowwise() - zm.transpose();
  check_full_rank(zc, "logistic refit");
  MatrixXd a(n, u + 1);
  a.col(0).setOnes();
  a.rightCols(u) = zc;
  VectorXd theta = VectorXd::Zero(u + 1);
  theta(0) = std::log(y.mean() / (1.0 - y.mean()));
  const double nd = static_cast<double>(n);
  auto nll = [&](const VectorXd& th) {
    const VectorXd eta = a * th;
    double v = 0.0;
    for (Index i = 0; i < n; ++i) v += softplus(eta(i)) - y(i) * eta(i);
    return v / nd;
  };
  double f = nll(theta);
  Refit r;
  bool converged = false;
  for (int it = 1; it <= 200; ++it) {
    r.iterations = it;
    const VectorXd eta = a * theta;
    VectorXd w(n), res(n);
    for (Index i = 0; i < n; ++i) {
      const double pi = sigmoid(eta(i));
      w(i) = pi * (1.0 - pi);
      res(i) = pi - y(i);
    }
    const VectorXd g = a.transpose() * res / nd;
    const MatrixXd h = a.transpose() * w.asDiagonal() * a / nd;
    const VectorXd step = h.ldlt().solve(g);
    double t = 1.0;
    VectorXd next = theta - step;
    double fn = nll(next);
    while (!(fn <= f) && t > 1e-10) {
      t *= 0.5;
      next = theta - t * step;
      fn = nll(next);
    }
    if (fn <= f) {
      theta = next;
      f = fn;
    }
    if (theta.tail(u).norm() > 1e3 || !theta.allFinite() || f < 1e-8) {
      throw NumericalError("logistic refit diverged (likely complete separation); try a smaller u");
    }
    if ((t * step).cwiseAbs().maxCoeff() < 1e-10 || g.cwiseAbs().maxCoeff() < 1e-12) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericalError("logistic refit did not converge; try a smaller u");
  r.coef = theta.tail(u);
  r.intercept = VectorXd::Constant(1, theta(0) - zm.dot(theta.tail(u)));
  return r;
}

namespace {

struct CoxNewton {
  double value = 0.0;
  VectorXd grad;
  MatrixXd hess;
};

CoxNewton cox_newton_terms(const VectorXd& beta, const MatrixXd& z, const VectorXd& event, const CoxOrder& o) {
  const Index n = z.rows();
  const Index u = z.cols();
  const VectorXd eta = z * beta;
  const double shift = eta.maxCoeff();
  double s0 = 0.0;
  VectorXd s1 = VectorXd::Zero(u);
  MatrixXd s2 = MatrixXd::Zero(u, u);
  CoxNewton out;
  out.grad = VectorXd::Zero(u);
  out.hess = MatrixXd::Zero(u, u);
  for (const auto& grp : o.groups) {
    for (Index k = grp.first; k < grp.second; ++k) {
      const Index i = o.desc[static_cast<std::size_t>(k)];
      const double e = std::exp(eta(i) - shift);
      s0 += e;
      s1 += e * z.row(i).transpose();
      s2 += e * z.row(i).transpose() * z.row(i);
    }
    for (Index k = grp.first; k < grp.second; ++k) {
      const Index i = o.desc[static_cast<std::size_t>(k)];
      if (event(i) != 1.0) continue;
      const VectorXd mean = s1 / s0;
      out.value -= eta(i) - (shift + std::log(s0));
      out.grad -= z.row(i).transpose() - mean;
      out.hess += s2 / s0 - mean * mean.transpose();
    }
  }
  const double nd = static_cast<double>(n);
  out.value /= nd;
  out.grad /= nd;
  out.hess /= nd;
  return out;
}

}  // namespace

Refit refit_cox(const MatrixXd& z, const VectorXd& time, const VectorXd& event) {
  const Index n = z.rows();
  const Index u = z.cols();
  check_survival(time, event, n);
  if (u > n - 2) throw PreconditionError("cox refit: u = " + std::to_string(u) + " exceeds n - 2");
  const MatrixXd zc = center_columns(z);
  check_full_rank(zc, "cox refit");
  const CoxOrder o = cox_order(time);
  VectorXd beta = VectorXd::Zero(u);
  CoxNewton cur = cox_newton_terms(beta, zc, event, o);
  Refit r;
  bool converged = false;
  for (int it = 1; it <= 200; ++it) {
    r.iterations = it;
    const VectorXd step = cur.hess.ldlt().solve(cur.grad);
    double t = 1.0;
    VectorXd next = beta - step;
    CoxNewton trial = cox_newton_terms(next, zc, event, o);
    while (!(trial.value <= cur.value) && t > 1e-10) {
      t *= 0.5;
      next = beta - t * step;
      trial = cox_newton_terms(next, zc, event, o);
    }
    const bool moved = trial.value <= cur.value;
    if (moved) {
      beta = next;
      cur = std::move(trial);
    }
    if (beta.norm() > 1e3 || !beta.allFinite()) {
      throw NumericalError("cox refit diverged (monotone likelihood); try a smaller u");
    }
    if (!moved || (t * step).cwiseAbs().maxCoeff() < 1e-10 || cur.grad.cwiseAbs().maxCoeff() < 1e-13) {
      converged = true;
      break;
    }
  }
  if (!converged) throw NumericalError("cox refit did not converge");
  r.coef = beta;
  r.intercept = VectorXd();
  return r;
}

Refit refit_unpenalized(const MatrixXd& z, const Response& response) {
  return std::visit(
      [&](const auto& resp) -> Refit {
        using T = std::decay_t<decltype(resp)>;
        if constexpr (std::is_same_v<T, ContinuousResponse>) {
          return refit_linear(z, resp.y);
        } else if constexpr (std::is_same_v<T, BinaryResponse>) {
          return refit_logistic(z, resp.y);
        } else {
          return refit_cox(z, resp.time, resp.event);
        }
      },
      response);
}

double logistic_intercept_with_offset(const VectorXd& offset, const VectorXd& y) {
  check_binary(y, offset.size());
  check_both_classes(y);
  double b = 0.0;
  for (int it = 0; it < 100; ++it) {
    double g = 0.0, h = 0.0;
    for (Index i = 0; i < y.size(); ++i) {
      const double pi = sigmoid(offset(i) + b);
      g += pi - y(i);
      h += pi * (1.0 - pi);
    }
    if (h <= 0) break;
    const double step = g / h;
    b -= step;
    if (std::abs(step) < 1e-12) break;
  }
  return b;
}

}  // namespace niece
