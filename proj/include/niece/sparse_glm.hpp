#pragma once

// L1-penalized logistic and Cox regression used to form U = beta beta^T, plus the
// unpenalized refits applied on envelope-reduced designs. Objectives follow the
// (1/n) loss + lambda ||beta||_1 convention.

#include <vector>

#include "niece/dataset.hpp"
#include "niece/linalg.hpp"

namespace niece {

struct GlmFit {
  VectorXd beta;
  double intercept = 0.0;  // logistic only
  double lambda = 0.0;
  double objective = 0.0;
  double kkt_residual = 0.0;
  int iterations = 0;
  bool converged = false;
  std::vector<double> objective_trace;  // penalized objective after each outer iteration
};

struct ValueGradient {
  double value = 0.0;
  VectorXd gradient;               // with respect to beta
  double intercept_gradient = 0.0; // logistic only
};

struct SolverControl {
  double tol = 1e-10;      // relative objective change between outer iterations
  double kkt_tol = 1e-7;   // convergence requires the KKT residual below this
  int max_iters = 1000;    // outer (quadratic approximation) iterations
  int max_sweeps = 100000; // coordinate-descent sweeps per quadratic approximation
};

/// (1/n) sum [log(1 + exp(eta_i)) - y_i eta_i], eta = intercept + X beta.
ValueGradient logistic_nll(const VectorXd& beta, double intercept, const MatrixXd& x,
                           const VectorXd& y);

/// ||X_c^T (y - ybar)||_inf / n: the smallest lambda with an all-zero solution.
double logistic_lambda_max(const MatrixXd& x, const VectorXd& y);

/// Lasso logistic regression (unpenalized intercept) by coordinate descent on IRLS
/// quadratic approximations, with backtracking on the penalized objective.
GlmFit lasso_logistic(const MatrixXd& x, const VectorXd& y, double lambda,
                      const SolverControl& ctl = {}, const GlmFit* warm_start = nullptr);

/// Warm-started fits along a (typically decreasing) lambda sequence.
std::vector<GlmFit> lasso_logistic_path(const MatrixXd& x, const VectorXd& y,
                                        const std::vector<double>& lambdas,
                                        const SolverControl& ctl = {});

/// Negative log partial likelihood with Breslow ties, scaled by 1/n.
ValueGradient cox_neg_partial_loglik(const VectorXd& beta, const MatrixXd& x, const VectorXd& time,
                                     const VectorXd& event);

/// ||gradient at beta = 0||_inf.
double cox_lambda_max(const MatrixXd& x, const VectorXd& time, const VectorXd& event);

GlmFit lasso_cox(const MatrixXd& x, const VectorXd& time, const VectorXd& event, double lambda,
                 const SolverControl& ctl = {}, const GlmFit* warm_start = nullptr);

std::vector<GlmFit> lasso_cox_path(const MatrixXd& x, const VectorXd& time, const VectorXd& event,
                                   const std::vector<double>& lambdas, const SolverControl& ctl = {});

/// Unpenalized refit on a reduced design Z (n x u). `coef` is u x r (r = 1 for
/// logistic and Cox); `intercept` has r entries for linear, 1 for logistic, 0 for Cox.
struct Refit {
  MatrixXd coef;
  VectorXd intercept;
  int iterations = 0;
};

Refit refit_unpenalized(const MatrixXd& z, const Response& response);

Refit refit_linear(const MatrixXd& z, const MatrixXd& y);
Refit refit_logistic(const MatrixXd& z, const VectorXd& y);
Refit refit_cox(const MatrixXd& z, const VectorXd& time, const VectorXd& event);

/// Newton-Raphson for the logistic intercept with a fixed offset.
double logistic_intercept_with_offset(const VectorXd& offset, const VectorXd& y);

}  // namespace niece
