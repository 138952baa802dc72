#pragma once

// Envelope regression models. Each adapter builds the pair (M, U) for its task,
// estimates the envelope basis with NIECE (dense) or SNIECE (when a PMD budget c is
// given), refits the working model on the reduced data and maps the coefficients back.
//
// Coefficient matrices are always responses x predictors: r x p for the linear tasks,
// 1 x p for logistic and Cox.

#include <optional>
#include <string>
#include <vector>

#include "niece/dataset.hpp"
#include "niece/niece.hpp"
#include "niece/sparse_glm.hpp"

namespace niece {

enum class Task { response_linear, predictor_linear, simultaneous_linear, logistic, cox };

const char* to_string(Task t);
std::optional<Task> parse_task(const std::string& s);

enum class Estimator {
  constrained,  // refit on the reduced data, beta = Gamma eta
  projected,    // project the full-space estimator onto the envelope
};

struct ReductionOptions {
  Index u = 1;
  std::optional<Index> d;     // default min(2u, n - 1, dim)
  std::optional<double> c;    // PMD L1 budget; enables the sparse path
  Selection selection = Selection::envelope_score;
  PmdConfig pmd;
  bool standardize_y = false; // predictor side: scale Y columns before forming U
};

/// Everything the selection step needs: `data` is the centered data matrix scaled by
/// 1/sqrt(n), so data^T data = M; `u_hat` is U in factored form.
struct ReductionInputs {
  MatrixXd data;
  LowRankPsdd u_hat;

  SymmetricMatrixd m_hat() const { return SymmetricMatrixd(data.transpose() * data); }
  Index n() const { return data.rows(); }
  Index dim() const { return data.cols(); }
};

/// M = Sigma_Y, U = Sigma_YX Sigma_XY.
ReductionInputs response_inputs(const MatrixXd& x, const MatrixXd& y);
/// M = Sigma_X, U = Sigma_XY Sigma_YX.
ReductionInputs predictor_inputs(const MatrixXd& x, const MatrixXd& y, bool standardize_y = false);
/// M = Sigma_X, U = beta beta^T.
ReductionInputs glm_inputs(const MatrixXd& x, const VectorXd& beta);

Index resolve_d(const ReductionOptions& opts, Index n, Index dim);

CandidateSet reduction_candidates(const ReductionInputs& in, const ReductionOptions& opts);
NieceResult reduce(const ReductionInputs& in, const ReductionOptions& opts);

struct EnvelopeFit {
  Task task = Task::predictor_linear;
  Estimator estimator = Estimator::constrained;
  NieceResult reduction;                   // predictor side for simultaneous fits
  std::optional<NieceResult> reduction_y;  // response side of a simultaneous fit
  MatrixXd eta;
  MatrixXd coef;       // beta_env
  VectorXd intercept;  // r entries (linear), 1 (logistic), empty (Cox)
  Index u = 0, d = 0;
  std::optional<double> c;
  Index u_y = 0, d_y = 0;
  std::optional<double> c_y;
  std::optional<double> lambda;  // lasso penalty behind U (logistic, Cox)
  VectorXd lasso_beta;
  std::vector<std::string> x_names, y_names;
  std::vector<std::string> warnings;

  const Basisd& basis() const { return reduction.basis; }
  Index p() const { return coef.cols(); }
  Index r() const { return coef.rows(); }
};

/// Refit step shared by all adapters. For simultaneous fits `reduction` is the
/// predictor side and `reduction_y` the response side.
EnvelopeFit refit_envelope(Task task, const Dataset& data, NieceResult reduction,
                           Estimator estimator = Estimator::constrained,
                           std::optional<NieceResult> reduction_y = std::nullopt);

EnvelopeFit response_envelope(const Dataset& data, const ReductionOptions& opts,
                              Estimator estimator = Estimator::constrained);
EnvelopeFit predictor_envelope(const Dataset& data, const ReductionOptions& opts,
                               Estimator estimator = Estimator::constrained);
EnvelopeFit simultaneous_envelope(const Dataset& data, const ReductionOptions& x_opts,
                                  const ReductionOptions& y_opts,
                                  Estimator estimator = Estimator::constrained);
EnvelopeFit logistic_envelope(const Dataset& data, const ReductionOptions& opts, double lambda,
                              Estimator estimator = Estimator::constrained);
EnvelopeFit logistic_envelope(const Dataset& data, const ReductionOptions& opts, const GlmFit& lasso,
                              Estimator estimator = Estimator::constrained);
EnvelopeFit cox_envelope(const Dataset& data, const ReductionOptions& opts, double lambda,
                         Estimator estimator = Estimator::constrained);
EnvelopeFit cox_envelope(const Dataset& data, const ReductionOptions& opts, const GlmFit& lasso,
                         Estimator estimator = Estimator::constrained);

/// Dispatch on `task`. `lambda` is required for logistic and Cox; `y_opts` is used by
/// simultaneous fits only.
EnvelopeFit fit_envelope(Task task, const Dataset& data, const ReductionOptions& opts,
                         std::optional<double> lambda = std::nullopt,
                         const ReductionOptions* y_opts = nullptr,
                         Estimator estimator = Estimator::constrained);

struct Prediction {
  MatrixXd values;  // m x r fitted responses, m x 1 probabilities, or m x 1 risk scores
  VectorXd labels;  // logistic only: 1 when probability >= 0.5
};

Prediction predict(const EnvelopeFit& fit, const MatrixXd& x_new);

}  // namespace niece
