#include "niece/envelope.hpp"

#include <cmath>
#include <string>

#include "niece/error.hpp"

namespace niece {

const char* to_string(Task t) {
  switch (t) {
    case Task::response_linear: return "response";
    case Task::predictor_linear: return "predictor";
    case Task::simultaneous_linear: return "simultaneous";
    case Task::logistic: return "logistic";
    case Task::cox: return "cox";
  }
  return "unknown";
}

std::optional<Task> parse_task(const std::string& s) {
  for (Task t : {Task::response_linear, Task::predictor_linear, Task::simultaneous_linear,
                 Task::logistic, Task::cox}) {
    if (s == to_string(t)) return t;
  }
  return std::nullopt;
}

void Dataset::validate() const {
  const Index rows = x.rows();
  if (rows == 0 || x.cols() == 0) throw PreconditionError("dataset: predictor matrix is empty");
  if (!x.allFinite()) throw PreconditionError("dataset: predictors contain non-finite entries");
  if (!x_names.empty() && static_cast<Index>(x_names.size()) != x.cols()) {
    throw DimensionError("dataset: " + std::to_string(x_names.size()) + " predictor names for " +
                         std::to_string(x.cols()) + " columns");
  }
  auto check_rows = [&](Index m, const char* what) {
    if (m != rows) {
      throw DimensionError(std::string("dataset: ") + what + " has " + std::to_string(m) +
                           " rows, predictors have " + std::to_string(rows));
    }
  };
  if (const auto* c = std::get_if<ContinuousResponse>(&response)) {
    check_rows(c->y.rows(), "response");
    if (c->y.cols() == 0) throw PreconditionError("dataset: response matrix has no columns");
    if (!c->y.allFinite()) throw PreconditionError("dataset: response contains non-finite entries");
    if (!y_names.empty() && static_cast<Index>(y_names.size()) != c->y.cols()) {
      throw DimensionError("dataset: response names do not match response columns");
    }
  } else if (const auto* b = std::get_if<BinaryResponse>(&response)) {
    check_rows(b->y.size(), "label vector");
    for (Index i = 0; i < rows; ++i) {
      if (b->y(i) != 0.0 && b->y(i) != 1.0) {
        throw PreconditionError("dataset: label at row " + std::to_string(i) + " is not 0/1");
      }
    }
  } else {
    const auto& s = std::get<SurvivalResponse>(response);
    check_rows(s.time.size(), "time vector");
    check_rows(s.event.size(), "event vector");
    for (Index i = 0; i < rows; ++i) {
      if (!(s.time(i) > 0.0) || !std::isfinite(s.time(i))) {
        throw PreconditionError("dataset: survival time at row " + std::to_string(i) + " is not positive");
      }
      if (s.event(i) != 0.0 && s.event(i) != 1.0) {
        throw PreconditionError("dataset: event flag at row " + std::to_string(i) + " is not 0/1");
      }
    }
  }
}

Dataset Dataset::subset(const std::vector<Index>& rows) const {
  Dataset out;
  out.x_names = x_names;
  out.y_names = y_names;
  const Index m = static_cast<Index>(rows.size());
  out.x.resize(m, x.cols());
  for (Index i = 0; i < m; ++i) out.x.row(i) = x.row(rows[static_cast<std::size_t>(i)]);
  auto take = [&](const VectorXd& v) {
    VectorXd o(m);
    for (Index i = 0; i < m; ++i) o(i) = v(rows[static_cast<std::size_t>(i)]);
    return o;
  };
  if (const auto* c = std::get_if<ContinuousResponse>(&response)) {
    MatrixXd y(m, c->y.cols());
    for (Index i = 0; i < m; ++i) y.row(i) = c->y.row(rows[static_cast<std::size_t>(i)]);
    out.response = ContinuousResponse{std::move(y)};
  } else if (const auto* b = std::get_if<BinaryResponse>(&response)) {
    out.response = BinaryResponse{take(b->y)};
  } else {
    const auto& s = std::get<SurvivalResponse>(response);
    out.response = SurvivalResponse{take(s.time), take(s.event)};
  }
  return out;
}

namespace {

MatrixXd scaled_centered(const MatrixXd& a) {
  if (a.rows() < 3) throw PreconditionError("envelope fit needs n >= 3");
  return center_columns(a) / std::sqrt(static_cast<double>(a.rows()));
}

const MatrixXd& continuous_y(const Dataset& data, Task task) {
  const auto* c = std::get_if<ContinuousResponse>(&data.response);
  if (!c) throw PreconditionError(std::string(to_string(task)) + " envelope needs a continuous response");
  return c->y;
}

}  // namespace

ReductionInputs response_inputs(const MatrixXd& x, const MatrixXd& y) {
  ReductionInputs in;
  in.data = scaled_centered(y);
  in.u_hat = LowRankPsdd(cross_covariance(y, x));
  return in;
}

ReductionInputs predictor_inputs(const MatrixXd& x, const MatrixXd& y, bool standardize_y) {
  ReductionInputs in;
  in.data = scaled_centered(x);
  MatrixXd ys = y;
  if (standardize_y) {
    const MatrixXd yc = center_columns(y);
    for (Index j = 0; j < y.cols(); ++j) {
      const double sd = std::sqrt(yc.col(j).squaredNorm() / static_cast<double>(y.rows()));
      if (sd > 0) ys.col(j) = yc.col(j) / sd;
    }
  }
  in.u_hat = LowRankPsdd(cross_covariance(x, ys));
  return in;
}

ReductionInputs glm_inputs(const MatrixXd& x, const VectorXd& beta) {
  if (beta.size() != x.cols()) throw DimensionError("glm_inputs: beta length does not match X");
  ReductionInputs in;
  in.data = scaled_centered(x);
  in.u_hat = LowRankPsdd(MatrixXd(beta));
  return in;
}

Index resolve_d(const ReductionOptions& opts, Index n, Index dim) {
  if (opts.u < 1) throw PreconditionError("envelope dimension u must be >= 1");
  if (opts.u > dim) {
    throw PreconditionError("envelope dimension u = " + std::to_string(opts.u) +
                            " exceeds the reduced dimension " + std::to_string(dim));
  }
  const Index d = opts.d ? *opts.d : std::max(opts.u, default_d(opts.u, n, dim));
  if (d < opts.u || d > dim) {
    throw PreconditionError("d = " + std::to_string(d) + " must lie in [u = " + std::to_string(opts.u) +
                            ", " + std::to_string(dim) + "]");
  }
  return d;
}

CandidateSet reduction_candidates(const ReductionInputs& in, const ReductionOptions& opts) {
  const Index d = resolve_d(opts, in.n(), in.dim());
  if (opts.c) {
    PmdConfig cfg = opts.pmd;
    cfg.c = *opts.c;
    return sparse_candidates(in.data, d, cfg);
  }
  return dense_candidates(in.m_hat(), d);
}

NieceResult reduce(const ReductionInputs& in, const ReductionOptions& opts) {
  return select_components(reduction_candidates(in, opts), in.u_hat, opts.u, opts.selection);
}

namespace {

void record_reduction(EnvelopeFit& fit, const NieceResult& red) {
  fit.u = red.basis.cols();
  fit.d = red.candidates.cols();
  if (red.sparse) fit.c = red.c;
  fit.warnings.insert(fit.warnings.end(), red.warnings.begin(), red.warnings.end());
}

}  // namespace

EnvelopeFit refit_envelope(Task task, const Dataset& data, NieceResult reduction, Estimator estimator,
                           std::optional<NieceResult> reduction_y) {
  EnvelopeFit fit;
  fit.task = task;
  fit.estimator = estimator;
  fit.x_names = data.x_names;
  fit.y_names = data.y_names;
  record_reduction(fit, reduction);
  const MatrixXd& x = data.x;
  const MatrixXd& g = reduction.basis.matrix();
  const VectorXd xm = x.colwise().mean().transpose();

  switch (task) {
    case Task::predictor_linear: {
      const MatrixXd& y = continuous_y(data, task);
      if (g.rows() != x.cols()) throw DimensionError("predictor envelope basis does not match X");
      if (estimator == Estimator::constrained) {
        Refit r = refit_linear(x * g, y);
        fit.eta = r.coef;
        fit.coef = (g * r.coef).transpose();
        fit.intercept = r.intercept;
      } else {
        const MatrixXd full = refit_linear(x, y).coef.transpose();
        fit.eta = (full * g).transpose();
        fit.coef = full * g * g.transpose();
        fit.intercept = y.colwise().mean().transpose() - fit.coef * xm;
      }
      break;
    }
    case Task::response_linear: {
      const MatrixXd& y = continuous_y(data, task);
      if (g.rows() != y.cols()) throw DimensionError("response envelope basis does not match Y");
      if (estimator == Estimator::constrained) {
        fit.eta = refit_linear(x, y * g).coef.transpose();
        fit.coef = g * fit.eta;
      } else {
        const MatrixXd full = refit_linear(x, y).coef.transpose();
        fit.eta = g.transpose() * full;
        fit.coef = g * fit.eta;
      }
      fit.intercept = y.colwise().mean().transpose() - fit.coef * xm;
      break;
    }
    case Task::simultaneous_linear: {
      const MatrixXd& y = continuous_y(data, task);
      if (!reduction_y) throw PreconditionError("simultaneous envelope needs a response-side reduction");
      const MatrixXd& gy = reduction_y->basis.matrix();
      if (g.rows() != x.cols() || gy.rows() != y.cols()) {
        throw DimensionError("simultaneous envelope bases do not match the data");
      }
      if (estimator == Estimator::constrained) {
        fit.eta = refit_linear(x * g, y * gy).coef.transpose();
      } else {
        fit.eta = gy.transpose() * refit_linear(x, y).coef.transpose() * g;
      }
      fit.coef = gy * fit.eta * g.transpose();
      fit.intercept = y.colwise().mean().transpose() - fit.coef * xm;
      fit.u_y = reduction_y->basis.cols();
      fit.d_y = reduction_y->candidates.cols();
      if (reduction_y->sparse) fit.c_y = reduction_y->c;
      fit.warnings.insert(fit.warnings.end(), reduction_y->warnings.begin(), reduction_y->warnings.end());
      break;
    }
    case Task::logistic:
    case Task::cox: {
      if (g.rows() != x.cols()) throw DimensionError("envelope basis does not match X");
      if (task == Task::logistic && !is_binary(data)) {
        throw PreconditionError("logistic envelope needs a binary response");
      }
      if (task == Task::cox && !is_survival(data)) {
        throw PreconditionError("cox envelope needs a survival response");
      }
      if (estimator == Estimator::constrained) {
        Refit r = refit_unpenalized(x * g, data.response);
        fit.eta = r.coef;
        fit.coef = (g * r.coef).transpose();
        fit.intercept = r.intercept;
      } else {
        const Refit full = refit_unpenalized(x, data.response);
        fit.eta = g.transpose() * full.coef;
        fit.coef = (g * fit.eta).transpose();
        if (task == Task::logistic) {
          const VectorXd offset = x * fit.coef.transpose();
          fit.intercept = VectorXd::Constant(
              1, logistic_intercept_with_offset(offset, std::get<BinaryResponse>(data.response).y));
        }
      }
      break;
    }
  }
  fit.reduction = std::move(reduction);
  fit.reduction_y = std::move(reduction_y);
  return fit;
}

EnvelopeFit response_envelope(const Dataset& data, const ReductionOptions& opts, Estimator estimator) {
  data.validate();
  const MatrixXd& y = continuous_y(data, Task::response_linear);
  return refit_envelope(Task::response_linear, data, reduce(response_inputs(data.x, y), opts), estimator);
}

EnvelopeFit predictor_envelope(const Dataset& data, const ReductionOptions& opts, Estimator estimator) {
  data.validate();
  const MatrixXd& y = continuous_y(data, Task::predictor_linear);
  return refit_envelope(Task::predictor_linear, data,
                        reduce(predictor_inputs(data.x, y, opts.standardize_y), opts), estimator);
}

EnvelopeFit simultaneous_envelope(const Dataset& data, const ReductionOptions& x_opts,
                                  const ReductionOptions& y_opts, Estimator estimator) {
  data.validate();
  const MatrixXd& y = continuous_y(data, Task::simultaneous_linear);
  NieceResult rx = reduce(predictor_inputs(data.x, y, x_opts.standardize_y), x_opts);
  NieceResult ry = reduce(response_inputs(data.x, y), y_opts);
  return refit_envelope(Task::simultaneous_linear, data, std::move(rx), estimator, std::move(ry));
}

namespace {

EnvelopeFit glm_envelope(Task task, const Dataset& data, const ReductionOptions& opts,
                         const GlmFit& lasso, Estimator estimator) {
  if (lasso.beta.size() != data.p()) throw DimensionError("lasso estimate does not match X");
  if (lasso.beta.cwiseAbs().maxCoeff() == 0.0) {
    throw PreconditionError("lasso estimate is identically zero at lambda = " +
                            std::to_string(lasso.lambda) +
                            "; U = 0 carries no envelope information, use a smaller lambda");
  }
  EnvelopeFit fit = refit_envelope(task, data, reduce(glm_inputs(data.x, lasso.beta), opts), estimator);
  fit.lambda = lasso.lambda;
  fit.lasso_beta = lasso.beta;
  if (!lasso.converged) {
    fit.warnings.push_back("lasso for U did not reach the KKT tolerance (residual " +
                           std::to_string(lasso.kkt_residual) + ")");
  }
  return fit;
}

}  // namespace

EnvelopeFit logistic_envelope(const Dataset& data, const ReductionOptions& opts, double lambda,
                              Estimator estimator) {
  data.validate();
  const auto* b = std::get_if<BinaryResponse>(&data.response);
  if (!b) throw PreconditionError("logistic envelope needs a binary response");
  return glm_envelope(Task::logistic, data, opts, lasso_logistic(data.x, b->y, lambda), estimator);
}

EnvelopeFit logistic_envelope(const Dataset& data, const ReductionOptions& opts, const GlmFit& lasso,
                              Estimator estimator) {
  data.validate();
  return glm_envelope(Task::logistic, data, opts, lasso, estimator);
}

EnvelopeFit cox_envelope(const Dataset& data, const ReductionOptions& opts, double lambda,
                         Estimator estimator) {
  data.validate();
  const auto* s = std::get_if<SurvivalResponse>(&data.response);
  if (!s) throw PreconditionError("cox envelope needs a survival response");
  return glm_envelope(Task::cox, data, opts, lasso_cox(data.x, s->time, s->event, lambda), estimator);
}

EnvelopeFit cox_envelope(const Dataset& data, const ReductionOptions& opts, const GlmFit& lasso,
                         Estimator estimator) {
  data.validate();
  return glm_envelope(Task::cox, data, opts, lasso, estimator);
}

EnvelopeFit fit_envelope(Task task, const Dataset& data, const ReductionOptions& opts,
                         std::optional<double> lambda, const ReductionOptions* y_opts,
                         Estimator estimator) {
  switch (task) {
    case Task::response_linear: return response_envelope(data, opts, estimator);
    case Task::predictor_linear: return predictor_envelope(data, opts, estimator);
    case Task::simultaneous_linear:
      if (!y_opts) throw PreconditionError("simultaneous envelope needs response-side options");
      return simultaneous_envelope(data, opts, *y_opts, estimator);
    case Task::logistic:
      if (!lambda) throw PreconditionError("logistic envelope needs a lasso lambda");
      return logistic_envelope(data, opts, *lambda, estimator);
    case Task::cox:
      if (!lambda) throw PreconditionError("cox envelope needs a lasso lambda");
      return cox_envelope(data, opts, *lambda, estimator);
  }
  throw PreconditionError("unknown task");
}

Prediction predict(const EnvelopeFit& fit, const MatrixXd& x_new) {
  if (x_new.cols() != fit.coef.cols()) {
    throw DimensionError("predict: new data has " + std::to_string(x_new.cols()) +
                         " columns, the fit expects " + std::to_string(fit.coef.cols()));
  }
  Prediction out;
  const MatrixXd lin = x_new * fit.coef.transpose();
  switch (fit.task) {
    case Task::response_linear:
    case Task::predictor_linear:
    case Task::simultaneous_linear:
      out.values = lin.rowwise() + fit.intercept.transpose();
      break;
    case Task::logistic: {
      const double b0 = fit.intercept.size() ? fit.intercept(0) : 0.0;
      out.values = lin.array() + b0;
      out.values = out.values.unaryExpr([](double t) {
        return t >= 0 ? 1.0 / (1.0 + std::exp(-t)) : std::exp(t) / (1.0 + std::exp(t));
      });
      out.labels = (out.values.col(0).array() >= 0.5).cast<double>();
      break;
    }
    case Task::cox:
      out.values = lin;
      break;
  }
  return out;
}

}  // namespace niece
