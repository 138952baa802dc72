#include "niece/tuning.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "niece/error.hpp"
#include "niece/parallel.hpp"
#include "niece/simgen.hpp"

namespace niece {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

}  // namespace

std::vector<Index> CvPlan::train(int fold) const {
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i)
    if (assignment[static_cast<std::size_t>(i)] != fold) out.push_back(i);
  return out;
}

std::vector<Index> CvPlan::test(int fold) const {
  std::vector<Index> out;
  for (Index i = 0; i < n; ++i)
    if (assignment[static_cast<std::size_t>(i)] == fold) out.push_back(i);
  return out;
}

CvPlan kfold_split(Index n, int folds, std::uint64_t seed) {
  if (folds < 2) throw PreconditionError("kfold_split: need at least 2 folds");
  if (folds > n) {
    throw PreconditionError("kfold_split: " + std::to_string(folds) + " folds for " + std::to_string(n) +
                            " observations");
  }
  CvPlan plan;
  plan.n = n;
  plan.folds = folds;
  std::vector<Index> perm(static_cast<std::size_t>(n));
  std::iota(perm.begin(), perm.end(), Index(0));
  Rng rng = make_rng(seed, 0, 0x6b66);
  std::shuffle(perm.begin(), perm.end(), rng);
  plan.assignment.assign(static_cast<std::size_t>(n), 0);
  for (std::size_t pos = 0; pos < perm.size(); ++pos) {
    plan.assignment[static_cast<std::size_t>(perm[pos])] = static_cast<int>(pos % static_cast<std::size_t>(folds));
  }
  return plan;
}

namespace {

double logistic_mean_nll(const VectorXd& eta, const VectorXd& y) {
  double v = 0.0;
  for (Index i = 0; i < eta.size(); ++i) {
    const double t = eta(i);
    v += (t > 0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t))) - y(i) * t;
  }
  return v / static_cast<double>(eta.size());
}

std::optional<double> holdout_cox(const VectorXd& beta, const MatrixXd& x, const SurvivalResponse& s) {
  if (s.event.sum() == 0.0) return std::nullopt;
  return cox_neg_partial_loglik(beta, x, s.time, s.event).value;
}

}  // namespace

std::optional<double> cv_loss(const EnvelopeFit& fit, const Dataset& holdout) {
  if (holdout.n() == 0) throw PreconditionError("cv_loss: empty holdout");
  switch (fit.task) {
    case Task::response_linear:
    case Task::predictor_linear:
    case Task::simultaneous_linear: {
      const auto& y = std::get<ContinuousResponse>(holdout.response).y;
      const MatrixXd pred = predict(fit, holdout.x).values;
      return (y - pred).squaredNorm() / static_cast<double>(holdout.n());
    }
    case Task::logistic: {
      const auto& y = std::get<BinaryResponse>(holdout.response).y;
      const VectorXd eta = (holdout.x * fit.coef.transpose()).col(0).array() + fit.intercept(0);
      return logistic_mean_nll(eta, y);
    }
    case Task::cox:
      return holdout_cox(fit.coef.row(0).transpose(), holdout.x, std::get<SurvivalResponse>(holdout.response));
  }
  return std::nullopt;
}

std::optional<double> prediction_loss(const EnvelopeFit& fit, const Dataset& holdout) {
  if (fit.task == Task::logistic) {
    const auto& y = std::get<BinaryResponse>(holdout.response).y;
    const Prediction pr = predict(fit, holdout.x);
    const double wrong = (pr.labels.array() != y.array()).cast<double>().sum();
    return 100.0 * wrong / static_cast<double>(holdout.n());
  }
  return cv_loss(fit, holdout);
}

std::vector<double> default_c_grid(Index p) {
  const double hi = std::sqrt(static_cast<double>(p));
  const double lo = std::min(1.1, hi);
  std::vector<double> g(8);
  for (int k = 0; k < 8; ++k) g[static_cast<std::size_t>(k)] = lo * std::pow(hi / lo, k / 7.0);
  return g;
}

std::vector<double> default_lambda_grid(double lambda_max) {
  std::vector<double> g(20);
  for (int k = 0; k < 20; ++k) g[static_cast<std::size_t>(k)] = lambda_max * std::pow(0.01, k / 19.0);
  return g;
}

Index reduction_dim(Task task, const Dataset& data) {
  if (task == Task::response_linear) return std::get<ContinuousResponse>(data.response).y.cols();
  return data.p();
}

namespace {

ReductionInputs inputs_for(Task task, const Dataset& d, const GlmFit* lasso, bool standardize_y) {
  switch (task) {
    case Task::response_linear: return response_inputs(d.x, std::get<ContinuousResponse>(d.response).y);
    case Task::predictor_linear:
    case Task::simultaneous_linear:
      return predictor_inputs(d.x, std::get<ContinuousResponse>(d.response).y, standardize_y);
    case Task::logistic:
    case Task::cox:
      if (lasso->beta.cwiseAbs().maxCoeff() == 0.0) {
        throw PreconditionError("lasso estimate is identically zero on this fold");
      }
      return glm_inputs(d.x, lasso->beta);
  }
  throw PreconditionError("unknown task");
}

GlmFit fold_lasso(Task task, const Dataset& d, double lambda) {
  if (task == Task::logistic) return lasso_logistic(d.x, std::get<BinaryResponse>(d.response).y, lambda);
  const auto& s = std::get<SurvivalResponse>(d.response);
  return lasso_cox(d.x, s.time, s.event, lambda);
}

bool is_glm(Task t) { return t == Task::logistic || t == Task::cox; }

std::size_t pick_best(const std::vector<double>& loss, const std::vector<double>& grid, bool prefer_small) {
  std::size_t best = loss.size();
  for (std::size_t k = 0; k < loss.size(); ++k) {
    if (std::isnan(loss[k])) continue;
    if (best == loss.size() || loss[k] < loss[best] ||
        (loss[k] == loss[best] && (prefer_small ? grid[k] < grid[best] : grid[k] > grid[best]))) {
      best = k;
    }
  }
  return best;
}

// Shared engine: c_values holds PMD budgets, nullopt for the dense path.
std::vector<CvTable> cv_grid(const Dataset& data, const CvSettings& cv,
                             const std::vector<std::optional<double>>& c_values,
                             const std::vector<Selection>& rules) {
  if (c_values.empty()) throw PreconditionError("cross-validation grid is empty");
  if (rules.empty()) throw PreconditionError("no selection rule given");
  for (const auto& c : c_values) {
    if (c && !(*c > 0)) throw PreconditionError("c grid values must be positive");
  }
  if (is_glm(cv.task) && !cv.lambda) throw PreconditionError("GLM cross-validation needs lambda");
  if (cv.task == Task::simultaneous_linear && !cv.y_opts) {
    throw PreconditionError("simultaneous cross-validation needs response-side options");
  }
  const CvPlan plan = kfold_split(data.n(), cv.folds, cv.seed);
  const std::size_t nf = static_cast<std::size_t>(cv.folds);
  const std::size_t ng = c_values.size();
  const std::size_t nr = rules.size();

  std::vector<Dataset> train(nf), test(nf);
  std::vector<std::optional<GlmFit>> lasso(nf);
  std::vector<std::string> fold_error(nf);
  parallel_for(nf, cv.threads, [&](std::size_t f) {
    train[f] = data.subset(plan.train(static_cast<int>(f)));
    test[f] = data.subset(plan.test(static_cast<int>(f)));
    if (is_glm(cv.task)) {
      try {
        lasso[f] = fold_lasso(cv.task, train[f], *cv.lambda);
      } catch (const std::exception& e) {
        fold_error[f] = e.what();
      }
    }
  });

  std::vector<std::optional<double>> loss(nf * ng * nr);
  std::vector<std::string> errors(nf * ng);
  parallel_for(nf * ng, cv.threads, [&](std::size_t job) {
    const std::size_t f = job / ng;
    const std::size_t g = job % ng;
    if (!fold_error[f].empty()) {
      errors[job] = fold_error[f];
      return;
    }
    try {
      ReductionOptions ox = cv.opts;
      ox.c = c_values[g];
      const ReductionInputs in = inputs_for(cv.task, train[f], lasso[f] ? &*lasso[f] : nullptr, ox.standardize_y);
      const CandidateSet cand = reduction_candidates(in, ox);
      std::optional<ReductionInputs> in_y;
      std::optional<CandidateSet> cand_y;
      ReductionOptions oy;
      if (cv.task == Task::simultaneous_linear) {
        oy = *cv.y_opts;
        oy.c = c_values[g];
        in_y = response_inputs(train[f].x, std::get<ContinuousResponse>(train[f].response).y);
        cand_y = reduction_candidates(*in_y, oy);
      }
      for (std::size_t r = 0; r < nr; ++r) {
        NieceResult red = select_components(cand, in.u_hat, ox.u, rules[r]);
        std::optional<NieceResult> red_y;
        if (cand_y) red_y = select_components(*cand_y, in_y->u_hat, oy.u, rules[r]);
        const EnvelopeFit fit = refit_envelope(cv.task, train[f], std::move(red), Estimator::constrained,
                                               std::move(red_y));
        loss[job * nr + r] = cv_loss(fit, test[f]);
      }
    } catch (const std::exception& e) {
      errors[job] = e.what();
    }
  });

  std::vector<CvTable> out(nr);
  for (std::size_t r = 0; r < nr; ++r) {
    CvTable& t = out[r];
    t.parameter = "c";
    for (std::size_t g = 0; g < ng; ++g) {
      t.grid.push_back(c_values[g] ? *c_values[g] : kNaN);
      double sum = 0.0;
      int used = 0;
      for (std::size_t f = 0; f < nf; ++f) {
        const std::size_t job = f * ng + g;
        const auto& l = loss[job * nr + r];
        if (l && std::isfinite(*l)) {
          sum += *l;
          ++used;
        } else if (errors[job].empty() && r == 0) {
          t.warnings.push_back("fold " + std::to_string(f + 1) + " skipped: holdout has no usable loss");
        }
        if (!errors[job].empty() && r == 0) {
          t.warnings.push_back("fold " + std::to_string(f + 1) + ", grid point " + std::to_string(g + 1) +
                               " failed: " + errors[job]);
        }
      }
      t.folds_used.push_back(used);
      t.mean_loss.push_back(used > 0 ? sum / used : kNaN);
    }
    // The dense path sorts as c = +inf for the tie rule.
    std::vector<double> key(t.grid);
    for (double& k : key)
      if (std::isnan(k)) k = std::numeric_limits<double>::infinity();
    t.best = pick_best(t.mean_loss, key, true);
    if (t.best == t.mean_loss.size()) {
      std::string why = "cross-validation failed at every grid point";
      for (const auto& e : errors)
        if (!e.empty()) {
          why += ": " + e;
          break;
        }
      throw NumericalError(why);
    }
  }
  return out;
}

}  // namespace

std::vector<CvTable> select_c_rules(const Dataset& data, const CvSettings& cv,
                                    const std::vector<double>& c_grid,
                                    const std::vector<Selection>& rules) {
  const double cmax = std::sqrt(static_cast<double>(reduction_dim(cv.task, data)));
  std::vector<std::optional<double>> values;
  for (double c : c_grid) {
    if (!(c >= 1.0) || c > cmax * (1 + 1e-12)) {
      throw PreconditionError("c grid value " + std::to_string(c) + " lies outside [1, sqrt(dim) = " +
                              std::to_string(cmax) + "]");
    }
    values.emplace_back(c);
  }
  return cv_grid(data, cv, values, rules);
}

CvTable select_c(const Dataset& data, const CvSettings& cv, const std::vector<double>& c_grid) {
  return select_c_rules(data, cv, c_grid, {cv.opts.selection}).front();
}

CvTable select_lambda(const Dataset& data, Task task, std::vector<double> grid, int folds,
                      std::uint64_t seed, int threads) {
  if (!is_glm(task)) throw PreconditionError("select_lambda applies to logistic and Cox tasks");
  data.validate();
  if (grid.empty()) {
    double lmax = 0.0;
    if (task == Task::logistic) {
      lmax = logistic_lambda_max(data.x, std::get<BinaryResponse>(data.response).y);
    } else {
      const auto& s = std::get<SurvivalResponse>(data.response);
      lmax = cox_lambda_max(data.x, s.time, s.event);
    }
    grid = default_lambda_grid(lmax);
  }
  for (double l : grid) {
    if (!(l > 0)) throw PreconditionError("lambda grid values must be positive");
  }
  std::vector<std::size_t> order(grid.size());
  std::iota(order.begin(), order.end(), std::size_t(0));
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return grid[a] > grid[b]; });
  std::vector<double> sorted;
  for (std::size_t k : order) sorted.push_back(grid[k]);

  const CvPlan plan = kfold_split(data.n(), folds, seed);
  const std::size_t nf = static_cast<std::size_t>(folds);
  const std::size_t ng = sorted.size();
  std::vector<std::optional<double>> loss(nf * ng);
  std::vector<std::string> errors(nf);
  parallel_for(nf, threads, [&](std::size_t f) {
    try {
      const Dataset tr = data.subset(plan.train(static_cast<int>(f)));
      const Dataset te = data.subset(plan.test(static_cast<int>(f)));
      if (task == Task::logistic) {
        const auto& y = std::get<BinaryResponse>(tr.response).y;
        const auto path = lasso_logistic_path(tr.x, y, sorted);
        const auto& yt = std::get<BinaryResponse>(te.response).y;
        for (std::size_t g = 0; g < ng; ++g) {
          const VectorXd eta = (te.x * path[g].beta).array() + path[g].intercept;
          loss[f * ng + g] = logistic_mean_nll(eta, yt);
        }
      } else {
        const auto& s = std::get<SurvivalResponse>(tr.response);
        const auto path = lasso_cox_path(tr.x, s.time, s.event, sorted);
        for (std::size_t g = 0; g < ng; ++g) {
          loss[f * ng + g] = holdout_cox(path[g].beta, te.x, std::get<SurvivalResponse>(te.response));
        }
      }
    } catch (const std::exception& e) {
      errors[f] = e.what();
    }
  });
  CvTable t;
  t.parameter = "lambda";
  t.grid = sorted;
  for (std::size_t f = 0; f < nf; ++f) {
    if (!errors[f].empty()) t.warnings.push_back("fold " + std::to_string(f + 1) + " failed: " + errors[f]);
    else if (!loss[f * ng]) t.warnings.push_back("fold " + std::to_string(f + 1) + " skipped: holdout has no events");
  }
  for (std::size_t g = 0; g < ng; ++g) {
    double sum = 0.0;
    int used = 0;
    for (std::size_t f = 0; f < nf; ++f) {
      const auto& l = loss[f * ng + g];
      if (l && std::isfinite(*l)) {
        sum += *l;
        ++used;
      }
    }
    t.folds_used.push_back(used);
    t.mean_loss.push_back(used > 0 ? sum / used : kNaN);
  }
  t.best = pick_best(t.mean_loss, t.grid, false);
  if (t.best == t.mean_loss.size()) throw NumericalError("lambda cross-validation failed in every fold");
  return t;
}

UCurve select_u(const Dataset& data, const CvSettings& cv, const std::vector<Index>& u_grid,
                const std::vector<double>& c_grid) {
  if (u_grid.empty()) throw PreconditionError("u grid is empty");
  const Index dim = reduction_dim(cv.task, data);
  const Index n = data.n();
  const Index n_train = n - (n + cv.folds - 1) / cv.folds;
  UCurve curve;
  curve.u_grid = u_grid;
  for (Index u : u_grid) {
    if (u < 1 || u > std::min(n - 2, dim)) {
      throw PreconditionError("u = " + std::to_string(u) + " outside [1, min(n - 2, dim) = " +
                              std::to_string(std::min(n - 2, dim)) + "]");
    }
    CvSettings s = cv;
    s.opts.u = u;
    s.opts.d = std::max(u, std::min({2 * u, n_train - 1, dim}));
    CvTable t = c_grid.empty() ? cv_grid(data, s, {std::nullopt}, {s.opts.selection}).front()
                               : select_c(data, s, c_grid);
    curve.loss.push_back(t.best_loss());
    curve.chosen_c.push_back(t.best_value());
    for (auto& w : t.warnings) curve.warnings.push_back("u = " + std::to_string(u) + ": " + w);
  }
  std::vector<double> key(u_grid.begin(), u_grid.end());
  curve.best = pick_best(curve.loss, key, true);
  return curve;
}

}  // namespace niece
