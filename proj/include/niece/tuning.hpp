#pragma once

// K-fold cross-validation for the PMD budget c, the lasso penalty lambda and the
// envelope dimension u.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "niece/envelope.hpp"

namespace niece {

struct CvPlan {
  Index n = 0;
  int folds = 5;
  std::vector<int> assignment;  // fold label of each row

  std::vector<Index> train(int fold) const;
  std::vector<Index> test(int fold) const;
};

/// Seeded shuffle, then fold = position mod K. Fold sizes differ by at most one.
CvPlan kfold_split(Index n, int folds, std::uint64_t seed);

/// Held-out loss of a fitted model: mean squared prediction error ||y - yhat||^2 per
/// row (linear), mean negative log-likelihood (logistic), or the negative partial
/// log-likelihood over the holdout risk sets (Cox; nullopt when the holdout has no
/// events).
std::optional<double> cv_loss(const EnvelopeFit& fit, const Dataset& holdout);

/// Loss reported by the predict command: PMSE, misclassification percentage, or the
/// holdout negative partial log-likelihood.
std::optional<double> prediction_loss(const EnvelopeFit& fit, const Dataset& holdout);

struct CvTable {
  std::string parameter;          // "c", "lambda" or "u"
  std::vector<double> grid;       // NaN marks the dense (no c) path
  std::vector<double> mean_loss;  // NaN where every fold failed
  std::vector<int> folds_used;
  std::size_t best = 0;
  std::vector<std::string> warnings;

  double best_value() const { return grid.at(best); }
  double best_loss() const { return mean_loss.at(best); }
};

struct CvSettings {
  Task task = Task::predictor_linear;
  ReductionOptions opts;                   // u, d, PMD settings; c is taken from the grid
  std::optional<ReductionOptions> y_opts;  // simultaneous fits: response side (shares c)
  std::optional<double> lambda;            // logistic / Cox
  int folds = 5;
  std::uint64_t seed = 20240101;
  int threads = 1;
};

/// 8 geometric points from 1.1 to sqrt(p).
std::vector<double> default_c_grid(Index p);
/// 20 log-spaced points from lambda_max down to 0.01 lambda_max.
std::vector<double> default_lambda_grid(double lambda_max);

/// Reduction dimension searched by c: p for predictor-side and GLM tasks, r for the
/// response side.
Index reduction_dim(Task task, const Dataset& data);

/// CV over c. Each (fold, c) runs the full SNIECE pipeline; ties go to the smaller c.
CvTable select_c(const Dataset& data, const CvSettings& cv, const std::vector<double>& c_grid);

/// As select_c for several selection rules sharing the PMD candidates of each
/// (fold, c). Returns one table per rule.
std::vector<CvTable> select_c_rules(const Dataset& data, const CvSettings& cv,
                                    const std::vector<double>& c_grid,
                                    const std::vector<Selection>& rules);

/// Plain-lasso CV deviance over a decreasing lambda grid (empty: default grid). Ties
/// go to the larger lambda.
CvTable select_lambda(const Dataset& data, Task task, std::vector<double> lambda_grid, int folds,
                      std::uint64_t seed, int threads = 1);

struct UCurve {
  std::vector<Index> u_grid;
  std::vector<double> loss;
  std::vector<double> chosen_c;  // NaN on the dense path
  std::size_t best = 0;
  std::vector<std::string> warnings;

  Index best_u() const { return u_grid.at(best); }
};

/// CV over u with d = min(2u, n_train - 1, dim). With a non-empty c grid, c is
/// re-selected at every u and the curve holds the loss at that c.
UCurve select_u(const Dataset& data, const CvSettings& cv, const std::vector<Index>& u_grid,
                const std::vector<double>& c_grid = {});

}  // namespace niece
