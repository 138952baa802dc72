// niece: fit envelope regressions on CSV data, predict, and run the simulation and
// Wishart benchmarks.
//
// Exit codes: 0 success, 2 input/parse errors, 3 numerical failures, 4 more than 10%
// of simulation replicates failed.

#include <cmath>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "niece/envelope.hpp"
#include "niece/error.hpp"
#include "niece/io.hpp"
#include "niece/parallel.hpp"
#include "niece/simulate.hpp"
#include "niece/tuning.hpp"

namespace {

using namespace niece;
using nlohmann::ordered_json;

constexpr std::uint64_t kDefaultSeed = 20240101;

struct FitArgs {
  std::string data, task, out_prefix = "niece_fit", estimator = "constrained";
  std::vector<std::string> response, predictors;
  std::string time, event;
  Index u = 0, d = 0, u_y = 0, d_y = 0;
  std::optional<double> c, lambda;
  bool c_cv = false, standardize_y = false;
  std::vector<Index> u_grid;
  std::vector<double> c_grid;
  int folds = 5, threads = 0;
  std::uint64_t seed = kDefaultSeed;
};

struct PredictArgs {
  std::string fit, data, out_prefix = "niece_predict";
  std::vector<std::string> response;
  std::string time, event;
};

struct SimulateArgs {
  std::string model = "M1", out_prefix = "niece_sim";
  int cov = 1, folds = 5, threads = 0;
  Index n = 200, p = 400, q = 0, u = 3, s = 10, d = 10;
  std::size_t replicates = 50;
  std::vector<double> c_grid;
  bool no_dense = false, no_sparse = false;
  std::uint64_t seed = kDefaultSeed;
};

struct BenchArgs {
  std::string out_prefix = "niece_bench";
  Index n = 200, p = 100, d = 0;
  std::vector<double> delta_u{0.01, 1.0, 100.0};
  std::size_t replicates = 100;
  int threads = 0;
  std::uint64_t seed = kDefaultSeed;
};

ordered_json num(double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); }

ordered_json table_json(const CvTable& t) {
  ordered_json j;
  j["parameter"] = t.parameter;
  ordered_json rows = ordered_json::array();
  for (std::size_t k = 0; k < t.grid.size(); ++k) {
    rows.push_back({{"value", num(t.grid[k])}, {"mean_loss", num(t.mean_loss[k])}, {"folds_used", t.folds_used[k]}});
  }
  j["grid"] = rows;
  j["chosen"] = num(t.best_value());
  j["warnings"] = t.warnings;
  return j;
}

ColumnRoles roles_of(const std::vector<std::string>& response, const std::string& time, const std::string& event,
                     const std::vector<std::string>& predictors = {}) {
  ColumnRoles r;
  r.response = response;
  r.time = time;
  r.event = event;
  r.predictors = predictors;
  return r;
}

int cmd_fit(const FitArgs& a) {
  const auto task = parse_task(a.task);
  if (!task) throw InputError("unknown --task '" + a.task + "' (response, predictor, simultaneous, logistic, cox)");
  const CsvTable table = read_csv(a.data);
  const Dataset data = dataset_from_table(table, *task, roles_of(a.response, a.time, a.event, a.predictors));
  const int threads = resolve_threads(a.threads);
  const Estimator est = a.estimator == "projected" ? Estimator::projected : Estimator::constrained;
  if (a.estimator != "projected" && a.estimator != "constrained") {
    throw InputError("--estimator must be 'constrained' or 'projected'");
  }
  ordered_json cv_json = ordered_json::object();

  std::optional<double> lambda = a.lambda;
  if ((*task == Task::logistic || *task == Task::cox) && !lambda) {
    const CvTable lt = select_lambda(data, *task, {}, a.folds, a.seed, threads);
    lambda = lt.best_value();
    cv_json["lambda"] = table_json(lt);
  }

  ReductionOptions opts;
  opts.standardize_y = a.standardize_y;
  if (a.d > 0) opts.d = a.d;
  opts.c = a.c;
  std::optional<ReductionOptions> y_opts;
  if (*task == Task::simultaneous_linear) {
    ReductionOptions oy;
    oy.u = a.u_y;
    if (a.d_y > 0) oy.d = a.d_y;
    oy.c = a.c;
    if (oy.u < 1) throw InputError("simultaneous task needs --u-y");
    y_opts = oy;
  }
  CvSettings cv;
  cv.task = *task;
  cv.lambda = lambda;
  cv.y_opts = y_opts;
  cv.folds = a.folds;
  cv.seed = a.seed;
  cv.threads = threads;
  const bool cv_c = a.c_cv || !a.c_grid.empty();
  const std::vector<double> c_grid =
      !a.c_grid.empty() ? a.c_grid : (a.c_cv ? default_c_grid(reduction_dim(*task, data)) : std::vector<double>{});

  if (!a.u_grid.empty()) {
    cv.opts = opts;
    const UCurve curve = select_u(data, cv, a.u_grid, c_grid);
    opts.u = curve.best_u();
    opts.d = std::nullopt;
    if (std::isfinite(curve.chosen_c[curve.best])) opts.c = curve.chosen_c[curve.best];
    ordered_json uj;
    ordered_json rows = ordered_json::array();
    std::string csv = "u,cv_loss,c\n";
    for (std::size_t k = 0; k < curve.u_grid.size(); ++k) {
      rows.push_back({{"u", curve.u_grid[k]}, {"mean_loss", num(curve.loss[k])}, {"c", num(curve.chosen_c[k])}});
      csv += std::to_string(curve.u_grid[k]) + "," + format_double(curve.loss[k]) + "," +
             format_double(curve.chosen_c[k]) + "\n";
    }
    uj["grid"] = rows;
    uj["chosen"] = opts.u;
    uj["warnings"] = curve.warnings;
    cv_json["u"] = uj;
    write_text(a.out_prefix + "_u_curve.csv", csv);
  } else {
    if (a.u < 1) throw InputError("--u (or --u-grid) is required");
    opts.u = a.u;
    if (cv_c) {
      cv.opts = opts;
      const CvTable ct = select_c(data, cv, c_grid);
      opts.c = ct.best_value();
      cv_json["c"] = table_json(ct);
    }
  }
  if (y_opts) y_opts->c = opts.c;

  const EnvelopeFit fit = fit_envelope(*task, data, opts, lambda, y_opts ? &*y_opts : nullptr, est);
  ordered_json extra;
  extra["seed"] = a.seed;
  extra["folds"] = a.folds;
  extra["cv"] = cv_json;
  save_fit(a.out_prefix + ".json", fit, extra);
  write_text(a.out_prefix + "_coef.csv", coefficients_csv(fit));
  for (const auto& w : fit.warnings) std::cerr << "warning: " << w << "\n";
  std::cout << "fit written to " << a.out_prefix << ".json and " << a.out_prefix << "_coef.csv\n";
  return 0;
}

int cmd_predict(const PredictArgs& a) {
  const EnvelopeFit fit = load_fit(a.fit);
  const CsvTable table = read_csv(a.data);
  std::vector<std::string> missing;
  for (const auto& n : fit.x_names)
    if (!table.has(n)) missing.push_back(n);
  if (!missing.empty()) {
    std::string msg = "new data lacks predictor column(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw InputError(msg);
  }
  const MatrixXd x = table.columns(fit.x_names);
  const Prediction pr = predict(fit, x);

  std::vector<std::string> header;
  MatrixXd out;
  switch (fit.task) {
    case Task::logistic:
      header = {"probability", "label"};
      out.resize(x.rows(), 2);
      out.col(0) = pr.values.col(0);
      out.col(1) = pr.labels;
      break;
    case Task::cox:
      header = {"risk_score"};
      out = pr.values;
      break;
    default:
      for (Index k = 0; k < pr.values.cols(); ++k) {
        header.push_back("pred_" + (k < static_cast<Index>(fit.y_names.size()) ? fit.y_names[static_cast<std::size_t>(k)]
                                                                                : std::to_string(k + 1)));
      }
      out = pr.values;
  }
  write_text(a.out_prefix + "_predictions.csv", matrix_csv(header, out));

  // Loss when the labels are present.
  std::vector<std::string> resp = a.response;
  std::string time = a.time, event = a.event;
  if (fit.task == Task::cox) {
    if (time.empty() && fit.y_names.size() == 2) time = fit.y_names[0];
    if (event.empty() && fit.y_names.size() == 2) event = fit.y_names[1];
  } else if (resp.empty()) {
    resp = fit.y_names;
  }
  bool have = fit.task == Task::cox ? (!time.empty() && table.has(time) && table.has(event)) : !resp.empty();
  for (const auto& r : resp) have = have && table.has(r);
  if (have) {
    ColumnRoles roles = roles_of(resp, time, event, fit.x_names);
    const Dataset holdout = dataset_from_table(table, fit.task, roles);
    const auto loss = prediction_loss(fit, holdout);
    const char* name = fit.task == Task::logistic ? "misclassification_percent"
                       : fit.task == Task::cox    ? "neg_partial_loglik"
                                                  : "pmse";
    ordered_json j;
    j["task"] = to_string(fit.task);
    j["n"] = holdout.n();
    j[name] = loss ? ordered_json(*loss) : ordered_json(nullptr);
    write_text(a.out_prefix + "_loss.json", j.dump(2) + "\n");
    std::cout << name << " = " << (loss ? format_double(*loss) : std::string("NA")) << "\n";
  } else {
    std::cout << "labels not found in the data; loss omitted\n";
  }
  return 0;
}

int cmd_simulate(const SimulateArgs& a) {
  const auto model = parse_model(a.model);
  if (!model) throw InputError("unknown --model '" + a.model + "' (M1, M2, M3, M4)");
  SimulationOptions o;
  o.config.model = *model;
  o.config.cov_kind = a.cov;
  o.config.n = a.n;
  o.config.p = a.p;
  o.config.q = a.q;
  o.config.u = a.u;
  o.config.s = a.s;
  o.config.seed = a.seed;
  o.replicates = a.replicates;
  o.d = a.d;
  o.folds = a.folds;
  o.c_grid = a.c_grid;
  o.dense = !a.no_dense;
  o.sparse = !a.no_sparse;
  o.threads = resolve_threads(a.threads);
  // Reject impossible designs before spending any replicate time on them.
  try {
    gen_model(o.config, 0);
  } catch (const PreconditionError& e) {
    throw InputError(e.what());
  }
  const SimulationReport rep = run_simulation(o);
  write_text(a.out_prefix + "_replicates.csv", simulation_csv(rep));
  write_text(a.out_prefix + "_summary.json", simulation_summary_json(rep, o));
  std::cout << to_string(*model) << "/Sigma" << a.cov << " medians over " << a.replicates << " replicates\n";
  for (std::size_t m = 0; m < 4; ++m) {
    const bool run = (m == kNiece || m == kPcr) ? o.dense : o.sparse;
    if (!run) continue;
    std::cout << "  " << kMethodNames[m] << ": delta_beta " << format_double(rep.median_delta_beta[m])
              << ", delta_gamma " << format_double(rep.median_delta_gamma[m]) << "\n";
  }
  if (rep.failed > 0) std::cerr << rep.failed << " replicate(s) failed; see the error column\n";
  return rep.failed * 10 > a.replicates ? 4 : 0;
}

int cmd_bench(const BenchArgs& a) {
  BenchOptions o;
  o.n = a.n;
  o.p = a.p;
  o.d = a.d;
  o.delta_u = a.delta_u;
  o.replicates = a.replicates;
  o.seed = a.seed;
  o.threads = resolve_threads(a.threads);
  if (o.n < o.p) throw InputError("bench: Wishart dof --n must be >= --p");
  const auto rows = run_bench(o);
  write_text(a.out_prefix + "_bench.csv", bench_csv(rows));
  std::size_t failed = 0;
  for (double du : o.delta_u) {
    std::vector<double> dist, secs;
    for (const auto& r : rows) {
      if (r.delta_u != du) continue;
      if (!r.error.empty()) ++failed;
      dist.push_back(r.distance);
      secs.push_back(r.seconds);
    }
    std::cout << "delta_u " << format_double(du) << ": median D " << format_double(median(dist))
              << ", median seconds " << format_double(median(secs)) << "\n";
  }
  return failed * 10 > rows.size() ? 4 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Non-iterative envelope component estimation"};
  app.set_config("--config", "", "TOML/INI file with option values");
  app.require_subcommand(1);

  FitArgs fa;
  auto* fit = app.add_subcommand("fit", "Fit an envelope model to CSV data");
  fit->add_option("--data", fa.data, "Input CSV (header row required)")->required();
  fit->add_option("--task", fa.task, "response | predictor | simultaneous | logistic | cox")->required();
  fit->add_option("--response", fa.response, "Response column(s); the label column for logistic");
  fit->add_option("--time", fa.time, "Survival time column (cox)");
  fit->add_option("--event", fa.event, "Event indicator column, 1 = event (cox)");
  fit->add_option("--predictors", fa.predictors, "Predictor columns (default: every non-response column)");
  fit->add_option("--u", fa.u, "Envelope dimension");
  fit->add_option("--d", fa.d, "Number of candidate components (default 2u)");
  fit->add_option("--u-y", fa.u_y, "Response-side envelope dimension (simultaneous)");
  fit->add_option("--d-y", fa.d_y, "Response-side candidates (simultaneous, default 2u_y)");
  fit->add_option("--c", fa.c, "PMD L1 budget in [1, sqrt(dim)]; enables the sparse path");
  fit->add_flag("--c-cv", fa.c_cv, "Select c by cross-validation over the default grid");
  fit->add_option("--c-grid", fa.c_grid, "Explicit c grid for cross-validation");
  fit->add_option("--lambda", fa.lambda, "Lasso penalty for U (logistic, cox; default: CV)");
  fit->add_option("--u-grid", fa.u_grid, "Select u by cross-validation over these values (d = 2u)");
  fit->add_option("--folds", fa.folds, "Cross-validation folds")->capture_default_str();
  fit->add_option("--seed", fa.seed, "Random seed")->capture_default_str();
  fit->add_option("--threads", fa.threads, "Worker threads (default: all cores; NIECE_THREADS overrides)");
  fit->add_option("--estimator", fa.estimator, "constrained | projected")->capture_default_str();
  fit->add_flag("--standardize-y", fa.standardize_y, "Scale responses before forming U (predictor side)");
  fit->add_option("--out-prefix", fa.out_prefix, "Output prefix")->capture_default_str();

  PredictArgs pa;
  auto* pred = app.add_subcommand("predict", "Predict from a saved fit");
  pred->add_option("--fit", pa.fit, "Fit JSON written by 'fit'")->required();
  pred->add_option("--data", pa.data, "New data CSV; predictors matched by column name")->required();
  pred->add_option("--response", pa.response, "Label column(s) for the loss (default: the fit's)");
  pred->add_option("--time", pa.time, "Survival time column (cox)");
  pred->add_option("--event", pa.event, "Event column (cox)");
  pred->add_option("--out-prefix", pa.out_prefix, "Output prefix")->capture_default_str();

  SimulateArgs sa;
  auto* sim = app.add_subcommand("simulate", "Replicated simulation: NIECE, SNIECE, PCR, SPCR");
  sim->add_option("--model", sa.model, "M1 | M2 | M3 | M4")->capture_default_str();
  sim->add_option("--cov", sa.cov, "Envelope covariance 1 | 2 | 3")->capture_default_str();
  sim->add_option("--n", sa.n, "Sample size")->capture_default_str();
  sim->add_option("--p", sa.p, "Dimension reduced by the envelope")->capture_default_str();
  sim->add_option("--q", sa.q, "Other dimension (default: 10 for M1, 5 for M2, 1 otherwise)");
  sim->add_option("--u", sa.u, "Envelope dimension")->capture_default_str();
  sim->add_option("--s", sa.s, "Sparsity level")->capture_default_str();
  sim->add_option("--d", sa.d, "Candidate components")->capture_default_str();
  sim->add_option("--replicates", sa.replicates, "Replicates")->capture_default_str();
  sim->add_option("--folds", sa.folds, "Cross-validation folds")->capture_default_str();
  sim->add_option("--c-grid", sa.c_grid, "c grid for SNIECE/SPCR (default: 8 points in [1.1, sqrt(p)])");
  sim->add_flag("--no-dense", sa.no_dense, "Skip NIECE and PCR");
  sim->add_flag("--no-sparse", sa.no_sparse, "Skip SNIECE and SPCR");
  sim->add_option("--seed", sa.seed, "Master seed")->capture_default_str();
  sim->add_option("--threads", sa.threads, "Worker threads (default: all cores; NIECE_THREADS overrides)");
  sim->add_option("--out-prefix", sa.out_prefix, "Output prefix")->capture_default_str();

  BenchArgs ba;
  auto* bench = app.add_subcommand("bench", "Wishart benchmark of the dense selection step");
  bench->add_option("--n", ba.n, "Wishart degrees of freedom")->capture_default_str();
  bench->add_option("--p", ba.p, "Dimension")->capture_default_str();
  bench->add_option("--d", ba.d, "Candidate components (default p)");
  bench->add_option("--delta-u", ba.delta_u, "Signal strengths")->capture_default_str();
  bench->add_option("--replicates", ba.replicates, "Replicates per signal strength")->capture_default_str();
  bench->add_option("--seed", ba.seed, "Master seed")->capture_default_str();
  bench->add_option("--threads", ba.threads, "Worker threads (default: all cores; NIECE_THREADS overrides)");
  bench->add_option("--out-prefix", ba.out_prefix, "Output prefix")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 2;
  }

  try {
    if (*fit) return cmd_fit(fa);
    if (*pred) return cmd_predict(pa);
    if (*sim) return cmd_simulate(sa);
    if (*bench) return cmd_bench(ba);
  } catch (const InputError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
  return 0;
}
