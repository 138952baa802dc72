#include "niece/simulate.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <map>
#include <sstream>

#include <json.hpp>

#include "niece/error.hpp"
#include "niece/parallel.hpp"

namespace niece {

bool ReplicateResult::failed() const {
  if (!error.empty()) return true;
  return std::any_of(methods.begin(), methods.end(), [](const MethodResult& m) { return !m.ok(); });
}

double median(std::vector<double> v) {
  v.erase(std::remove_if(v.begin(), v.end(), [](double x) { return !std::isfinite(x); }), v.end());
  if (v.empty()) return kMissing;
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

namespace {

Task task_for(Model m) {
  switch (m) {
    case Model::M1: return Task::response_linear;
    case Model::M2: return Task::predictor_linear;
    case Model::M3: return Task::logistic;
    case Model::M4: return Task::cox;
  }
  return Task::predictor_linear;
}

ReductionInputs full_inputs(Task task, const Dataset& d, const VectorXd& lasso_beta) {
  switch (task) {
    case Task::response_linear: return response_inputs(d.x, std::get<ContinuousResponse>(d.response).y);
    case Task::predictor_linear: return predictor_inputs(d.x, std::get<ContinuousResponse>(d.response).y);
    default: return glm_inputs(d.x, lasso_beta);
  }
}

void score(MethodResult& out, Task task, const Dataset& data, const SimTruth& truth, const CandidateSet& cand,
           const LowRankPsdd& u_hat, Index u, Selection rule) {
  try {
    NieceResult red = select_components(cand, u_hat, u, rule);
    for (Index j : red.selected) out.selected.push_back(j + 1);
    const EnvelopeFit fit = refit_envelope(task, data, std::move(red));
    out.delta_gamma = delta_gamma(truth.gamma, fit.basis().matrix());
    out.delta_beta = delta_beta(truth.beta, fit.coef);
  } catch (const std::exception& e) {
    out.error = e.what();
  }
}

std::string fmt(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string csv_field(std::string s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char ch : s) {
    if (ch == '"') out += '"';
    out += ch == '\n' ? ' ' : ch;
  }
  return out + "\"";
}

std::string joined(const std::vector<Index>& v) {
  std::string s;
  for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ";" : "") + std::to_string(v[k]);
  return s;
}

}  // namespace

ReplicateResult run_replicate(const SimulationOptions& opts, std::uint64_t replicate) {
  ReplicateResult row;
  row.replicate = replicate;
  const SimConfig& cfg = opts.config;
  const Task task = task_for(cfg.model);
  try {
    const SimData sim = gen_model(cfg, replicate);
    const Dataset& data = sim.data;
    VectorXd lasso_beta;
    if (task == Task::logistic || task == Task::cox) {
      const CvTable lt = select_lambda(data, task, {}, opts.folds, stream_seed(cfg.seed, replicate, 2));
      row.lambda = lt.best_value();
      const GlmFit lasso = task == Task::logistic
                               ? lasso_logistic(data.x, std::get<BinaryResponse>(data.response).y, row.lambda)
                               : lasso_cox(data.x, std::get<SurvivalResponse>(data.response).time,
                                           std::get<SurvivalResponse>(data.response).event, row.lambda);
      if (lasso.beta.cwiseAbs().maxCoeff() == 0.0) {
        throw PreconditionError("lasso estimate is identically zero at the cross-validated lambda");
      }
      lasso_beta = lasso.beta;
    }
    const ReductionInputs in = full_inputs(task, data, lasso_beta);
    const Index u = cfg.u;
    const Index d = std::min(opts.d, std::min(in.n() - 1, in.dim()));

    if (opts.dense) {
      const CandidateSet cand = dense_candidates(in.m_hat(), d);
      score(row.methods[kNiece], task, data, sim.truth, cand, in.u_hat, u, Selection::envelope_score);
      score(row.methods[kPcr], task, data, sim.truth, cand, in.u_hat, u, Selection::leading_eigenvalue);
    }
    if (opts.sparse) {
      CvSettings cv;
      cv.task = task;
      cv.opts.u = u;
      cv.opts.d = d;
      cv.lambda = row.lambda;
      cv.folds = opts.folds;
      cv.seed = stream_seed(cfg.seed, replicate, 1);
      const std::vector<double> grid = opts.c_grid.empty() ? default_c_grid(in.dim()) : opts.c_grid;
      const std::array<std::pair<Method, Selection>, 2> rules{
          std::pair{kSniece, Selection::envelope_score}, std::pair{kSpcr, Selection::leading_eigenvalue}};
      std::vector<CvTable> tables;
      try {
        tables = select_c_rules(data, cv, grid, {rules[0].second, rules[1].second});
      } catch (const std::exception& e) {
        row.methods[kSniece].error = row.methods[kSpcr].error = e.what();
      }
      std::map<double, CandidateSet> cache;
      for (std::size_t k = 0; k < tables.size(); ++k) {
        MethodResult& m = row.methods[rules[k].first];
        m.c = tables[k].best_value();
        try {
          auto it = cache.find(m.c);
          if (it == cache.end()) {
            PmdConfig pc;
            pc.c = m.c;
            it = cache.emplace(m.c, sparse_candidates(in.data, d, pc)).first;
          }
          score(m, task, data, sim.truth, it->second, in.u_hat, u, rules[k].second);
        } catch (const std::exception& e) {
          m.error = e.what();
        }
      }
    }
  } catch (const std::exception& e) {
    row.error = e.what();
  }
  return row;
}

SimulationReport run_simulation(const SimulationOptions& opts) {
  if (opts.replicates == 0) throw PreconditionError("simulation needs at least one replicate");
  SimulationReport rep;
  rep.rows.resize(opts.replicates);
  parallel_for(opts.replicates, opts.threads,
               [&](std::size_t r) { rep.rows[r] = run_replicate(opts, static_cast<std::uint64_t>(r)); });
  for (std::size_t m = 0; m < 4; ++m) {
    std::vector<double> b, g;
    for (const auto& row : rep.rows) {
      b.push_back(row.methods[m].delta_beta);
      g.push_back(row.methods[m].delta_gamma);
    }
    rep.median_delta_beta[m] = median(b);
    rep.median_delta_gamma[m] = median(g);
  }
  rep.failed = static_cast<std::size_t>(
      std::count_if(rep.rows.begin(), rep.rows.end(), [](const ReplicateResult& r) { return r.failed(); }));
  return rep;
}

std::string simulation_csv(const SimulationReport& report) {
  std::ostringstream os;
  os << "replicate,lambda";
  for (const char* name : kMethodNames) {
    os << ",delta_beta_" << name << ",delta_gamma_" << name << ",c_" << name << ",selected_" << name;
  }
  os << ",error\n";
  for (const auto& row : report.rows) {
    os << row.replicate << ',' << fmt(row.lambda);
    std::string err = row.error;
    for (std::size_t m = 0; m < 4; ++m) {
      const MethodResult& r = row.methods[m];
      os << ',' << fmt(r.delta_beta) << ',' << fmt(r.delta_gamma) << ',' << fmt(r.c) << ',' << joined(r.selected);
      if (!r.ok()) err += std::string(err.empty() ? "" : " | ") + kMethodNames[m] + ": " + r.error;
    }
    os << ',' << csv_field(err) << '\n';
  }
  return os.str();
}

std::string simulation_summary_json(const SimulationReport& report, const SimulationOptions& opts) {
  using nlohmann::ordered_json;
  const SimConfig& c = opts.config;
  ordered_json j;
  j["model"] = to_string(c.model);
  j["covariance"] = c.cov_kind;
  j["n"] = c.n;
  j["p"] = c.p;
  j["q"] = c.q > 0 ? c.q : default_q(c.model);
  j["u"] = c.u;
  j["s"] = c.s;
  j["d"] = opts.d;
  j["seed"] = c.seed;
  j["replicates"] = opts.replicates;
  j["failed_replicates"] = report.failed;
  ordered_json med = ordered_json::object();
  for (std::size_t m = 0; m < 4; ++m) {
    const bool run = (m == kNiece || m == kPcr) ? opts.dense : opts.sparse;
    if (!run) continue;
    auto num = [](double v) { return std::isfinite(v) ? ordered_json(v) : ordered_json(nullptr); };
    med[kMethodNames[m]] = {{"delta_beta", num(report.median_delta_beta[m])},
                            {"delta_gamma", num(report.median_delta_gamma[m])}};
  }
  j["median"] = med;
  return j.dump(2) + "\n";
}

std::vector<BenchRow> run_bench(const BenchOptions& opts) {
  if (opts.replicates == 0) throw PreconditionError("bench needs at least one replicate");
  if (opts.n < opts.p) throw PreconditionError("bench: Wishart dof n must be >= p");
  Rng design_rng = make_rng(opts.seed, 0, 3);
  const WishartDesign design = wishart_design(opts.p, 1.0, design_rng);
  const MatrixXd fm = LowRankPsdd::from_symmetric(design.m).factor();
  const MatrixXd fu = LowRankPsdd::from_symmetric(design.u).factor();
  const Index u = design.gamma.cols();
  const Index d = opts.d > 0 ? opts.d : opts.p;
  const std::size_t nd = opts.delta_u.size();
  std::vector<BenchRow> rows(nd * opts.replicates);
  parallel_for(rows.size(), opts.threads, [&](std::size_t k) {
    const std::size_t g = k / opts.replicates;
    const std::size_t r = k % opts.replicates;
    BenchRow& row = rows[k];
    row.delta_u = opts.delta_u[g];
    row.replicate = r;
    try {
      Rng rng = make_rng(opts.seed, r, 4);
      const MatrixXd m_hat = wishart_sample(fm, opts.n, rng);
      const MatrixXd u_hat = opts.delta_u[g] * wishart_sample(fu, opts.n, rng);
      const auto t0 = std::chrono::steady_clock::now();
      const NieceResult fit = niece_fit(SymmetricMatrixd(m_hat), SymmetricMatrixd(u_hat), u, d);
      const auto t1 = std::chrono::steady_clock::now();
      row.seconds = std::chrono::duration<double>(t1 - t0).count();
      row.distance = delta_gamma(design.gamma, fit.basis.matrix());
    } catch (const std::exception& e) {
      row.error = e.what();
    }
  });
  return rows;
}

std::string bench_csv(const std::vector<BenchRow>& rows) {
  std::ostringstream os;
  os << "delta_u,replicate,distance,seconds,error\n";
  for (const auto& r : rows) {
    os << fmt(r.delta_u) << ',' << r.replicate << ',' << fmt(r.distance) << ',' << fmt(r.seconds) << ','
       << csv_field(r.error) << '\n';
  }
  return os.str();
}

}  // namespace niece
