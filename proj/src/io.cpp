#include "niece/io.hpp"

#include <charconv>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <set>
#include <sstream>

#include "niece/error.hpp"

namespace niece {

using nlohmann::json;
using nlohmann::ordered_json;

namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t' || s[b] == '\r')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char ch : line) {
    if (ch == '"') {
      quoted = !quoted;
    } else if (ch == ',' && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur += ch;
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

Index CsvTable::column(const std::string& name) const {
  for (std::size_t j = 0; j < header.size(); ++j)
    if (header[j] == name) return static_cast<Index>(j);
  throw InputError("column '" + name + "' not found");
}

bool CsvTable::has(const std::string& name) const {
  for (const auto& h : header)
    if (h == name) return true;
  return false;
}

MatrixXd CsvTable::columns(const std::vector<std::string>& names) const {
  std::vector<std::string> missing;
  for (const auto& n : names)
    if (!has(n)) missing.push_back(n);
  if (!missing.empty()) {
    std::string msg = "missing column(s):";
    for (const auto& m : missing) msg += " '" + m + "'";
    throw InputError(msg);
  }
  MatrixXd out(values.rows(), static_cast<Index>(names.size()));
  for (std::size_t j = 0; j < names.size(); ++j) out.col(static_cast<Index>(j)) = values.col(column(names[j]));
  return out;
}

CsvTable parse_csv(const std::string& text, const std::string& source) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  std::vector<std::vector<double>> rows;
  bool have_header = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    const auto fields = split(line);
    if (!have_header) {
      std::set<std::string> seen;
      for (const auto& f : fields) {
        if (f.empty()) throw InputError(source + ":" + std::to_string(lineno) + ": empty column name in header");
        if (!seen.insert(f).second) {
          throw InputError(source + ":" + std::to_string(lineno) + ": duplicate column name '" + f + "'");
        }
      }
      t.header = fields;
      have_header = true;
      continue;
    }
    if (fields.size() != t.header.size()) {
      throw InputError(source + ":" + std::to_string(lineno) + ": expected " + std::to_string(t.header.size()) +
                       " fields, found " + std::to_string(fields.size()));
    }
    std::vector<double> row(fields.size());
    for (std::size_t j = 0; j < fields.size(); ++j) {
      const std::string& f = fields[j];
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (first != last && *first == '+') ++first;
      const auto res = std::from_chars(first, last, row[j]);
      if (f.empty() || res.ec != std::errc() || res.ptr != last || !std::isfinite(row[j])) {
        throw InputError(source + ":" + std::to_string(lineno) + ": column '" + t.header[j] +
                         "': cannot parse '" + f + "' as a finite number");
      }
    }
    rows.push_back(std::move(row));
  }
  if (!have_header) throw InputError(source + ": file is empty (header row required)");
  t.values.resize(static_cast<Index>(rows.size()), static_cast<Index>(t.header.size()));
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < rows[i].size(); ++j) t.values(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
  return t;
}

CsvTable read_csv(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "' for reading");
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_csv(ss.str(), path);
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot open '" + path + "' for writing");
  f << text;
  if (!f) throw InputError("write to '" + path + "' failed");
}

std::string format_double(double v) {
  if (!std::isfinite(v)) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string matrix_csv(const std::vector<std::string>& header, const MatrixXd& m) {
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
  out += '\n';
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) out += (j ? "," : "") + format_double(m(i, j));
    out += '\n';
  }
  return out;
}

Dataset dataset_from_table(const CsvTable& table, Task task, const ColumnRoles& roles) {
  std::vector<std::string> used;
  Dataset d;
  switch (task) {
    case Task::response_linear:
    case Task::predictor_linear:
    case Task::simultaneous_linear:
      if (roles.response.empty()) throw InputError("linear tasks need at least one --response column");
      d.response = ContinuousResponse{table.columns(roles.response)};
      d.y_names = roles.response;
      used = roles.response;
      break;
    case Task::logistic:
      if (roles.response.size() != 1) throw InputError("logistic task needs exactly one --response column");
      d.response = BinaryResponse{table.columns(roles.response).col(0)};
      d.y_names = roles.response;
      used = roles.response;
      break;
    case Task::cox: {
      if (roles.time.empty() || roles.event.empty()) throw InputError("cox task needs --time and --event columns");
      const MatrixXd te = table.columns({roles.time, roles.event});
      d.response = SurvivalResponse{te.col(0), te.col(1)};
      d.y_names = {roles.time, roles.event};
      used = d.y_names;
      break;
    }
  }
  if (!roles.predictors.empty()) {
    d.x_names = roles.predictors;
  } else {
    for (const auto& h : table.header)
      if (std::find(used.begin(), used.end(), h) == used.end()) d.x_names.push_back(h);
  }
  if (d.x_names.empty()) throw InputError("no predictor columns left after removing the response");
  d.x = table.columns(d.x_names);
  try {
    d.validate();
  } catch (const DimensionError& e) {
    throw InputError(e.what());
  } catch (const PreconditionError& e) {
    throw InputError(e.what());
  }
  return d;
}

namespace {

ordered_json matrix_json(const MatrixXd& m) {
  ordered_json rows = ordered_json::array();
  for (Index i = 0; i < m.rows(); ++i) {
    ordered_json r = ordered_json::array();
    for (Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    rows.push_back(std::move(r));
  }
  return rows;
}

ordered_json vector_json(const VectorXd& v) {
  ordered_json a = ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) a.push_back(v(i));
  return a;
}

MatrixXd json_matrix(const json& j, Index cols_if_empty = 0) {
  const Index rows = static_cast<Index>(j.size());
  const Index cols = rows ? static_cast<Index>(j[0].size()) : cols_if_empty;
  MatrixXd m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    if (static_cast<Index>(j[static_cast<std::size_t>(i)].size()) != cols) throw InputError("ragged matrix in fit file");
    for (Index k = 0; k < cols; ++k) m(i, k) = j[static_cast<std::size_t>(i)][static_cast<std::size_t>(k)].get<double>();
  }
  return m;
}

VectorXd json_vector(const json& j) {
  VectorXd v(static_cast<Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Index>(i)) = j[i].get<double>();
  return v;
}

ordered_json reduction_json(const NieceResult& r) {
  ordered_json j;
  j["selection"] = to_string(r.selection);
  j["sparse"] = r.sparse;
  if (r.sparse) j["c"] = r.c;
  ordered_json sel = ordered_json::array();
  for (Index k : r.selected) sel.push_back(k + 1);
  j["selected"] = sel;
  ordered_json order = ordered_json::array();
  for (Index k : r.score_table.order) order.push_back(k + 1);
  j["scores"] = vector_json(r.score_table.scores);
  j["score_order"] = order;
  j["candidate_values"] = vector_json(r.candidate_values);
  j["eigen_gap"] = r.score_table.eigen_gap;
  j["score_gap"] = r.score_table.score_gap;
  j["u_norm"] = r.score_table.u_max_norm;
  j["basis"] = matrix_json(r.basis.matrix());
  return j;
}

NieceResult reduction_from_json(const json& j) {
  NieceResult r;
  r.selection = j.at("selection").get<std::string>() == "leading_eigenvalue" ? Selection::leading_eigenvalue
                                                                             : Selection::envelope_score;
  r.sparse = j.at("sparse").get<bool>();
  if (r.sparse) r.c = j.at("c").get<double>();
  for (const auto& k : j.at("selected")) r.selected.push_back(k.get<Index>() - 1);
  for (const auto& k : j.at("score_order")) r.score_table.order.push_back(k.get<Index>() - 1);
  r.score_table.scores = json_vector(j.at("scores"));
  r.candidate_values = json_vector(j.at("candidate_values"));
  r.score_table.eigen_gap = j.at("eigen_gap").get<double>();
  r.score_table.score_gap = j.at("score_gap").get<double>();
  r.score_table.u_max_norm = j.at("u_norm").get<double>();
  r.basis = Basisd::from_orthonormal(json_matrix(j.at("basis")), 1e-8);
  return r;
}

std::string timestamp() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace

ordered_json fit_to_json(const EnvelopeFit& fit) {
  ordered_json j;
  j["task"] = to_string(fit.task);
  j["estimator"] = fit.estimator == Estimator::constrained ? "constrained" : "projected";
  ordered_json hp;
  hp["u"] = fit.u;
  hp["d"] = fit.d;
  hp["c"] = fit.c ? ordered_json(*fit.c) : ordered_json(nullptr);
  if (fit.reduction_y) {
    hp["u_y"] = fit.u_y;
    hp["d_y"] = fit.d_y;
    hp["c_y"] = fit.c_y ? ordered_json(*fit.c_y) : ordered_json(nullptr);
  }
  hp["lambda"] = fit.lambda ? ordered_json(*fit.lambda) : ordered_json(nullptr);
  j["hyperparameters"] = hp;
  j["x_names"] = fit.x_names;
  j["y_names"] = fit.y_names;
  j["reduction"] = reduction_json(fit.reduction);
  if (fit.reduction_y) j["reduction_y"] = reduction_json(*fit.reduction_y);
  j["eta"] = matrix_json(fit.eta);
  j["beta_env"] = matrix_json(fit.coef);
  j["intercept"] = vector_json(fit.intercept);
  if (fit.lasso_beta.size()) j["lasso_beta"] = vector_json(fit.lasso_beta);
  j["warnings"] = fit.warnings;
  return j;
}

EnvelopeFit fit_from_json(const json& j) {
  try {
    EnvelopeFit fit;
    const auto task = parse_task(j.at("task").get<std::string>());
    if (!task) throw InputError("fit file has an unknown task");
    fit.task = *task;
    fit.estimator = j.at("estimator").get<std::string>() == "projected" ? Estimator::projected : Estimator::constrained;
    const json& hp = j.at("hyperparameters");
    fit.u = hp.at("u").get<Index>();
    fit.d = hp.at("d").get<Index>();
    if (!hp.at("c").is_null()) fit.c = hp.at("c").get<double>();
    if (hp.contains("u_y")) {
      fit.u_y = hp.at("u_y").get<Index>();
      fit.d_y = hp.at("d_y").get<Index>();
      if (!hp.at("c_y").is_null()) fit.c_y = hp.at("c_y").get<double>();
    }
    if (!hp.at("lambda").is_null()) fit.lambda = hp.at("lambda").get<double>();
    fit.x_names = j.at("x_names").get<std::vector<std::string>>();
    fit.y_names = j.at("y_names").get<std::vector<std::string>>();
    fit.reduction = reduction_from_json(j.at("reduction"));
    if (j.contains("reduction_y")) fit.reduction_y = reduction_from_json(j.at("reduction_y"));
    fit.eta = json_matrix(j.at("eta"));
    fit.coef = json_matrix(j.at("beta_env"), static_cast<Index>(fit.x_names.size()));
    fit.intercept = json_vector(j.at("intercept"));
    if (j.contains("lasso_beta")) fit.lasso_beta = json_vector(j.at("lasso_beta"));
    fit.warnings = j.at("warnings").get<std::vector<std::string>>();
    return fit;
  } catch (const json::exception& e) {
    throw InputError(std::string("malformed fit file: ") + e.what());
  }
}

void save_fit(const std::string& path, const EnvelopeFit& fit, const ordered_json& extra) {
  ordered_json j = fit_to_json(fit);
  for (auto it = extra.begin(); it != extra.end(); ++it) j[it.key()] = it.value();
  j["timestamp"] = timestamp();
  write_text(path, j.dump(2) + "\n");
}

EnvelopeFit load_fit(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw InputError("cannot open '" + path + "' for reading");
  json j;
  try {
    f >> j;
  } catch (const json::exception& e) {
    throw InputError(path + ": " + e.what());
  }
  return fit_from_json(j);
}

std::string coefficients_csv(const EnvelopeFit& fit) {
  std::vector<std::string> header{"variable"};
  const Index r = fit.coef.rows();
  const bool linear = fit.task != Task::logistic && fit.task != Task::cox;
  if (r == 1) {
    header.push_back("beta_env");
  } else {
    for (Index k = 0; k < r; ++k) {
      const std::string y = (linear && k < static_cast<Index>(fit.y_names.size())) ? fit.y_names[static_cast<std::size_t>(k)]
                                                                                    : std::to_string(k + 1);
      header.push_back("beta_env_" + y);
    }
  }
  std::string out;
  for (std::size_t j = 0; j < header.size(); ++j) out += (j ? "," : "") + header[j];
  out += '\n';
  for (Index i = 0; i < fit.coef.cols(); ++i) {
    out += i < static_cast<Index>(fit.x_names.size()) ? fit.x_names[static_cast<std::size_t>(i)] : "x" + std::to_string(i + 1);
    for (Index k = 0; k < r; ++k) out += "," + format_double(fit.coef(k, i));
    out += '\n';
  }
  return out;
}

}  // namespace niece
