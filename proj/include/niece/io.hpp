#pragma once

// CSV data files and JSON fit files.

#include <string>
#include <vector>

#include <json.hpp>

#include "niece/envelope.hpp"

namespace niece {

struct CsvTable {
  std::vector<std::string> header;
  MatrixXd values;  // rows x columns

  /// Column position of `name`; throws InputError naming the column when absent.
  Index column(const std::string& name) const;
  bool has(const std::string& name) const;
  MatrixXd columns(const std::vector<std::string>& names) const;
};

/// Comma separated, header row required, '.' decimal point. Errors carry the file name
/// and line number.
CsvTable read_csv(const std::string& path);
CsvTable parse_csv(const std::string& text, const std::string& source = "<input>");

void write_text(const std::string& path, const std::string& text);
std::string format_double(double v);
std::string matrix_csv(const std::vector<std::string>& header, const MatrixXd& m);

/// Builds a dataset from a table. Linear tasks take `response` as the response
/// columns; logistic takes one label column; Cox takes `time` and `event`. All other
/// columns (or `predictors`, when non-empty) become X.
struct ColumnRoles {
  std::vector<std::string> response;
  std::string time;
  std::string event;
  std::vector<std::string> predictors;
};

Dataset dataset_from_table(const CsvTable& table, Task task, const ColumnRoles& roles);

nlohmann::ordered_json fit_to_json(const EnvelopeFit& fit);
EnvelopeFit fit_from_json(const nlohmann::json& j);

/// Writes `fit` plus `extra` members (CV tables and the like) and a "timestamp".
void save_fit(const std::string& path, const EnvelopeFit& fit,
              const nlohmann::ordered_json& extra = nlohmann::ordered_json::object());
EnvelopeFit load_fit(const std::string& path);

/// variable, beta_env (one beta_env column per response when r > 1).
std::string coefficients_csv(const EnvelopeFit& fit);

}  // namespace niece
