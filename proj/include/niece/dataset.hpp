#pragma once

#include <string>
#include <variant>
#include <vector>

#include "niece/linalg.hpp"

namespace niece {

struct ContinuousResponse {
  MatrixXd y;  // n x r
};

struct BinaryResponse {
  VectorXd y;  // 0/1 labels
};

struct SurvivalResponse {
  VectorXd time;   // > 0
  VectorXd event;  // 1 = event observed, 0 = censored
};

using Response = std::variant<ContinuousResponse, BinaryResponse, SurvivalResponse>;

struct Dataset {
  MatrixXd x;  // n x p predictors
  Response response;
  std::vector<std::string> x_names;
  std::vector<std::string> y_names;

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }

  /// Throws on inconsistent row counts, non-finite entries, non-binary labels or
  /// non-positive survival times.
  void validate() const;

  /// Rows `rows` of every block, in the given order.
  Dataset subset(const std::vector<Index>& rows) const;
};

inline bool is_continuous(const Dataset& d) { return std::holds_alternative<ContinuousResponse>(d.response); }
inline bool is_binary(const Dataset& d) { return std::holds_alternative<BinaryResponse>(d.response); }
inline bool is_survival(const Dataset& d) { return std::holds_alternative<SurvivalResponse>(d.response); }

}  // namespace niece
