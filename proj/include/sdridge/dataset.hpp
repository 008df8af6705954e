#pragma once

#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "sdridge/errors.hpp"

namespace sdridge {

using Eigen::MatrixXd;
using Eigen::VectorXd;

/// Train-set statistics used to center and scale features and target.
struct StandardizationStats {
  std::vector<std::size_t> kept_columns;     // indices into the raw feature columns
  std::vector<std::size_t> dropped_columns;  // zero-variance columns
  VectorXd feature_mean;                     // over kept columns
  VectorXd feature_std;
  double target_mean = 0.0;
  double target_std = 1.0;
};

/// Design matrix X (n x p) with response y (n).
struct Dataset {
  MatrixXd X;
  VectorXd y;
  std::optional<StandardizationStats> stats;
  std::vector<std::string> feature_names;

  Dataset() = default;
  Dataset(MatrixXd x, VectorXd resp) : X(std::move(x)), y(std::move(resp)) { validate(); }

  [[nodiscard]] Eigen::Index n() const { return X.rows(); }
  [[nodiscard]] Eigen::Index p() const { return X.cols(); }

  void validate() const {
    if (X.rows() < 1 || X.cols() < 1) throw DataError("dataset needs n >= 1 and p >= 1");
    if (y.size() != X.rows()) {
      throw DataError("response length " + std::to_string(y.size()) + " != rows " +
                      std::to_string(X.rows()));
    }
    if (!X.allFinite() || !y.allFinite()) throw DataError("dataset contains non-finite entries");
  }
};

}  // namespace sdridge
