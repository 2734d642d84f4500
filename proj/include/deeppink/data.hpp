#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>
#include <vector>

#include "deeppink/errors.hpp"

namespace deeppink {

// n x p design with column names and standardization metadata. Immutable by
// convention after construction; standardize() returns a new matrix.
struct DesignMatrix {
  Eigen::MatrixXd values;
  std::vector<std::string> column_names;
  bool centered = false;
  bool scaled = false;
  Eigen::VectorXd shift;  // per-column mean removed (empty until centered)
  Eigen::VectorXd scale;  // per-column sd divided out (empty unless scaled)

  Eigen::Index n() const { return values.rows(); }
  Eigen::Index p() const { return values.cols(); }
};

struct ResponseVector {
  Eigen::VectorXd values;
  bool centered = false;
  double shift = 0.0;

  Eigen::Index n() const { return values.size(); }
};

inline DesignMatrix make_design(Eigen::MatrixXd values,
                                std::vector<std::string> names = {}) {
  if (values.rows() < 2 || values.cols() < 1) {
    throw DimensionMismatch("design matrix needs n >= 2 rows and p >= 1 columns");
  }
  if (!values.allFinite()) {
    throw Error("design matrix contains non-finite entries");
  }
  if (names.empty()) {
    names.reserve(values.cols());
    for (Eigen::Index j = 0; j < values.cols(); ++j) {
      names.push_back("x" + std::to_string(j + 1));
    }
  } else if (static_cast<Eigen::Index>(names.size()) != values.cols()) {
    throw DimensionMismatch("column name count does not match column count");
  }
  DesignMatrix x;
  x.values = std::move(values);
  x.column_names = std::move(names);
  return x;
}

// Centers every column; with scale, divides by the sample standard deviation
// (n-1 divisor). The removed constants are retained for reporting.
inline DesignMatrix standardize(const DesignMatrix& x, bool scale) {
  const Eigen::Index n = x.n();
  const Eigen::Index p = x.p();
  DesignMatrix out = x;
  out.shift = x.values.colwise().mean();
  out.values = x.values.rowwise() - out.shift.transpose();
  out.centered = true;
  if (scale) {
    out.scale.resize(p);
    for (Eigen::Index j = 0; j < p; ++j) {
      const double sd =
          std::sqrt(out.values.col(j).squaredNorm() / static_cast<double>(n - 1));
      if (sd < 1e-12 * std::max(1.0, std::abs(out.shift[j]))) {
        throw ZeroVarianceColumn(static_cast<int>(j));
      }
      out.scale[j] = sd;
      out.values.col(j) /= sd;
    }
    out.scaled = true;
  }
  return out;
}

inline ResponseVector make_response(Eigen::VectorXd values) {
  if (!values.allFinite()) {
    throw Error("response vector contains non-finite entries");
  }
  ResponseVector y;
  y.values = std::move(values);
  return y;
}

inline ResponseVector center_response(const ResponseVector& y) {
  ResponseVector out = y;
  out.shift = y.values.mean();
  out.values = y.values.array() - out.shift;
  out.centered = true;
  return out;
}

}  // namespace deeppink
