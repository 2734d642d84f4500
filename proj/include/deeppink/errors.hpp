#pragma once

#include <stdexcept>
#include <string>

namespace deeppink {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DimensionMismatch : Error {
  using Error::Error;
};

struct ZeroVarianceColumn : Error {
  explicit ZeroVarianceColumn(int column_index)
      : Error("column " + std::to_string(column_index) +
              " is constant; cannot scale to unit variance"),
        column(column_index) {}
  int column;
};

struct NotPositiveDefinite : Error {
  explicit NotPositiveDefinite(const std::string& what_arg, double min_eig = 0.0)
      : Error(what_arg), min_eigenvalue(min_eig) {}
  double min_eigenvalue;
};

struct SingularSigma : Error {
  using Error::Error;
};

struct NumericalFailure : Error {
  using Error::Error;
};

struct DivergedTraining : Error {
  DivergedTraining(int at_epoch, double at_loss)
      : Error("training diverged at epoch " + std::to_string(at_epoch) +
              " (loss = " + std::to_string(at_loss) + ")"),
        epoch(at_epoch),
        loss(at_loss) {}
  int epoch;
  double loss;
};

struct IoError : Error {
  using Error::Error;
};

}  // namespace deeppink
