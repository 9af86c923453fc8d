#pragma once

#include <Eigen/Dense>
#include <Eigen/SparseCore>

#include <stdexcept>
#include <string>

namespace irkprec {

using Index = Eigen::Index;
using Vector = Eigen::VectorXd;
using DenseMatrix = Eigen::MatrixXd;
using ComplexVector = Eigen::VectorXcd;
using ComplexMatrix = Eigen::MatrixXcd;

/// Compressed sparse row storage for M, F and the multigrid operators.
using SparseMatrix = Eigen::SparseMatrix<double, Eigen::RowMajor, int>;

class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Raised when an LDU pivot vanishes; carries the zero-based pivot index.
class FactorizationError : public std::runtime_error {
 public:
  FactorizationError(const std::string& what, int pivot)
      : std::runtime_error(what), pivot_(pivot) {}
  int pivot() const noexcept { return pivot_; }

 private:
  int pivot_;
};

/// A problem is too large for the requested dense or direct path.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidCoefficient : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class InvalidPreconditioner : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class SolverError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace irkprec
