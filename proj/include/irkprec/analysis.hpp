#pragma once

#include "irkprec/stageop.hpp"
#include "irkprec/types.hpp"

#include <complex>
#include <functional>
#include <string>
#include <vector>

namespace irkprec {

/// Generalized eigendecomposition F V = M V diag(lambda) with V^T M V = I.
/// The stage operator and any preconditioner built from the same M and F
/// decouple into N independent s x s problems in this basis.
struct ModalBasis {
  Vector lambda;
  DenseMatrix V;
  DenseMatrix MV;
};

ModalBasis modal_basis(const SparseMatrix& M, const SparseMatrix& F);

/// How condition numbers and spectra are computed.
enum class AnalysisMethod {
  Auto,   ///< dense below `dense_limit`, modal above
  Dense,  ///< explicit dense matrix
  Modal,  ///< through a ModalBasis (exact up to rounding)
};

struct AnalysisOptions {
  AnalysisMethod method = AnalysisMethod::Auto;
  Index dense_limit = 1200;
  /// Relative residual target for the Lanczos iterations of the modal route.
  double lanczos_tol = 1e-10;
  int lanczos_max_iter = 1000;
};

/// Dense P^-1 A for the given stage operator and preconditioner matrix P
/// (unpreconditioned when P is null). Subject to the dense guard.
DenseMatrix preconditioned_matrix(const StageOperator& op, const DenseMatrix* P);

/// sigma_max / sigma_min of a dense matrix.
double condition_number(const DenseMatrix& B);

/// 2-norm condition number of P^-1 A (or of A when P is null), with P
/// inverted exactly. `basis` is computed on demand when the modal route is
/// taken and none is given.
double condition_number(const StageOperator& op, const DenseMatrix* P, const ModalBasis* basis = nullptr,
                        const AnalysisOptions& options = {});

struct SpectrumResult {
  std::vector<std::complex<double>> eigenvalues;
  double kappa = 0.0;
  std::string label;

  double min_abs() const;
  double max_abs() const;
};

SpectrumResult spectrum(const StageOperator& op, const DenseMatrix* P, const ModalBasis* basis = nullptr,
                        const AnalysisOptions& options = {});

struct FovResult {
  std::vector<std::complex<double>> boundary_points;
  /// Distance from the origin to the convex hull of the boundary points;
  /// zero when the origin lies inside.
  double min_distance_to_origin = 0.0;
};

/// Numerical-range boundary by the rotated Hermitian-part method.
FovResult field_of_values(const DenseMatrix& B, int n_angles = 128);

/// Distance from z to the convex polygon with the given ordered vertices
/// (zero inside). Degenerate polygons are treated as segments or points.
double distance_to_polygon(const std::vector<std::complex<double>>& vertices, std::complex<double> z);

/// kappa_2(P^-1 A) of the small s x s matrices.
double butcher_kappa(const DenseMatrix& P, const DenseMatrix& A);

struct LanczosResult {
  double value = 0.0;
  Vector vector;
  int iterations = 0;
  bool converged = false;
};

/// Largest eigenvalue of a symmetric positive semidefinite operator by
/// Lanczos with full reorthogonalization.
LanczosResult lanczos_largest(const std::function<Vector(const Vector&)>& apply, const Vector& start, double tol,
                              int max_iter);

}  // namespace irkprec
