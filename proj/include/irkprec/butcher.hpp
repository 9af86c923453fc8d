#pragma once

#include "irkprec/types.hpp"

#include <optional>
#include <string>
#include <string_view>

namespace irkprec {

enum class TableauKind { RadauIIA, GaussLegendre, NystromGaussLegendre, NystromRadauIIA };

std::string_view to_string(TableauKind kind);

/// Butcher coefficients of an implicit Runge-Kutta (or Nystrom) method.
///
/// For Nystrom tableaus `b` weights the position update and `b_prime` the
/// velocity update; `b_prime` is empty for first-order methods.
struct ButcherTableau {
  TableauKind kind = TableauKind::RadauIIA;
  int s = 0;
  DenseMatrix A;
  Vector b;
  Vector c;
  std::optional<Vector> b_prime;

  bool is_nystrom() const { return b_prime.has_value(); }
  /// Classical order of the underlying collocation method.
  int order() const;
  /// Short label such as "RIIA-3" or "GL-2".
  std::string label() const;
};

/// s-stage Radau IIA collocation method, 1 <= s <= 5.
ButcherTableau radau_iia(int s);

/// s-stage Gauss-Legendre collocation method, 1 <= s <= 5.
ButcherTableau gauss_legendre(int s);

/// Indirect-collocation Nystrom method built on an IRK base: A = Ahat * Ahat,
/// b'_i = bhat_i and b_i = bhat_i (1 - chat_i).
ButcherTableau nystrom_from(const ButcherTableau& base);

/// Convenience: the tableau used for first-order (mu = 1) or second-order
/// (mu = 2) problems with the given base family.
ButcherTableau tableau_for(TableauKind base_family, int s, int mu);

struct LduFactors {
  DenseMatrix L;  ///< unit lower triangular
  DenseMatrix D;  ///< diagonal pivots
  DenseMatrix U;  ///< unit upper triangular
};

/// Doolittle LDU factorization without pivoting.
/// Throws FactorizationError naming the first vanishing pivot.
LduFactors ldu(const DenseMatrix& A);

/// True iff A is nonsingular with no eigenvalue on the closed negative real
/// axis, the eigenvalue characterization of weak positive definiteness.
bool weakly_positive_definite(const DenseMatrix& A, double tol = 1e-10);

enum class PreconditionerKind { J, GSL, TRIU, LD, DU };

std::string_view to_string(PreconditionerKind kind);
PreconditionerKind preconditioner_kind_from_string(std::string_view name);

/// Small s x s matrix P standing in for A in the block preconditioner.
DenseMatrix butcher_preconditioner_matrix(const DenseMatrix& A, PreconditionerKind kind);
inline DenseMatrix butcher_preconditioner_matrix(const ButcherTableau& t, PreconditionerKind kind) {
  return butcher_preconditioner_matrix(t.A, kind);
}

/// max_k |sum_i b_i c_i^{k-1} - 1/k| over k = 1..max_k.
double quadrature_defect(const Vector& b, const Vector& c, int max_k);

/// {kind, s, A (row-major), b, c, b_prime?}
std::string tableau_to_json(const ButcherTableau& t);

}  // namespace irkprec
