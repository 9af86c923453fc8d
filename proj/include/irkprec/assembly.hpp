#pragma once

#include "irkprec/mesh.hpp"
#include "irkprec/types.hpp"

#include <array>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string_view>

namespace irkprec {

using ScalarField = std::function<double(double, double)>;
using VectorField = std::function<std::array<double, 2>(double, double)>;

enum class CoefficientPreset { ConstantOnes, ConstantDiffusion, Variable, VariableBetaZero, Custom };

std::string_view to_string(CoefficientPreset preset);
CoefficientPreset coefficient_preset_from_string(std::string_view name);

/// Coefficients of K u = -div(alpha grad u) + beta u.
struct CoefficientField {
  CoefficientPreset preset = CoefficientPreset::Custom;
  ScalarField alpha;
  ScalarField beta;
  std::optional<VectorField> grad_alpha;
  /// Set when alpha and beta are constant; enables closed-form element matrices.
  std::optional<std::array<double, 2>> constant_values;

  static CoefficientField from_preset(CoefficientPreset preset);
  static CoefficientField constant(double alpha, double beta);
  static CoefficientField custom(ScalarField alpha, ScalarField beta, std::optional<VectorField> grad_alpha = {});

  bool is_constant() const { return constant_values.has_value(); }
  /// beta identically zero on the whole domain (known for presets only).
  bool beta_vanishes() const;
};

/// Degree-4 symmetric 6-point rule on a triangle: barycentric points and
/// weights summing to 1 (multiply by the area).
struct TriangleQuadrature {
  std::array<std::array<double, 3>, 6> bary;
  std::array<double, 6> weights;
};
const TriangleQuadrature& degree4_rule();

SparseMatrix assemble_mass(const TriMesh& mesh);

/// F = <alpha grad phi_m, grad phi_l> + <beta phi_m, phi_l>.
/// Throws InvalidCoefficient if alpha <= 0 or beta < 0 at a quadrature point.
SparseMatrix assemble_stiffness(const TriMesh& mesh, const CoefficientField& coeff);

/// The two parts of F separately; no sign checks beyond finiteness.
SparseMatrix assemble_diffusion_part(const TriMesh& mesh, const ScalarField& alpha);
SparseMatrix assemble_reaction_part(const TriMesh& mesh, const ScalarField& beta);

Vector assemble_load(const TriMesh& mesh, const ScalarField& f);

/// Nodal interpolant of f.
Vector interpolate(const TriMesh& mesh, const ScalarField& f);

/// Matrix Market coordinate real general, shortest round-trip decimals.
void write_matrix_market(std::ostream& os, const SparseMatrix& A);
void write_matrix_market(std::ostream& os, const DenseMatrix& A);
SparseMatrix read_matrix_market(std::istream& is);

}  // namespace irkprec
