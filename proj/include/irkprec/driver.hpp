#pragma once

#include "irkprec/assembly.hpp"
#include "irkprec/butcher.hpp"
#include "irkprec/krylov.hpp"
#include "irkprec/mesh.hpp"
#include "irkprec/precond.hpp"
#include "irkprec/stageop.hpp"

#include <functional>
#include <memory>
#include <optional>
#include <string_view>

namespace irkprec {

enum class ProblemName { Diffusion, Pennes, Wave, KleinGordon };

std::string_view to_string(ProblemName name);
ProblemName problem_name_from_string(std::string_view name);
/// 1 for the parabolic problems, 2 for the hyperbolic ones.
int problem_order(ProblemName name);
/// Coefficient preset a problem uses with constant or variable coefficients.
CoefficientPreset preset_for(ProblemName name, bool variable);
/// Method family: Radau IIA for mu = 1, Gauss-Legendre (Nystrom) for mu = 2.
TableauKind default_family(ProblemName name);

/// Manufactured problem u_t^(mu) + K u = g with u* = T(t) cos(pi x) cos(pi y),
/// T = exp(-t) for mu = 1 and cos(t) for mu = 2, homogeneous Neumann data.
struct ProblemSpec {
  ProblemName name = ProblemName::Diffusion;
  int mu = 1;
  CoefficientField coeff;
  SpaceTimeField exact;
  SpaceTimeField exact_t;
  /// K u* from closed forms of alpha, grad alpha and beta.
  SpaceTimeField k_exact;
  SpaceTimeField g;
  ScalarField u0;
  ScalarField udot0;
};

/// Throws InvalidArgument when the preset's beta does not fit the problem
/// (Diffusion and Wave need beta = 0, Pennes and Klein-Gordon beta > 0).
ProblemSpec mms_problem(ProblemName name, CoefficientPreset preset);

/// h_t = h^((p + 1) / q) with q = 2s for Gauss-Legendre and 2s - 1 for Radau IIA.
double timestep_rule(double h, int p, TableauKind kind, int s);

/// How a nominal mesh size h = 2^-k maps to a triangulation of [-1,1]^2.
enum class MeshConvention {
  Nominal,  ///< 1/h squares per side (the default for experiments)
  Element,  ///< 2/h squares per side, element legs of length h
};

std::string_view to_string(MeshConvention c);
MeshConvention mesh_convention_from_string(std::string_view name);

TriMesh mesh_for(int k, MeshConvention convention);
/// Hierarchy down to the 2 x 2 mesh, finest level equal to mesh_for(k, ...).
MeshHierarchy hierarchy_for(int k, MeshConvention convention);

/// M u'' + F u = <g, phi> (or with u') assembled on a fixed mesh.
struct SemiDiscreteSystem {
  std::shared_ptr<const SparseMatrix> M;
  std::shared_ptr<const SparseMatrix> F;
  TimeLoad load;
};

SemiDiscreteSystem discretize(const TriMesh& mesh, const ProblemSpec& problem);

struct StepperState {
  double t = 0.0;
  Vector u;
  std::optional<Vector> udot;
  double h_t = 0.0;
};

StepperState initial_state(const TriMesh& mesh, const ProblemSpec& problem, double h_t);

/// Solves the stage system for a given right-hand side.
using StageSolver = std::function<Vector(const Vector&)>;

StageSolver direct_stage_solver(const StageOperator& op);
/// GMRES with a block preconditioner; throws SolverError on non-convergence.
StageSolver gmres_stage_solver(const StageOperator& op, std::shared_ptr<const BlockPreconditioner> prec,
                               GmresOptions options = {});

StageOperator stage_operator(const SemiDiscreteSystem& sys, const ButcherTableau& tableau, double h_t, int mu);

/// Stage right-hand side for the step starting at `state`.
Vector stage_rhs(const StepperState& state, const ButcherTableau& tableau, const SemiDiscreteSystem& sys, int mu);

/// State after one step given the solved stage vector.
StepperState complete_step(const StepperState& state, const ButcherTableau& tableau, const Vector& stages);

StepperState irk_step(const StepperState& state, const ButcherTableau& tableau, const SemiDiscreteSystem& sys,
                      const StageSolver& solver);
StepperState irkn_step(const StepperState& state, const ButcherTableau& tableau, const SemiDiscreteSystem& sys,
                       const StageSolver& solver);

/// n_steps steps of size state.h_t with a fixed stage solver.
StepperState integrate(StepperState state, const ButcherTableau& tableau, const SemiDiscreteSystem& sys, int mu,
                       const StageSolver& solver, int n_steps);

/// sqrt(e^T M e).
double mass_norm(const SparseMatrix& M, const Vector& e);

struct MmsResult {
  double h = 0.0;
  double h_t = 0.0;
  int steps = 0;
  double t_final = 0.0;
  double l2_error = 0.0;
  double rel_l2_error = 0.0;
};

/// Integrates to t_final with exact stage solves and n_steps = ceil(t_final / h_rule)
/// equal steps; the error is measured against the nodal interpolant of u*.
MmsResult run_mms(const ProblemSpec& problem, const ButcherTableau& tableau, int k, MeshConvention convention,
                  double t_final = 1.0);

/// The stage system of the first step from interpolated initial data.
struct FirstStepSystem {
  TriMesh mesh;
  ButcherTableau tableau;
  double h = 0.0;
  double h_t = 0.0;
  SemiDiscreteSystem sys;
  StepperState state;
  std::shared_ptr<const StageOperator> op;
  Vector rhs;
};

FirstStepSystem first_step_system(const ProblemSpec& problem, const ButcherTableau& tableau, int k,
                                  MeshConvention convention, std::optional<double> h_t = {});

}  // namespace irkprec
