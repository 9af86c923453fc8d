#include "irkprec/driver.hpp"

#include <cmath>
#include <numbers>
#include <string>

namespace irkprec {

namespace {

constexpr double kPi = std::numbers::pi;

}  // namespace

std::string_view to_string(ProblemName name) {
  switch (name) {
    case ProblemName::Diffusion: return "diffusion";
    case ProblemName::Pennes: return "pennes";
    case ProblemName::Wave: return "wave";
    case ProblemName::KleinGordon: return "klein-gordon";
  }
  return "diffusion";
}

ProblemName problem_name_from_string(std::string_view name) {
  for (auto p : {ProblemName::Diffusion, ProblemName::Pennes, ProblemName::Wave, ProblemName::KleinGordon}) {
    if (name == to_string(p)) return p;
  }
  throw InvalidArgument("unknown problem '" + std::string(name) + "'");
}

int problem_order(ProblemName name) {
  return (name == ProblemName::Diffusion || name == ProblemName::Pennes) ? 1 : 2;
}

CoefficientPreset preset_for(ProblemName name, bool variable) {
  const bool reaction = name == ProblemName::Pennes || name == ProblemName::KleinGordon;
  if (variable) return reaction ? CoefficientPreset::Variable : CoefficientPreset::VariableBetaZero;
  return reaction ? CoefficientPreset::ConstantOnes : CoefficientPreset::ConstantDiffusion;
}

TableauKind default_family(ProblemName name) {
  return problem_order(name) == 1 ? TableauKind::RadauIIA : TableauKind::GaussLegendre;
}

ProblemSpec mms_problem(ProblemName name, CoefficientPreset preset) {
  if (preset == CoefficientPreset::Custom) throw InvalidArgument("mms_problem: a named preset is required");
  const bool reaction = name == ProblemName::Pennes || name == ProblemName::KleinGordon;
  const bool beta_zero = preset == CoefficientPreset::ConstantDiffusion || preset == CoefficientPreset::VariableBetaZero;
  if (reaction == beta_zero) {
    throw InvalidArgument("mms_problem: preset '" + std::string(to_string(preset)) + "' does not fit problem '" +
                          std::string(to_string(name)) + "'");
  }
  ProblemSpec p;
  p.name = name;
  p.mu = problem_order(name);
  p.coeff = CoefficientField::from_preset(preset);

  using TimeFn = double (*)(double);
  TimeFn T, dT, dmuT;
  if (p.mu == 1) {
    T = [](double t) { return std::exp(-t); };
    dT = [](double t) { return -std::exp(-t); };
    dmuT = dT;
  } else {
    T = [](double t) { return std::cos(t); };
    dT = [](double t) { return -std::sin(t); };
    dmuT = [](double t) { return -std::cos(t); };
  }
  auto shape = [](double x, double y) { return std::cos(kPi * x) * std::cos(kPi * y); };
  p.exact = [=](double x, double y, double t) { return T(t) * shape(x, y); };
  p.exact_t = [=](double x, double y, double t) { return dT(t) * shape(x, y); };

  const CoefficientField coeff = p.coeff;
  p.k_exact = [=](double x, double y, double t) {
    const double u = T(t) * shape(x, y);
    const double ux = -kPi * T(t) * std::sin(kPi * x) * std::cos(kPi * y);
    const double uy = -kPi * T(t) * std::cos(kPi * x) * std::sin(kPi * y);
    const auto ga = coeff.grad_alpha ? (*coeff.grad_alpha)(x, y) : std::array<double, 2>{0.0, 0.0};
    const double lap = -2.0 * kPi * kPi * u;
    return -coeff.alpha(x, y) * lap - (ga[0] * ux + ga[1] * uy) + coeff.beta(x, y) * u;
  };
  const SpaceTimeField k_exact = p.k_exact;
  p.g = [=](double x, double y, double t) { return dmuT(t) * shape(x, y) + k_exact(x, y, t); };
  p.u0 = [=](double x, double y) { return T(0.0) * shape(x, y); };
  p.udot0 = [=](double x, double y) { return dT(0.0) * shape(x, y); };
  return p;
}

double timestep_rule(double h, int p, TableauKind kind, int s) {
  if (!(h > 0.0)) throw InvalidArgument("timestep_rule: h must be positive");
  if (p < 1 || s < 1) throw InvalidArgument("timestep_rule: p and s must be positive");
  const bool gauss = kind == TableauKind::GaussLegendre || kind == TableauKind::NystromGaussLegendre;
  const int q = gauss ? 2 * s : 2 * s - 1;
  return std::pow(h, static_cast<double>(p + 1) / q);
}

std::string_view to_string(MeshConvention c) { return c == MeshConvention::Nominal ? "nominal" : "element"; }

MeshConvention mesh_convention_from_string(std::string_view name) {
  if (name == "nominal") return MeshConvention::Nominal;
  if (name == "element") return MeshConvention::Element;
  throw InvalidArgument("unknown mesh convention '" + std::string(name) + "'");
}

TriMesh mesh_for(int k, MeshConvention convention) {
  if (k < 1) throw InvalidArgument("mesh_for: k must be at least 1");
  return build_mesh(convention == MeshConvention::Nominal ? k - 1 : k);
}

MeshHierarchy hierarchy_for(int k, MeshConvention convention) {
  if (k < 1) throw InvalidArgument("hierarchy_for: k must be at least 1");
  return build_hierarchy(convention == MeshConvention::Nominal ? k - 1 : k, 0);
}

SemiDiscreteSystem discretize(const TriMesh& mesh, const ProblemSpec& problem) {
  SemiDiscreteSystem sys;
  sys.M = std::make_shared<const SparseMatrix>(assemble_mass(mesh));
  sys.F = std::make_shared<const SparseMatrix>(assemble_stiffness(mesh, problem.coeff));
  const SpaceTimeField g = problem.g;
  sys.load = [mesh, g](double t) { return assemble_load(mesh, [&](double x, double y) { return g(x, y, t); }); };
  return sys;
}

StepperState initial_state(const TriMesh& mesh, const ProblemSpec& problem, double h_t) {
  StepperState st;
  st.t = 0.0;
  st.h_t = h_t;
  st.u = interpolate(mesh, problem.u0);
  if (problem.mu == 2) st.udot = interpolate(mesh, problem.udot0);
  return st;
}

StageSolver direct_stage_solver(const StageOperator& op) {
  auto solver = std::make_shared<const StageDirectSolver>(op);
  return [solver](const Vector& rhs) { return solver->solve(rhs); };
}

StageSolver gmres_stage_solver(const StageOperator& op, std::shared_ptr<const BlockPreconditioner> prec,
                               GmresOptions options) {
  auto op_ptr = std::make_shared<const StageOperator>(op);
  return [op_ptr, prec, options](const Vector& rhs) {
    auto result = gmres(*op_ptr, *prec, rhs, options);
    if (!result.report.converged) {
      throw SolverError("GMRES did not converge in " + std::to_string(result.report.iterations) + " iterations");
    }
    return result.x;
  };
}

StageOperator stage_operator(const SemiDiscreteSystem& sys, const ButcherTableau& tableau, double h_t, int mu) {
  return StageOperator(sys.M, sys.F, tableau.A, h_t, mu);
}

Vector stage_rhs(const StepperState& state, const ButcherTableau& tableau, const SemiDiscreteSystem& sys, int mu) {
  const Vector* udot = (mu == 2 && state.udot) ? &*state.udot : nullptr;
  return build_stage_rhs(*sys.F, tableau.c, state.h_t, mu, state.t, state.u, udot, sys.load);
}

StepperState complete_step(const StepperState& state, const ButcherTableau& tableau, const Vector& stages) {
  const Index N = state.u.size();
  const Index s = tableau.s;
  if (stages.size() != s * N) throw InvalidArgument("complete_step: stage vector has wrong length");
  Eigen::Map<const DenseMatrix> K(stages.data(), N, s);
  StepperState next = state;
  next.t = state.t + state.h_t;
  if (tableau.is_nystrom()) {
    if (!state.udot) throw InvalidArgument("complete_step: Nystrom step needs udot");
    next.u = state.u + state.h_t * (*state.udot) + state.h_t * state.h_t * (K * tableau.b);
    next.udot = *state.udot + state.h_t * (K * (*tableau.b_prime));
  } else {
    next.u = state.u + state.h_t * (K * tableau.b);
  }
  return next;
}

StepperState irk_step(const StepperState& state, const ButcherTableau& tableau, const SemiDiscreteSystem& sys,
                      const StageSolver& solver) {
  if (tableau.is_nystrom()) throw InvalidArgument("irk_step: expected a first-order tableau");
  return complete_step(state, tableau, solver(stage_rhs(state, tableau, sys, 1)));
}

StepperState irkn_step(const StepperState& state, const ButcherTableau& tableau, const SemiDiscreteSystem& sys,
                       const StageSolver& solver) {
  if (!tableau.is_nystrom()) throw InvalidArgument("irkn_step: expected a Nystrom tableau");
  if (!state.udot) throw InvalidArgument("irkn_step: state has no udot");
  return complete_step(state, tableau, solver(stage_rhs(state, tableau, sys, 2)));
}

StepperState integrate(StepperState state, const ButcherTableau& tableau, const SemiDiscreteSystem& sys, int mu,
                       const StageSolver& solver, int n_steps) {
  for (int n = 0; n < n_steps; ++n) {
    state = mu == 1 ? irk_step(state, tableau, sys, solver) : irkn_step(state, tableau, sys, solver);
  }
  return state;
}

double mass_norm(const SparseMatrix& M, const Vector& e) { return std::sqrt(std::max(0.0, e.dot(M * e))); }

MmsResult run_mms(const ProblemSpec& problem, const ButcherTableau& tableau, int k, MeshConvention convention,
                  double t_final) {
  if (tableau.is_nystrom() != (problem.mu == 2)) throw InvalidArgument("run_mms: tableau does not match problem order");
  const TriMesh mesh = mesh_for(k, convention);
  MmsResult res;
  res.h = std::ldexp(1.0, -k);
  const double h_rule = timestep_rule(res.h, 1, tableau.kind, tableau.s);
  res.steps = static_cast<int>(std::ceil(t_final / h_rule - 1e-12));
  res.h_t = t_final / res.steps;
  res.t_final = t_final;
  const SemiDiscreteSystem sys = discretize(mesh, problem);
  const StageOperator op = stage_operator(sys, tableau, res.h_t, problem.mu);
  const StepperState final_state =
      integrate(initial_state(mesh, problem, res.h_t), tableau, sys, problem.mu, direct_stage_solver(op), res.steps);
  const SpaceTimeField exact = problem.exact;
  const Vector ref = interpolate(mesh, [&](double x, double y) { return exact(x, y, final_state.t); });
  res.l2_error = mass_norm(*sys.M, final_state.u - ref);
  res.rel_l2_error = res.l2_error / mass_norm(*sys.M, ref);
  return res;
}

FirstStepSystem first_step_system(const ProblemSpec& problem, const ButcherTableau& tableau, int k,
                                  MeshConvention convention, std::optional<double> h_t) {
  if (tableau.is_nystrom() != (problem.mu == 2)) {
    throw InvalidArgument("first_step_system: tableau does not match problem order");
  }
  FirstStepSystem fs;
  fs.mesh = mesh_for(k, convention);
  fs.tableau = tableau;
  fs.h = std::ldexp(1.0, -k);
  fs.h_t = h_t ? *h_t : timestep_rule(fs.h, 1, tableau.kind, tableau.s);
  fs.sys = discretize(fs.mesh, problem);
  fs.state = initial_state(fs.mesh, problem, fs.h_t);
  fs.op = std::make_shared<const StageOperator>(stage_operator(fs.sys, tableau, fs.h_t, problem.mu));
  fs.rhs = stage_rhs(fs.state, tableau, fs.sys, problem.mu);
  return fs;
}

}  // namespace irkprec
