#pragma once

#include "irkprec/precond.hpp"
#include "irkprec/stageop.hpp"
#include "irkprec/types.hpp"

#include <functional>
#include <iosfwd>
#include <memory>
#include <optional>
#include <vector>

namespace irkprec {

using LinearMap = std::function<Vector(const Vector&)>;

struct GmresOptions {
  double tol = 1e-8;
  int max_iter = 500;
  /// Record the unpreconditioned relative residual after every iteration.
  bool track_true_residual = false;
  /// Solution used for rel_error, when known.
  const Vector* reference = nullptr;
};

struct SolveReport {
  int iterations = 0;
  double wall_time = 0.0;
  /// Final ||P^-1 (b - A x)|| / ||P^-1 b||.
  double rel_residual = 0.0;
  /// Final ||b - A x|| / ||b||.
  double true_rel_residual = 0.0;
  std::optional<double> rel_error;
  bool converged = false;
  /// Preconditioned relative residual after 0, 1, ... iterations.
  std::vector<double> residual_history;
  /// Unpreconditioned relative residual, filled when tracked.
  std::vector<double> true_residual_history;
};

struct GmresResult {
  Vector x;
  SolveReport report;
};

/// Left-preconditioned GMRES without restarts, modified Gram-Schmidt, zero
/// initial guess. Non-convergence is reported, not thrown.
GmresResult gmres(const LinearMap& op, const LinearMap& prec, const Vector& b, const GmresOptions& options = {});
GmresResult gmres(const StageOperator& op, const BlockPreconditioner& prec, const Vector& b,
                  const GmresOptions& options = {});

/// Direct solver for a stage system: the coupling matrix is diagonalized, the
/// s shifted blocks M + h_t^mu lambda_i F are factored once, and every solve
/// is refined iteratively to a relative residual of 1e-12.
class StageDirectSolver {
 public:
  explicit StageDirectSolver(const StageOperator& op);
  ~StageDirectSolver();
  StageDirectSolver(StageDirectSolver&&) noexcept;
  StageDirectSolver& operator=(StageDirectSolver&&) noexcept;

  Vector solve(const Vector& b) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// One-shot StageDirectSolver.
Vector reference_solve(const StageOperator& op, const Vector& b);

/// CSV with header "iteration,preconditioned_residual,unpreconditioned_residual".
void write_residual_history_csv(std::ostream& os, const SolveReport& report);

}  // namespace irkprec
