#pragma once

#include "irkprec/butcher.hpp"
#include "irkprec/mesh.hpp"
#include "irkprec/types.hpp"

#include <atomic>
#include <functional>
#include <memory>

namespace irkprec {

/// Counts sparse matvecs; attach to an operator to verify cost claims.
struct MatvecCounter {
  std::atomic<long> mass{0};
  std::atomic<long> stiffness{0};
  void reset() {
    mass = 0;
    stiffness = 0;
  }
};

/// Stage-major dense sizes above this are refused by materialize().
inline constexpr Index kDenseGuard = 20000;

/// I (x) M + h_t^mu C (x) F acting on stage vectors laid out block by stage.
/// C is usually the Butcher matrix A, or a preconditioner matrix P.
class StageOperator {
 public:
  StageOperator(std::shared_ptr<const SparseMatrix> M, std::shared_ptr<const SparseMatrix> F, DenseMatrix coupling,
                double h_t, int mu);

  Index stages() const { return coupling_.rows(); }
  Index block_size() const { return M_->rows(); }
  Index size() const { return stages() * block_size(); }
  double h_t() const { return h_t_; }
  int mu() const { return mu_; }
  /// h_t^mu
  double tau() const { return tau_; }
  const DenseMatrix& coupling() const { return coupling_; }
  const SparseMatrix& mass() const { return *M_; }
  const SparseMatrix& stiffness() const { return *F_; }
  std::shared_ptr<const SparseMatrix> mass_ptr() const { return M_; }
  std::shared_ptr<const SparseMatrix> stiffness_ptr() const { return F_; }

  /// Same M, F, h_t and mu with a different coupling matrix.
  StageOperator with_coupling(DenseMatrix coupling) const;

  Vector apply(const Vector& x) const;
  void apply(const Vector& x, Vector& y) const;
  Vector apply_transpose(const Vector& x) const;

  /// Dense sN x sN copy; throws ResourceError above kDenseGuard.
  DenseMatrix materialize() const;
  /// Sparse sN x sN copy, for direct solvers and cross-checks.
  SparseMatrix assemble_sparse() const;

  void set_counter(std::shared_ptr<MatvecCounter> counter) { counter_ = std::move(counter); }

 private:
  void check_size(const Vector& x) const;

  std::shared_ptr<const SparseMatrix> M_;
  std::shared_ptr<const SparseMatrix> F_;
  DenseMatrix coupling_;
  double h_t_;
  int mu_;
  double tau_;
  std::shared_ptr<MatvecCounter> counter_;
};

/// Load vector <g(., t), phi> for a given time.
using TimeLoad = std::function<Vector(double)>;
using SpaceTimeField = std::function<double(double, double, double)>;

/// Block i = load(t_prev + c_i h_t) - F (u_prev + (mu - 1) h_t c_i udot_prev).
/// udot_prev is required for mu = 2 and ignored for mu = 1.
Vector build_stage_rhs(const SparseMatrix& F, const Vector& c, double h_t, int mu, double t_prev, const Vector& u_prev,
                       const Vector* udot_prev, const TimeLoad& load);

Vector build_stage_rhs(const TriMesh& mesh, const SparseMatrix& F, const ButcherTableau& tableau, double h_t, int mu,
                       double t_prev, const Vector& u_prev, const Vector* udot_prev, const SpaceTimeField& g);

}  // namespace irkprec
