#pragma once

#include "irkprec/assembly.hpp"
#include "irkprec/butcher.hpp"
#include "irkprec/mesh.hpp"
#include "irkprec/stageop.hpp"
#include "irkprec/types.hpp"

#include <map>
#include <memory>
#include <string_view>
#include <vector>

namespace irkprec {

enum class SubsolveKind { Exact, VCycle };

std::string_view to_string(SubsolveKind kind);
SubsolveKind subsolve_kind_from_string(std::string_view name);

/// Mass and stiffness matrices re-assembled on every level of a mesh
/// hierarchy (coarsest first), with the interpolation between levels.
struct MultigridLevels {
  std::vector<std::shared_ptr<const SparseMatrix>> M;
  std::vector<std::shared_ptr<const SparseMatrix>> F;
  std::vector<SparseMatrix> prolongations;

  std::size_t num_levels() const { return M.size(); }
};

MultigridLevels build_multigrid_levels(const MeshHierarchy& hierarchy, const CoefficientField& coeff);

/// Approximate or exact solver for a single N x N block M + sigma F.
class Subsolver {
 public:
  virtual ~Subsolver() = default;
  virtual Vector solve(const Vector& r) const = 0;
};

/// Sparse direct factorization (Cholesky when it succeeds, LU otherwise).
class DirectSubsolver final : public Subsolver {
 public:
  explicit DirectSubsolver(const SparseMatrix& A);
  ~DirectSubsolver() override;
  Vector solve(const Vector& r) const override;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

enum class Smoother {
  Jacobi,       ///< damped by omega
  GaussSeidel,  ///< forward sweeps before, backward sweeps after the coarse correction
};

std::string_view to_string(Smoother smoother);
Smoother smoother_from_string(std::string_view name);

struct VCycleOptions {
  Smoother smoother = Smoother::GaussSeidel;
  int pre_smooth = 2;
  int post_smooth = 2;
  double omega = 2.0 / 3.0;
};

/// Geometric multigrid for A_l = M_l + sigma F_l with pointwise smoothing,
/// restriction by the transposed prolongation and an exact solve on
/// the coarsest level.
class Multigrid final : public Subsolver {
 public:
  Multigrid(const MultigridLevels& levels, double sigma, VCycleOptions options = {});

  /// One V-cycle from a zero initial guess.
  Vector solve(const Vector& r) const override;
  /// One V-cycle improving x in place.
  void cycle(const Vector& b, Vector& x) const;

  std::size_t num_levels() const { return A_.size(); }
  const SparseMatrix& level_matrix(std::size_t l) const { return A_[l]; }

 private:
  void cycle(std::size_t level, const Vector& b, Vector& x) const;
  void smooth(std::size_t level, const Vector& b, Vector& x, int sweeps, bool forward) const;

  std::vector<SparseMatrix> A_;
  std::vector<Vector> inv_diag_;
  std::vector<SparseMatrix> P_;
  std::vector<SparseMatrix> R_;
  std::unique_ptr<DirectSubsolver> coarse_;
  VCycleOptions options_;
};

enum class BlockShape { Diagonal, Lower, Upper, Full };

BlockShape block_shape(const DenseMatrix& P);

/// I (x) M + h_t^mu P (x) F inverted by block substitution over stages.
/// A full (non-triangular) P is accepted with exact subsolves only and is
/// then handled by a sparse direct solve of the whole stage system.
class BlockPreconditioner {
 public:
  BlockPreconditioner(DenseMatrix P, std::shared_ptr<const SparseMatrix> M, std::shared_ptr<const SparseMatrix> F,
                      double h_t, int mu, SubsolveKind subsolve, const MultigridLevels* levels = nullptr,
                      VCycleOptions vcycle = {});

  static BlockPreconditioner build(const ButcherTableau& tableau, PreconditionerKind kind,
                                   std::shared_ptr<const SparseMatrix> M, std::shared_ptr<const SparseMatrix> F,
                                   double h_t, int mu, SubsolveKind subsolve, const MultigridLevels* levels = nullptr,
                                   VCycleOptions vcycle = {});

  Vector apply_inverse(const Vector& r) const;

  const DenseMatrix& matrix() const { return P_; }
  BlockShape shape() const { return shape_; }
  SubsolveKind subsolve() const { return subsolve_; }
  Index size() const { return P_.rows() * M_->rows(); }
  /// Number of distinct diagonal subsolvers that were built.
  std::size_t num_subsolvers() const { return distinct_; }
  StageOperator as_operator() const { return StageOperator(M_, F_, P_, h_t_, mu_); }

 private:
  DenseMatrix P_;
  std::shared_ptr<const SparseMatrix> M_;
  std::shared_ptr<const SparseMatrix> F_;
  double h_t_;
  int mu_;
  double tau_;
  SubsolveKind subsolve_;
  BlockShape shape_;
  std::vector<std::shared_ptr<const Subsolver>> diag_;
  std::shared_ptr<const Subsolver> full_;
  std::size_t distinct_ = 0;
};

}  // namespace irkprec
