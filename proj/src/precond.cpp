#include "irkprec/precond.hpp"

#include <Eigen/SparseCholesky>
#include <Eigen/SparseLU>

#include <cmath>
#include <string>

namespace irkprec {

namespace {

using ColSparse = Eigen::SparseMatrix<double, Eigen::ColMajor, int>;

SparseMatrix combine(const SparseMatrix& M, const SparseMatrix& F, double sigma) {
  SparseMatrix A = M + sigma * F;
  A.makeCompressed();
  return A;
}

}  // namespace

std::string_view to_string(SubsolveKind kind) { return kind == SubsolveKind::Exact ? "exact" : "vcycle"; }

SubsolveKind subsolve_kind_from_string(std::string_view name) {
  if (name == "exact") return SubsolveKind::Exact;
  if (name == "vcycle") return SubsolveKind::VCycle;
  throw InvalidArgument("unknown subsolve '" + std::string(name) + "'");
}

std::string_view to_string(Smoother smoother) {
  return smoother == Smoother::Jacobi ? "jacobi" : "gauss-seidel";
}

Smoother smoother_from_string(std::string_view name) {
  if (name == "jacobi") return Smoother::Jacobi;
  if (name == "gauss-seidel") return Smoother::GaussSeidel;
  throw InvalidArgument("unknown smoother '" + std::string(name) + "'");
}

MultigridLevels build_multigrid_levels(const MeshHierarchy& hierarchy, const CoefficientField& coeff) {
  MultigridLevels levels;
  for (const auto& mesh : hierarchy.levels) {
    levels.M.push_back(std::make_shared<const SparseMatrix>(assemble_mass(mesh)));
    levels.F.push_back(std::make_shared<const SparseMatrix>(assemble_stiffness(mesh, coeff)));
  }
  levels.prolongations = hierarchy.prolongations;
  return levels;
}

struct DirectSubsolver::Impl {
  Eigen::SimplicialLDLT<ColSparse> ldlt;
  Eigen::SparseLU<ColSparse> lu;
  bool use_lu = false;
};

DirectSubsolver::DirectSubsolver(const SparseMatrix& A) : impl_(std::make_unique<Impl>()) {
  const ColSparse Ac(A);
  impl_->ldlt.compute(Ac);
  bool ok = impl_->ldlt.info() == Eigen::Success;
  if (ok) {
    const auto d = impl_->ldlt.vectorD();
    const double dmax = d.cwiseAbs().maxCoeff();
    ok = (d.array() > 1e-14 * dmax).all();
  }
  if (!ok) {
    impl_->use_lu = true;
    impl_->lu.analyzePattern(Ac);
    impl_->lu.factorize(Ac);
    if (impl_->lu.info() != Eigen::Success) {
      throw SolverError("DirectSubsolver: factorization failed: " + impl_->lu.lastErrorMessage());
    }
  }
}

DirectSubsolver::~DirectSubsolver() = default;

Vector DirectSubsolver::solve(const Vector& r) const {
  Vector z = impl_->use_lu ? Vector(impl_->lu.solve(r)) : Vector(impl_->ldlt.solve(r));
  if (!z.allFinite()) throw SolverError("DirectSubsolver: non-finite solution");
  return z;
}

Multigrid::Multigrid(const MultigridLevels& levels, double sigma, VCycleOptions options) : options_(options) {
  if (levels.num_levels() == 0) throw InvalidArgument("Multigrid: no levels");
  if (levels.prolongations.size() + 1 != levels.num_levels()) {
    throw InvalidArgument("Multigrid: prolongation count does not match level count");
  }
  for (std::size_t l = 0; l < levels.num_levels(); ++l) {
    A_.push_back(combine(*levels.M[l], *levels.F[l], sigma));
    Vector d = A_.back().diagonal();
    if ((d.array() <= 0.0).any()) throw SolverError("Multigrid: nonpositive diagonal on level " + std::to_string(l));
    inv_diag_.push_back(d.cwiseInverse());
  }
  P_ = levels.prolongations;
  for (const auto& P : P_) R_.emplace_back(P.transpose());
  coarse_ = std::make_unique<DirectSubsolver>(A_.front());
}

Vector Multigrid::solve(const Vector& r) const {
  Vector x = Vector::Zero(r.size());
  cycle(A_.size() - 1, r, x);
  return x;
}

void Multigrid::cycle(const Vector& b, Vector& x) const { cycle(A_.size() - 1, b, x); }

void Multigrid::cycle(std::size_t level, const Vector& b, Vector& x) const {
  if (level == 0) {
    x = coarse_->solve(b);
    return;
  }
  const SparseMatrix& A = A_[level];
  smooth(level, b, x, options_.pre_smooth, true);
  const Vector rc = R_[level - 1] * (b - A * x);
  Vector ec = Vector::Zero(rc.size());
  cycle(level - 1, rc, ec);
  x += P_[level - 1] * ec;
  smooth(level, b, x, options_.post_smooth, false);
}

void Multigrid::smooth(std::size_t level, const Vector& b, Vector& x, int sweeps, bool forward) const {
  const SparseMatrix& A = A_[level];
  const Vector& dinv = inv_diag_[level];
  if (options_.smoother == Smoother::Jacobi) {
    for (int k = 0; k < sweeps; ++k) x += options_.omega * dinv.cwiseProduct(b - A * x);
    return;
  }
  const Index n = A.rows();
  for (int k = 0; k < sweeps; ++k) {
    for (Index step = 0; step < n; ++step) {
      const Index i = forward ? step : n - 1 - step;
      double r = b[i];
      for (SparseMatrix::InnerIterator it(A, i); it; ++it) r -= it.value() * x[it.col()];
      x[i] += r * dinv[i];
    }
  }
}

BlockShape block_shape(const DenseMatrix& P) {
  const bool upper_zero = P.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero(0.0);
  const bool lower_zero = P.triangularView<Eigen::StrictlyLower>().toDenseMatrix().isZero(0.0);
  if (upper_zero && lower_zero) return BlockShape::Diagonal;
  if (upper_zero) return BlockShape::Lower;
  if (lower_zero) return BlockShape::Upper;
  return BlockShape::Full;
}

BlockPreconditioner::BlockPreconditioner(DenseMatrix P, std::shared_ptr<const SparseMatrix> M,
                                         std::shared_ptr<const SparseMatrix> F, double h_t, int mu,
                                         SubsolveKind subsolve, const MultigridLevels* levels, VCycleOptions vcycle)
    : P_(std::move(P)), M_(std::move(M)), F_(std::move(F)), h_t_(h_t), mu_(mu), subsolve_(subsolve) {
  if (P_.rows() == 0 || P_.rows() != P_.cols()) throw InvalidPreconditioner("preconditioner matrix must be square");
  if (!M_ || !F_ || M_->rows() != F_->rows()) throw InvalidArgument("BlockPreconditioner: bad M or F");
  if (mu_ != 1 && mu_ != 2) throw InvalidArgument("BlockPreconditioner: mu must be 1 or 2");
  tau_ = std::pow(h_t_, mu_);
  shape_ = block_shape(P_);
  if (subsolve_ == SubsolveKind::VCycle) {
    if (levels == nullptr) throw InvalidArgument("BlockPreconditioner: V-cycle subsolves need multigrid levels");
    if (levels->M.back()->rows() != M_->rows()) {
      throw InvalidArgument("BlockPreconditioner: finest multigrid level does not match M");
    }
  }
  if (shape_ == BlockShape::Full) {
    if (subsolve_ != SubsolveKind::Exact) {
      throw InvalidPreconditioner("a non-triangular preconditioner matrix requires exact subsolves");
    }
    full_ = std::make_shared<DirectSubsolver>(StageOperator(M_, F_, P_, h_t_, mu_).assemble_sparse());
    distinct_ = 1;
    return;
  }
  const Index s = P_.rows();
  for (Index i = 0; i < s; ++i) {
    if (P_(i, i) == 0.0) {
      throw InvalidPreconditioner("zero diagonal entry p_" + std::to_string(i) + std::to_string(i));
    }
  }
  std::map<double, std::shared_ptr<const Subsolver>> by_value;
  diag_.resize(static_cast<std::size_t>(s));
  for (Index i = 0; i < s; ++i) {
    const double p = P_(i, i);
    auto it = by_value.find(p);
    if (it == by_value.end()) {
      std::shared_ptr<const Subsolver> solver;
      if (subsolve_ == SubsolveKind::Exact) {
        solver = std::make_shared<DirectSubsolver>(combine(*M_, *F_, tau_ * p));
      } else {
        solver = std::make_shared<Multigrid>(*levels, tau_ * p, vcycle);
      }
      it = by_value.emplace(p, std::move(solver)).first;
    }
    diag_[static_cast<std::size_t>(i)] = it->second;
  }
  distinct_ = by_value.size();
}

BlockPreconditioner BlockPreconditioner::build(const ButcherTableau& tableau, PreconditionerKind kind,
                                               std::shared_ptr<const SparseMatrix> M,
                                               std::shared_ptr<const SparseMatrix> F, double h_t, int mu,
                                               SubsolveKind subsolve, const MultigridLevels* levels,
                                               VCycleOptions vcycle) {
  return BlockPreconditioner(butcher_preconditioner_matrix(tableau.A, kind), std::move(M), std::move(F), h_t, mu,
                             subsolve, levels, vcycle);
}

Vector BlockPreconditioner::apply_inverse(const Vector& r) const {
  if (r.size() != size()) {
    throw InvalidArgument("apply_inverse: vector length " + std::to_string(r.size()) + ", expected " +
                          std::to_string(size()));
  }
  if (shape_ == BlockShape::Full) return full_->solve(r);
  const Index N = M_->rows();
  const Index s = P_.rows();
  Vector z(r.size());
  // F z_j, kept for the coupling terms of later stages.
  std::vector<Vector> Fz(static_cast<std::size_t>(s));
  auto stage = [&](Index i) {
    Vector rhs = r.segment(i * N, N);
    for (Index j = 0; j < s; ++j) {
      if (j == i || P_(i, j) == 0.0) continue;
      rhs -= (tau_ * P_(i, j)) * Fz[static_cast<std::size_t>(j)];
    }
    z.segment(i * N, N) = diag_[static_cast<std::size_t>(i)]->solve(rhs);
    if (shape_ != BlockShape::Diagonal) Fz[static_cast<std::size_t>(i)] = (*F_) * z.segment(i * N, N);
  };
  if (shape_ == BlockShape::Upper) {
    for (Index i = s - 1; i >= 0; --i) stage(i);
  } else {
    for (Index i = 0; i < s; ++i) stage(i);
  }
  return z;
}

}  // namespace irkprec
