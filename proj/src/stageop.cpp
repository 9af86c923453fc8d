#include "irkprec/stageop.hpp"

#include "irkprec/assembly.hpp"

#include <cmath>
#include <string>

namespace irkprec {

StageOperator::StageOperator(std::shared_ptr<const SparseMatrix> M, std::shared_ptr<const SparseMatrix> F,
                             DenseMatrix coupling, double h_t, int mu)
    : M_(std::move(M)), F_(std::move(F)), coupling_(std::move(coupling)), h_t_(h_t), mu_(mu) {
  if (!M_ || !F_) throw InvalidArgument("StageOperator: null matrix");
  if (M_->rows() != M_->cols() || F_->rows() != F_->cols() || M_->rows() != F_->rows()) {
    throw InvalidArgument("StageOperator: M and F must be square and of equal size");
  }
  if (coupling_.rows() == 0 || coupling_.rows() != coupling_.cols()) {
    throw InvalidArgument("StageOperator: coupling matrix must be square and nonempty");
  }
  if (!(h_t_ > 0.0)) throw InvalidArgument("StageOperator: h_t must be positive");
  if (mu_ != 1 && mu_ != 2) throw InvalidArgument("StageOperator: mu must be 1 or 2");
  tau_ = std::pow(h_t_, mu_);
}

StageOperator StageOperator::with_coupling(DenseMatrix coupling) const {
  StageOperator op(M_, F_, std::move(coupling), h_t_, mu_);
  op.counter_ = counter_;
  return op;
}

void StageOperator::check_size(const Vector& x) const {
  if (x.size() != size()) {
    throw InvalidArgument("StageOperator: vector length " + std::to_string(x.size()) + ", expected " +
                          std::to_string(size()));
  }
}

Vector StageOperator::apply(const Vector& x) const {
  Vector y(size());
  apply(x, y);
  return y;
}

void StageOperator::apply(const Vector& x, Vector& y) const {
  check_size(x);
  y.resize(size());
  const Index N = block_size();
  const Index s = stages();
  Eigen::Map<const DenseMatrix> X(x.data(), N, s);
  Eigen::Map<DenseMatrix> Y(y.data(), N, s);
  DenseMatrix FX = (*F_) * X;
  Y.noalias() = (*M_) * X;
  Y.noalias() += tau_ * FX * coupling_.transpose();
  if (counter_) {
    counter_->mass += s;
    counter_->stiffness += s;
  }
}

Vector StageOperator::apply_transpose(const Vector& x) const {
  check_size(x);
  const Index N = block_size();
  const Index s = stages();
  Vector y(size());
  Eigen::Map<const DenseMatrix> X(x.data(), N, s);
  Eigen::Map<DenseMatrix> Y(y.data(), N, s);
  DenseMatrix FX = SparseMatrix(F_->transpose()) * X;
  Y.noalias() = SparseMatrix(M_->transpose()) * X;
  Y.noalias() += tau_ * FX * coupling_;
  return y;
}

DenseMatrix StageOperator::materialize() const {
  if (size() > kDenseGuard) {
    throw ResourceError("materialize: s*N = " + std::to_string(size()) + " exceeds the dense limit " +
                        std::to_string(kDenseGuard));
  }
  const Index N = block_size();
  const Index s = stages();
  const DenseMatrix Md = DenseMatrix(*M_);
  const DenseMatrix Fd = DenseMatrix(*F_);
  DenseMatrix out = DenseMatrix::Zero(size(), size());
  for (Index i = 0; i < s; ++i) {
    for (Index j = 0; j < s; ++j) {
      auto blk = out.block(i * N, j * N, N, N);
      blk = tau_ * coupling_(i, j) * Fd;
      if (i == j) blk += Md;
    }
  }
  return out;
}

SparseMatrix StageOperator::assemble_sparse() const {
  const Index N = block_size();
  const Index s = stages();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(s * M_->nonZeros() + s * s * F_->nonZeros()));
  for (Index i = 0; i < s; ++i) {
    for (Index r = 0; r < N; ++r) {
      for (SparseMatrix::InnerIterator it(*M_, r); it; ++it) {
        trip.emplace_back(static_cast<int>(i * N + r), static_cast<int>(i * N + it.col()), it.value());
      }
    }
    for (Index j = 0; j < s; ++j) {
      const double w = tau_ * coupling_(i, j);
      if (w == 0.0) continue;
      for (Index r = 0; r < N; ++r) {
        for (SparseMatrix::InnerIterator it(*F_, r); it; ++it) {
          trip.emplace_back(static_cast<int>(i * N + r), static_cast<int>(j * N + it.col()), w * it.value());
        }
      }
    }
  }
  SparseMatrix out(size(), size());
  out.setFromTriplets(trip.begin(), trip.end());
  out.makeCompressed();
  return out;
}

Vector build_stage_rhs(const SparseMatrix& F, const Vector& c, double h_t, int mu, double t_prev, const Vector& u_prev,
                       const Vector* udot_prev, const TimeLoad& load) {
  if (mu != 1 && mu != 2) throw InvalidArgument("build_stage_rhs: mu must be 1 or 2");
  if (mu == 2 && udot_prev == nullptr) throw InvalidArgument("build_stage_rhs: mu = 2 requires udot_prev");
  const Index N = F.rows();
  if (u_prev.size() != N || (mu == 2 && udot_prev->size() != N)) {
    throw InvalidArgument("build_stage_rhs: state length does not match F");
  }
  const Index s = c.size();
  Vector rhs(s * N);
  const Vector Fu = F * u_prev;
  Vector Fudot;
  if (mu == 2) Fudot = F * (*udot_prev);
  for (Index i = 0; i < s; ++i) {
    auto blk = rhs.segment(i * N, N);
    blk = load(t_prev + c[i] * h_t);
    if (blk.size() != N) throw InvalidArgument("build_stage_rhs: load has wrong length");
    blk -= Fu;
    if (mu == 2) blk -= (h_t * c[i]) * Fudot;
  }
  return rhs;
}

Vector build_stage_rhs(const TriMesh& mesh, const SparseMatrix& F, const ButcherTableau& tableau, double h_t, int mu,
                       double t_prev, const Vector& u_prev, const Vector* udot_prev, const SpaceTimeField& g) {
  auto load = [&](double t) { return assemble_load(mesh, [&](double x, double y) { return g(x, y, t); }); };
  return build_stage_rhs(F, tableau.c, h_t, mu, t_prev, u_prev, udot_prev, load);
}

}  // namespace irkprec
