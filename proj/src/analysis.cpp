#include "irkprec/analysis.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <string>

namespace irkprec {

namespace {

using Complex = std::complex<double>;

void check_guard(const StageOperator& op) {
  if (op.size() > kDenseGuard) {
    throw ResourceError("s*N = " + std::to_string(op.size()) + " exceeds the dense limit " +
                        std::to_string(kDenseGuard));
  }
}

template <class VectorT>
struct LanczosOut {
  double value = 0.0;
  VectorT vector;
  int iterations = 0;
  bool converged = false;
};

// Largest algebraic eigenvalue of a Hermitian operator, full reorthogonalization.
template <class VectorT>
LanczosOut<VectorT> lanczos(const std::function<VectorT(const VectorT&)>& apply, const VectorT& start, double tol,
                            int max_iter) {
  LanczosOut<VectorT> out;
  const Index n = start.size();
  const int m = static_cast<int>(std::min<Index>(max_iter, n));
  std::vector<VectorT> Q;
  std::vector<double> alpha, beta;
  Q.push_back(start / start.norm());
  Eigen::VectorXd ritz_vec;
  for (int j = 0; j < m; ++j) {
    VectorT w = apply(Q.back());
    const double a = std::real(Q.back().dot(w));
    alpha.push_back(a);
    w -= a * Q.back();
    if (j > 0) w -= beta.back() * Q[Q.size() - 2];
    for (int pass = 0; pass < 2; ++pass) {
      for (const auto& q : Q) w -= q.dot(w) * q;
    }
    const double b = w.norm();
    const int k = j + 1;
    Eigen::VectorXd d = Eigen::Map<Eigen::VectorXd>(alpha.data(), k);
    Eigen::VectorXd e = k > 1 ? Eigen::VectorXd(Eigen::Map<Eigen::VectorXd>(beta.data(), k - 1)) : Eigen::VectorXd();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> tri;
    tri.computeFromTridiagonal(d, e, Eigen::ComputeEigenvectors);
    const double theta = tri.eigenvalues()[k - 1];
    ritz_vec = tri.eigenvectors().col(k - 1);
    const double scale = std::max(tri.eigenvalues().cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    const double residual = b * std::abs(ritz_vec[k - 1]);
    out.value = theta;
    out.iterations = k;
    const bool invariant = b <= 1e-13 * scale;
    if (residual <= tol * scale || invariant || k == n) {
      out.converged = true;
      break;
    }
    beta.push_back(b);
    Q.push_back(w / b);
  }
  out.vector = VectorT::Zero(n);
  for (Index i = 0; i < ritz_vec.size(); ++i) out.vector += ritz_vec[i] * Q[static_cast<std::size_t>(i)];
  out.vector /= out.vector.norm();
  return out;
}

// B = L * D * R with D block-diagonal over modes (one s x s block per mode).
struct ModalOperator {
  const DenseMatrix* L;
  const DenseMatrix* R;
  const DenseMatrix* Linv;
  const DenseMatrix* Rinv;
  std::vector<DenseMatrix> D;
  std::vector<DenseMatrix> Dinv;
  Index N;
  Index s;

  // Y.row(k) <- (blocks[k] * Y.row(k)^T)^T, or with the transpose.
  void modes(DenseMatrix& Y, const std::vector<DenseMatrix>& blocks, bool transpose) const {
    for (Index k = 0; k < N; ++k) {
      const Eigen::RowVectorXd y = Y.row(k);
      if (transpose) {
        Y.row(k) = y * blocks[static_cast<std::size_t>(k)];
      } else {
        Y.row(k) = y * blocks[static_cast<std::size_t>(k)].transpose();
      }
    }
  }

  Vector run(const Vector& x, const DenseMatrix& first, const std::vector<DenseMatrix>& blocks, bool tr,
             const DenseMatrix& last, bool first_t, bool last_t) const {
    Eigen::Map<const DenseMatrix> X(x.data(), N, s);
    DenseMatrix Y = first_t ? DenseMatrix(first.transpose() * X) : DenseMatrix(first * X);
    modes(Y, blocks, tr);
    Vector z(x.size());
    Eigen::Map<DenseMatrix> Z(z.data(), N, s);
    if (last_t) {
      Z.noalias() = last.transpose() * Y;
    } else {
      Z.noalias() = last * Y;
    }
    return z;
  }

  Vector apply(const Vector& x) const { return run(x, *R, D, false, *L, false, false); }
  Vector apply_t(const Vector& x) const { return run(x, *L, D, true, *R, true, true); }
  Vector apply_inv(const Vector& x) const { return run(x, *Linv, Dinv, false, *Rinv, false, false); }
  Vector apply_inv_t(const Vector& x) const { return run(x, *Rinv, Dinv, true, *Linv, true, true); }
};

std::vector<DenseMatrix> mode_blocks(const StageOperator& op, const DenseMatrix* P, const ModalBasis& basis) {
  const Index s = op.stages();
  const DenseMatrix I = DenseMatrix::Identity(s, s);
  std::vector<DenseMatrix> blocks;
  blocks.reserve(static_cast<std::size_t>(basis.lambda.size()));
  for (Index k = 0; k < basis.lambda.size(); ++k) {
    const double tl = op.tau() * basis.lambda[k];
    DenseMatrix Ek = I + tl * op.coupling();
    if (P) Ek = (I + tl * (*P)).partialPivLu().solve(Ek);
    blocks.push_back(std::move(Ek));
  }
  return blocks;
}

Vector seeded_start(Index n) {
  std::mt19937_64 rng(20240607);
  std::normal_distribution<double> dist;
  Vector v(n);
  for (Index i = 0; i < n; ++i) v[i] = dist(rng);
  return v;
}

double modal_condition(const StageOperator& op, const DenseMatrix* P, const ModalBasis& basis,
                       const AnalysisOptions& options) {
  if (basis.V.rows() != op.block_size()) throw InvalidArgument("condition_number: modal basis size mismatch");
  const DenseMatrix MVt = basis.MV.transpose();
  const DenseMatrix Vt = basis.V.transpose();
  ModalOperator B;
  B.N = op.block_size();
  B.s = op.stages();
  B.R = &MVt;
  B.Rinv = &basis.V;
  if (P) {
    B.L = &basis.V;
    B.Linv = &MVt;
  } else {
    B.L = &basis.MV;
    B.Linv = &Vt;
  }
  B.D = mode_blocks(op, P, basis);
  B.Dinv.reserve(B.D.size());
  for (const auto& d : B.D) B.Dinv.push_back(d.inverse());

  const Vector start = seeded_start(op.size());
  const auto big = lanczos<Vector>([&](const Vector& x) { return B.apply_t(B.apply(x)); }, start,
                                   options.lanczos_tol, options.lanczos_max_iter);
  const auto small = lanczos<Vector>([&](const Vector& x) { return B.apply_inv_t(B.apply_inv(x)); }, start,
                                     options.lanczos_tol, options.lanczos_max_iter);
  if (!big.converged || !small.converged) throw SolverError("condition_number: Lanczos did not converge");
  return std::sqrt(big.value * small.value);
}

bool use_dense(const StageOperator& op, const AnalysisOptions& options) {
  switch (options.method) {
    case AnalysisMethod::Dense: return true;
    case AnalysisMethod::Modal: return false;
    case AnalysisMethod::Auto: break;
  }
  return op.size() <= options.dense_limit;
}

double cross(Complex a, Complex b) { return a.real() * b.imag() - a.imag() * b.real(); }

double distance_to_segment(Complex a, Complex b, Complex z) {
  const Complex ab = b - a;
  const double len2 = std::norm(ab);
  if (len2 == 0.0) return std::abs(z - a);
  const double t = std::clamp(((z - a) * std::conj(ab)).real() / len2, 0.0, 1.0);
  return std::abs(z - (a + t * ab));
}

// eig(I (x) M + tau C (x) F) is the union of eig(M + tau lambda F) over the
// eigenvalues lambda of a diagonalizable C.
std::vector<Complex> stage_operator_eigenvalues(const StageOperator& op) {
  Eigen::EigenSolver<DenseMatrix> ec(op.coupling());
  const ComplexMatrix W = ec.eigenvectors();
  Eigen::JacobiSVD<ComplexMatrix> wsvd(W);
  const auto& wsv = wsvd.singularValues();
  if (ec.info() != Eigen::Success || !(wsv[wsv.size() - 1] > 1e-8 * wsv[0])) {
    Eigen::EigenSolver<DenseMatrix> es(op.materialize(), false);
    return {es.eigenvalues().begin(), es.eigenvalues().end()};
  }
  const DenseMatrix Md(op.mass());
  const DenseMatrix Fd(op.stiffness());
  std::vector<Complex> out;
  const ComplexVector lam = ec.eigenvalues();
  for (Index i = 0; i < lam.size(); ++i) {
    const Complex l = lam[i];
    if (l.imag() == 0.0) {
      Eigen::SelfAdjointEigenSolver<DenseMatrix> es(Md + op.tau() * l.real() * Fd, Eigen::EigenvaluesOnly);
      for (Index j = 0; j < es.eigenvalues().size(); ++j) out.emplace_back(es.eigenvalues()[j], 0.0);
    } else if (l.imag() > 0.0) {
      // The conjugate eigenvalue of C contributes the conjugate spectrum.
      const ComplexMatrix H = Md.cast<Complex>() + (op.tau() * l) * Fd.cast<Complex>();
      Eigen::ComplexEigenSolver<ComplexMatrix> es(H, false);
      for (Index j = 0; j < es.eigenvalues().size(); ++j) {
        out.push_back(es.eigenvalues()[j]);
        out.push_back(std::conj(es.eigenvalues()[j]));
      }
    }
  }
  return out;
}

}  // namespace

ModalBasis modal_basis(const SparseMatrix& M, const SparseMatrix& F) {
  const DenseMatrix Md(M);
  const DenseMatrix Fd(F);
  Eigen::GeneralizedSelfAdjointEigenSolver<DenseMatrix> ges(Fd, Md, Eigen::ComputeEigenvectors | Eigen::Ax_lBx);
  if (ges.info() != Eigen::Success) throw SolverError("modal_basis: generalized eigensolver failed");
  ModalBasis basis;
  basis.lambda = ges.eigenvalues();
  basis.V = ges.eigenvectors();
  basis.MV = Md * basis.V;
  return basis;
}

DenseMatrix preconditioned_matrix(const StageOperator& op, const DenseMatrix* P) {
  check_guard(op);
  DenseMatrix A = op.materialize();
  if (!P) return A;
  const DenseMatrix Pd = op.with_coupling(*P).materialize();
  return Pd.partialPivLu().solve(A);
}

double condition_number(const DenseMatrix& B) {
  if (B.size() == 0) throw InvalidArgument("condition_number: empty matrix");
  Eigen::BDCSVD<DenseMatrix> svd(B);
  const auto& sv = svd.singularValues();
  const double smin = sv[sv.size() - 1];
  if (smin == 0.0) return std::numeric_limits<double>::infinity();
  return sv[0] / smin;
}

double condition_number(const StageOperator& op, const DenseMatrix* P, const ModalBasis* basis,
                        const AnalysisOptions& options) {
  check_guard(op);
  if (use_dense(op, options)) return condition_number(preconditioned_matrix(op, P));
  if (basis) return modal_condition(op, P, *basis, options);
  const ModalBasis own = modal_basis(op.mass(), op.stiffness());
  return modal_condition(op, P, own, options);
}

double SpectrumResult::min_abs() const {
  double m = std::numeric_limits<double>::infinity();
  for (const auto& z : eigenvalues) m = std::min(m, std::abs(z));
  return m;
}

double SpectrumResult::max_abs() const {
  double m = 0.0;
  for (const auto& z : eigenvalues) m = std::max(m, std::abs(z));
  return m;
}

SpectrumResult spectrum(const StageOperator& op, const DenseMatrix* P, const ModalBasis* basis,
                        const AnalysisOptions& options) {
  check_guard(op);
  SpectrumResult out;
  out.eigenvalues.reserve(static_cast<std::size_t>(op.size()));
  if (use_dense(op, options)) {
    const DenseMatrix B = preconditioned_matrix(op, P);
    Eigen::EigenSolver<DenseMatrix> es(B, false);
    if (es.info() != Eigen::Success) throw SolverError("spectrum: eigensolver failed");
    for (Index i = 0; i < es.eigenvalues().size(); ++i) out.eigenvalues.push_back(es.eigenvalues()[i]);
    out.kappa = condition_number(B);
    return out;
  }
  ModalBasis own;
  if (!basis) {
    own = modal_basis(op.mass(), op.stiffness());
    basis = &own;
  }
  if (P) {
    // P^-1 A is similar to its block-modal form, so the mode blocks carry the spectrum.
    for (const auto& blk : mode_blocks(op, P, *basis)) {
      Eigen::EigenSolver<DenseMatrix> es(blk, false);
      for (Index i = 0; i < es.eigenvalues().size(); ++i) out.eigenvalues.push_back(es.eigenvalues()[i]);
    }
  } else {
    out.eigenvalues = stage_operator_eigenvalues(op);
  }
  out.kappa = modal_condition(op, P, *basis, options);
  return out;
}

double distance_to_polygon(const std::vector<Complex>& vertices, Complex z) {
  if (vertices.empty()) throw InvalidArgument("distance_to_polygon: no vertices");
  const std::size_t n = vertices.size();
  double dist = std::abs(z - vertices[0]);
  for (std::size_t i = 0; i < n; ++i) dist = std::min(dist, distance_to_segment(vertices[i], vertices[(i + 1) % n], z));
  double area2 = 0.0;
  double extent = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    area2 += cross(vertices[i], vertices[(i + 1) % n]);
    extent = std::max(extent, std::abs(vertices[i] - vertices[0]));
  }
  if (std::abs(area2) <= 1e-12 * extent * extent) return dist;
  const double orient = area2 > 0.0 ? 1.0 : -1.0;
  for (std::size_t i = 0; i < n; ++i) {
    const Complex a = vertices[i];
    const Complex b = vertices[(i + 1) % n];
    if (orient * cross(b - a, z - a) < -1e-12 * extent * extent) return dist;
  }
  return 0.0;
}

FovResult field_of_values(const DenseMatrix& B, int n_angles) {
  if (n_angles < 8) throw InvalidArgument("field_of_values: need at least 8 angles");
  if (B.rows() != B.cols() || B.rows() == 0) throw InvalidArgument("field_of_values: matrix must be square");
  const Index n = B.rows();
  const DenseMatrix S = 0.5 * (B + B.transpose());
  const DenseMatrix K = 0.5 * (B - B.transpose());
  const ComplexMatrix Bc = B.cast<Complex>();
  FovResult out;
  out.boundary_points.reserve(static_cast<std::size_t>(n_angles));
  constexpr Index kDenseEig = 300;
  ComplexVector v = seeded_start(n).cast<Complex>();
  for (int k = 0; k < n_angles; ++k) {
    const double theta = 2.0 * std::numbers::pi * k / n_angles;
    const double ct = std::cos(theta);
    const double st = std::sin(theta);
    if (n <= kDenseEig) {
      const ComplexMatrix H = ct * S.cast<Complex>() + Complex(0.0, st) * K.cast<Complex>();
      Eigen::SelfAdjointEigenSolver<ComplexMatrix> es(H);
      v = es.eigenvectors().col(n - 1);
    } else {
      auto apply = [&](const ComplexVector& x) -> ComplexVector {
        const DenseMatrix xr = x.real();
        const DenseMatrix xi = x.imag();
        // (cos S + i sin K)(xr + i xi)
        const Vector re = ct * (S * xr) - st * (K * xi);
        const Vector im = ct * (S * xi) + st * (K * xr);
        ComplexVector y(x.size());
        y.real() = re;
        y.imag() = im;
        return y;
      };
      v = lanczos<ComplexVector>(apply, v, 1e-12, 400).vector;
    }
    out.boundary_points.push_back(v.dot(Bc * v));
  }
  out.min_distance_to_origin = distance_to_polygon(out.boundary_points, Complex(0.0, 0.0));
  return out;
}

double butcher_kappa(const DenseMatrix& P, const DenseMatrix& A) {
  if (P.rows() != P.cols() || A.rows() != A.cols() || P.rows() != A.rows()) {
    throw InvalidArgument("butcher_kappa: dimension mismatch");
  }
  Eigen::FullPivLU<DenseMatrix> lu(P);
  if (!lu.isInvertible()) throw InvalidPreconditioner("butcher_kappa: P is singular");
  Eigen::JacobiSVD<DenseMatrix> svd(lu.solve(A));
  const auto& sv = svd.singularValues();
  return sv[0] / sv[sv.size() - 1];
}

LanczosResult lanczos_largest(const std::function<Vector(const Vector&)>& apply, const Vector& start, double tol,
                              int max_iter) {
  const auto r = lanczos<Vector>(apply, start, tol, max_iter);
  return {r.value, r.vector, r.iterations, r.converged};
}

}  // namespace irkprec
