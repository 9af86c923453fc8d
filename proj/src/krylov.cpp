#include "irkprec/krylov.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SparseLU>

#include <chrono>
#include <cmath>
#include <complex>
#include <limits>
#include <ostream>
#include <string>

namespace irkprec {

namespace {

using Complex = std::complex<double>;
using ComplexSparse = Eigen::SparseMatrix<Complex, Eigen::ColMajor, int>;

constexpr Index kReferenceGuard = 4'000'000;

}  // namespace

GmresResult gmres(const LinearMap& op, const LinearMap& prec, const Vector& b, const GmresOptions& options) {
  if (!(options.tol > 0.0)) throw InvalidArgument("gmres: tol must be positive");
  if (options.max_iter < 1) throw InvalidArgument("gmres: max_iter must be at least 1");
  const auto start = std::chrono::steady_clock::now();
  const Index n = b.size();
  GmresResult out;
  out.x = Vector::Zero(n);
  SolveReport& rep = out.report;
  const double bnorm = b.norm();

  auto finish = [&](bool converged) {
    const Vector r = b - op(out.x);
    rep.true_rel_residual = bnorm > 0.0 ? r.norm() / bnorm : 0.0;
    rep.converged = converged;
    if (options.reference) {
      const double ref = options.reference->norm();
      const double err = (out.x - *options.reference).norm();
      rep.rel_error = ref > 0.0 ? err / ref : err;
    }
    rep.wall_time = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    return out;
  };

  const Vector z0 = prec(b);
  const double beta = z0.norm();
  rep.residual_history.push_back(beta > 0.0 ? 1.0 : 0.0);
  if (options.track_true_residual) rep.true_residual_history.push_back(bnorm > 0.0 ? 1.0 : 0.0);
  if (beta == 0.0 || 1.0 <= options.tol) {
    rep.rel_residual = beta > 0.0 ? 1.0 : 0.0;
    return finish(true);
  }

  const int m = options.max_iter;
  std::vector<Vector> V;
  V.reserve(64);
  DenseMatrix H = DenseMatrix::Zero(m + 1, m);
  Vector cs = Vector::Zero(m), sn = Vector::Zero(m);
  Vector g = Vector::Zero(m + 1);
  g[0] = beta;
  V.push_back(z0 / beta);

  auto solution = [&](int k) {
    const Vector y = H.topLeftCorner(k, k).triangularView<Eigen::Upper>().solve(g.head(k));
    Vector x = Vector::Zero(n);
    for (int j = 0; j < k; ++j) x += y[j] * V[static_cast<std::size_t>(j)];
    return x;
  };

  int k = 0;
  bool converged = false;
  double rel = 1.0;
  while (k < m) {
    Vector w = prec(op(V[static_cast<std::size_t>(k)]));
    const double wnorm0 = w.norm();
    for (int j = 0; j <= k; ++j) {
      const Vector& vj = V[static_cast<std::size_t>(j)];
      H(j, k) = vj.dot(w);
      w -= H(j, k) * vj;
    }
    const double h_next = w.norm();
    H(k + 1, k) = h_next;
    const bool breakdown = h_next <= 1e-14 * std::max(wnorm0, std::numeric_limits<double>::min());
    if (!breakdown) V.push_back(w / h_next);
    for (int j = 0; j < k; ++j) {
      const double t = cs[j] * H(j, k) + sn[j] * H(j + 1, k);
      H(j + 1, k) = -sn[j] * H(j, k) + cs[j] * H(j + 1, k);
      H(j, k) = t;
    }
    const double denom = std::hypot(H(k, k), H(k + 1, k));
    cs[k] = H(k, k) / denom;
    sn[k] = H(k + 1, k) / denom;
    H(k, k) = denom;
    H(k + 1, k) = 0.0;
    g[k + 1] = -sn[k] * g[k];
    g[k] = cs[k] * g[k];
    ++k;
    rel = std::abs(g[k]) / beta;
    rep.residual_history.push_back(rel);
    if (options.track_true_residual) {
      const Vector xk = solution(k);
      rep.true_residual_history.push_back((b - op(xk)).norm() / bnorm);
    }
    if (rel <= options.tol || breakdown) {
      converged = true;
      break;
    }
  }
  out.x = solution(k);
  rep.iterations = k;
  rep.rel_residual = prec(b - op(out.x)).norm() / beta;
  return finish(converged);
}

GmresResult gmres(const StageOperator& op, const BlockPreconditioner& prec, const Vector& b,
                  const GmresOptions& options) {
  if (b.size() != op.size() || prec.size() != op.size()) throw InvalidArgument("gmres: dimension mismatch");
  return gmres([&](const Vector& x) { return op.apply(x); }, [&](const Vector& x) { return prec.apply_inverse(x); },
               b, options);
}

struct StageDirectSolver::Impl {
  StageOperator op;
  ComplexMatrix W;
  ComplexMatrix Winv_t;
  std::vector<std::unique_ptr<Eigen::SparseLU<ComplexSparse>>> lus;

  explicit Impl(const StageOperator& o) : op(o) {}

  Vector solve_once(const Vector& r) const {
    const Index N = op.block_size();
    const Index s = op.stages();
    // Stage-major: columns of R are the stage blocks, so (W^-1 (x) I) r is R W^-T.
    Eigen::Map<const DenseMatrix> R(r.data(), N, s);
    const ComplexMatrix Rt = R.cast<Complex>() * Winv_t;
    ComplexMatrix Y(N, s);
    for (Index i = 0; i < s; ++i) Y.col(i) = lus[static_cast<std::size_t>(i)]->solve(Rt.col(i));
    const ComplexMatrix X = Y * W.transpose();
    Vector x(r.size());
    Eigen::Map<DenseMatrix>(x.data(), N, s) = X.real();
    return x;
  }
};

StageDirectSolver::StageDirectSolver(const StageOperator& op) : impl_(std::make_unique<Impl>(op)) {
  if (op.size() > kReferenceGuard) {
    throw ResourceError("reference_solve: s*N = " + std::to_string(op.size()) + " exceeds " +
                        std::to_string(kReferenceGuard));
  }
  Eigen::EigenSolver<DenseMatrix> eig(op.coupling());
  if (eig.info() != Eigen::Success) throw SolverError("reference_solve: coupling eigendecomposition failed");
  impl_->W = eig.eigenvectors();
  impl_->Winv_t = impl_->W.inverse().transpose();
  const ComplexVector lambda = eig.eigenvalues();
  const ComplexSparse Mc = op.mass().cast<Complex>();
  const ComplexSparse Fc = op.stiffness().cast<Complex>();
  for (Index i = 0; i < op.stages(); ++i) {
    ComplexSparse Ai = Mc + (op.tau() * lambda[i]) * Fc;
    Ai.makeCompressed();
    auto lu = std::make_unique<Eigen::SparseLU<ComplexSparse>>();
    lu->analyzePattern(Ai);
    lu->factorize(Ai);
    if (lu->info() != Eigen::Success) throw SolverError("reference_solve: block factorization failed");
    impl_->lus.push_back(std::move(lu));
  }
}

StageDirectSolver::~StageDirectSolver() = default;
StageDirectSolver::StageDirectSolver(StageDirectSolver&&) noexcept = default;
StageDirectSolver& StageDirectSolver::operator=(StageDirectSolver&&) noexcept = default;

Vector StageDirectSolver::solve(const Vector& b) const {
  const StageOperator& op = impl_->op;
  if (b.size() != op.size()) throw InvalidArgument("reference_solve: dimension mismatch");
  if (b.isZero(0.0)) return Vector::Zero(b.size());
  Vector x = impl_->solve_once(b);
  const double bnorm = b.norm();
  for (int it = 0; it < 10; ++it) {
    const Vector r = b - op.apply(x);
    if (r.norm() <= 1e-12 * bnorm) return x;
    x += impl_->solve_once(r);
  }
  if ((b - op.apply(x)).norm() > 1e-12 * bnorm) {
    throw SolverError("reference_solve: iterative refinement did not reach 1e-12");
  }
  return x;
}

Vector reference_solve(const StageOperator& op, const Vector& b) { return StageDirectSolver(op).solve(b); }

void write_residual_history_csv(std::ostream& os, const SolveReport& report) {
  os << "iteration,preconditioned_residual,unpreconditioned_residual\n";
  os.precision(17);
  for (std::size_t i = 0; i < report.residual_history.size(); ++i) {
    os << i << ',' << report.residual_history[i] << ',';
    if (i < report.true_residual_history.size()) os << report.true_residual_history[i];
    os << '\n';
  }
}

}  // namespace irkprec
