#include "irkprec/precond.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

#include <cmath>

using namespace irkprec;
using namespace irkprec::testing;

namespace {

constexpr PreconditionerKind kAllKinds[] = {PreconditionerKind::J, PreconditionerKind::GSL, PreconditionerKind::TRIU,
                                           PreconditionerKind::LD, PreconditionerKind::DU};

double energy_norm(const SparseMatrix& A, const Vector& e) { return std::sqrt(e.dot(A * e)); }

// Worst single-cycle energy-norm reduction over `cycles` cycles on A x = 0
// from a random start.
double worst_contraction(const Multigrid& mg, int cycles, unsigned seed) {
  const SparseMatrix& A = mg.level_matrix(mg.num_levels() - 1);
  const Vector b = Vector::Zero(A.rows());
  Vector x = random_vector(A.rows(), seed);
  double worst = 0.0;
  for (int c = 0; c < cycles; ++c) {
    const double before = energy_norm(A, x);
    mg.cycle(b, x);
    worst = std::max(worst, energy_norm(A, x) / before);
  }
  return worst;
}

}  // namespace

TEST(BlockPreconditioner, MatchesDenseSolveForAllKinds) {
  const auto sys = small_system(1);
  for (int s = 2; s <= 5; ++s) {
    for (int mu : {1, 2}) {
      const auto tab = tableau_for(mu == 1 ? TableauKind::RadauIIA : TableauKind::GaussLegendre, s, mu);
      const double h_t = 0.35;
      for (auto kind : kAllKinds) {
        const auto prec = BlockPreconditioner::build(tab, kind, sys.M, sys.F, h_t, mu, SubsolveKind::Exact);
        const DenseMatrix P = butcher_preconditioner_matrix(tab, kind);
        const DenseMatrix dense = kron_oracle(*sys.M, *sys.F, P, std::pow(h_t, mu));
        const Vector r = random_vector(prec.size(), 7 * s + mu);
        const Vector expect = dense.partialPivLu().solve(r);
        EXPECT_LT(rel_diff(prec.apply_inverse(r), expect), 1e-10) << "s=" << s << " " << to_string(kind);
      }
    }
  }
}

TEST(BlockPreconditioner, InverseRoundTrip) {
  const auto sys = small_system(2);
  const auto tab = radau_iia(4);
  for (auto kind : kAllKinds) {
    const auto prec = BlockPreconditioner::build(tab, kind, sys.M, sys.F, 0.2, 1, SubsolveKind::Exact);
    const StageOperator pop = prec.as_operator();
    const Vector x = random_vector(prec.size(), 11);
    EXPECT_LT(rel_diff(prec.apply_inverse(pop.apply(x)), x), 1e-10) << to_string(kind);
  }
}

TEST(BlockPreconditioner, JacobiDecouplesStages) {
  const auto sys = small_system(1);
  const auto tab = radau_iia(2);
  const auto prec = BlockPreconditioner::build(tab, PreconditionerKind::J, sys.M, sys.F, 0.5, 1, SubsolveKind::Exact);
  EXPECT_EQ(prec.shape(), BlockShape::Diagonal);
  const Index N = sys.M->rows();
  Vector r = Vector::Zero(2 * N);
  r.head(N) = random_vector(N, 1);
  const Vector z = prec.apply_inverse(r);
  EXPECT_EQ(z.tail(N).norm(), 0.0);
  const DenseMatrix blk = DenseMatrix(*sys.M) + 0.5 * tab.A(0, 0) * DenseMatrix(*sys.F);
  EXPECT_LT(rel_diff(z.head(N), blk.llt().solve(Vector(r.head(N)))), 1e-12);
}

TEST(BlockPreconditioner, SingleStageIsOneShiftedSolve) {
  const auto sys = small_system(2);
  DenseMatrix P(1, 1);
  P << 0.7;
  const BlockPreconditioner prec(P, sys.M, sys.F, 0.3, 2, SubsolveKind::Exact);
  const Vector r = random_vector(prec.size(), 2);
  const DenseMatrix blk = DenseMatrix(*sys.M) + 0.09 * 0.7 * DenseMatrix(*sys.F);
  EXPECT_LT(rel_diff(prec.apply_inverse(r), blk.llt().solve(r)), 1e-12);
}

TEST(BlockPreconditioner, SmallTimestepReducesToMassSolves) {
  const auto sys = small_system(1);
  const auto tab = gauss_legendre(3);
  const Index N = sys.M->rows();
  const DenseMatrix Md(*sys.M);
  const Vector r = random_vector(3 * N, 4);
  Vector expect(3 * N);
  for (Index i = 0; i < 3; ++i) expect.segment(i * N, N) = Md.llt().solve(Vector(r.segment(i * N, N)));
  for (auto kind : kAllKinds) {
    const auto prec = BlockPreconditioner::build(tab, kind, sys.M, sys.F, 1e-12, 1, SubsolveKind::Exact);
    EXPECT_LT(rel_diff(prec.apply_inverse(r), expect), 1e-9) << to_string(kind);
  }
}

TEST(BlockPreconditioner, SharesSubsolversForEqualPivots) {
  const auto sys = small_system(1);
  DenseMatrix P = DenseMatrix::Zero(3, 3);
  P.diagonal() << 0.5, 0.5, 0.25;
  P(2, 0) = 0.1;
  const BlockPreconditioner prec(P, sys.M, sys.F, 0.1, 1, SubsolveKind::Exact);
  EXPECT_EQ(prec.num_subsolvers(), 2u);
  EXPECT_EQ(prec.shape(), BlockShape::Lower);
}

TEST(BlockPreconditioner, ShapeClassification) {
  const auto tab = radau_iia(3);
  EXPECT_EQ(block_shape(butcher_preconditioner_matrix(tab, PreconditionerKind::J)), BlockShape::Diagonal);
  EXPECT_EQ(block_shape(butcher_preconditioner_matrix(tab, PreconditionerKind::GSL)), BlockShape::Lower);
  EXPECT_EQ(block_shape(butcher_preconditioner_matrix(tab, PreconditionerKind::LD)), BlockShape::Lower);
  EXPECT_EQ(block_shape(butcher_preconditioner_matrix(tab, PreconditionerKind::TRIU)), BlockShape::Upper);
  EXPECT_EQ(block_shape(butcher_preconditioner_matrix(tab, PreconditionerKind::DU)), BlockShape::Upper);
  EXPECT_EQ(block_shape(tab.A), BlockShape::Full);
}

TEST(BlockPreconditioner, FullMatrixWithExactSolvesInvertsOperator) {
  const auto sys = small_system(1);
  const auto tab = radau_iia(3);
  const BlockPreconditioner prec(tab.A, sys.M, sys.F, 0.3, 1, SubsolveKind::Exact);
  const StageOperator op(sys.M, sys.F, tab.A, 0.3, 1);
  const Vector x = random_vector(op.size(), 8);
  EXPECT_LT(rel_diff(prec.apply_inverse(op.apply(x)), x), 1e-10);
}

TEST(BlockPreconditioner, Errors) {
  const auto sys = small_system(1);
  DenseMatrix P(2, 2);
  P << 0.0, 0.0, 1.0, 1.0;
  EXPECT_THROW(BlockPreconditioner(P, sys.M, sys.F, 0.1, 1, SubsolveKind::Exact), InvalidPreconditioner);
  const auto levels = build_multigrid_levels(build_hierarchy(1, 0), CoefficientField::from_preset(CoefficientPreset::Variable));
  EXPECT_THROW(BlockPreconditioner(radau_iia(2).A, sys.M, sys.F, 0.1, 1, SubsolveKind::VCycle, &levels),
               InvalidPreconditioner);
  EXPECT_THROW(BlockPreconditioner::build(radau_iia(2), PreconditionerKind::LD, sys.M, sys.F, 0.1, 1,
                                          SubsolveKind::VCycle),
               InvalidArgument);
  const auto prec = BlockPreconditioner::build(radau_iia(2), PreconditionerKind::LD, sys.M, sys.F, 0.1, 1,
                                               SubsolveKind::Exact);
  EXPECT_THROW(prec.apply_inverse(Vector::Zero(3)), InvalidArgument);
  EXPECT_EQ(subsolve_kind_from_string("vcycle"), SubsolveKind::VCycle);
  EXPECT_EQ(subsolve_kind_from_string(to_string(SubsolveKind::Exact)), SubsolveKind::Exact);
  EXPECT_THROW(subsolve_kind_from_string("amg"), InvalidArgument);
  EXPECT_EQ(smoother_from_string(to_string(Smoother::Jacobi)), Smoother::Jacobi);
  EXPECT_EQ(smoother_from_string("gauss-seidel"), Smoother::GaussSeidel);
  EXPECT_THROW(smoother_from_string("sor"), InvalidArgument);
}

TEST(Multigrid, ZeroResidualGivesZero) {
  const auto levels = build_multigrid_levels(build_hierarchy(3, 0), CoefficientField::from_preset(CoefficientPreset::Variable));
  const Multigrid mg(levels, 0.1);
  EXPECT_EQ(mg.solve(Vector::Zero(levels.M.back()->rows())).norm(), 0.0);
}

TEST(Multigrid, SingleLevelIsExact) {
  const auto levels = build_multigrid_levels(build_hierarchy(0, 0), CoefficientField::from_preset(CoefficientPreset::Variable));
  const Multigrid mg(levels, 0.3);
  const SparseMatrix& A = mg.level_matrix(0);
  const Vector r = random_vector(A.rows(), 3);
  EXPECT_LT((A * mg.solve(r) - r).norm() / r.norm(), 1e-12);
}

TEST(Multigrid, ContractsOnFineGrid) {
  // M + h_t F at h = 2^-5 with the coupled Radau IIA step.
  const auto hier = build_hierarchy(5, 0);
  for (auto preset : {CoefficientPreset::ConstantOnes, CoefficientPreset::Variable}) {
    const auto levels = build_multigrid_levels(hier, CoefficientField::from_preset(preset));
    const double h_t = std::pow(std::ldexp(1.0, -5), 2.0 / 3.0);
    for (auto smoother : {Smoother::Jacobi, Smoother::GaussSeidel}) {
      VCycleOptions opts;
      opts.smoother = smoother;
      for (double sigma : {1e-4, h_t, 1.0}) {
        const Multigrid mg(levels, sigma, opts);
        EXPECT_LE(worst_contraction(mg, 10, 17), 0.7) << to_string(smoother) << " sigma=" << sigma;
      }
    }
  }
}

TEST(Multigrid, GaussSeidelCycleIsSymmetric) {
  // Forward pre-smoothing and backward post-smoothing make the cycle a
  // symmetric operator: <u, B v> = <B u, v>.
  const auto levels = build_multigrid_levels(build_hierarchy(3, 0), CoefficientField::from_preset(CoefficientPreset::Variable));
  const Multigrid mg(levels, 0.05);
  const Index n = levels.M.back()->rows();
  const Vector u = random_vector(n, 1), v = random_vector(n, 2);
  EXPECT_NEAR(u.dot(mg.solve(v)), mg.solve(u).dot(v), 1e-12 * u.norm() * v.norm());
}

TEST(Multigrid, RejectsIndefiniteShift) {
  const auto levels = build_multigrid_levels(build_hierarchy(2, 0), CoefficientField::from_preset(CoefficientPreset::Variable));
  EXPECT_THROW(Multigrid(levels, -10.0), SolverError);
  MultigridLevels broken = levels;
  broken.prolongations.pop_back();
  EXPECT_THROW(Multigrid(broken, 0.1), InvalidArgument);
}

TEST(BlockPreconditioner, VCycleApproximatesExactApplication) {
  const auto hier = build_hierarchy(4, 0);
  const auto coeff = CoefficientField::from_preset(CoefficientPreset::Variable);
  const auto levels = build_multigrid_levels(hier, coeff);
  const auto M = levels.M.back();
  const auto F = levels.F.back();
  const auto tab = radau_iia(3);
  for (auto kind : {PreconditionerKind::GSL, PreconditionerKind::LD, PreconditionerKind::DU}) {
    const auto exact = BlockPreconditioner::build(tab, kind, M, F, 0.1, 1, SubsolveKind::Exact);
    const auto vc = BlockPreconditioner::build(tab, kind, M, F, 0.1, 1, SubsolveKind::VCycle, &levels);
    const StageOperator pop = exact.as_operator();
    const Vector x = random_vector(exact.size(), 21);
    const Vector r = pop.apply(x);
    EXPECT_LT(rel_diff(vc.apply_inverse(r), x), 0.5) << to_string(kind);
    EXPECT_LT(rel_diff(exact.apply_inverse(r), x), 1e-10);
  }
}
