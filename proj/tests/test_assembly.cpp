#include "irkprec/assembly.hpp"

#include <gtest/gtest.h>

#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <sstream>

using namespace irkprec;
using irkprec::testing::random_vector;

namespace {

constexpr double kPi = std::numbers::pi;

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

// Element-by-element mass matrix from the textbook local matrix.
DenseMatrix mass_oracle(const TriMesh& m) {
  DenseMatrix M = DenseMatrix::Zero(m.num_nodes(), m.num_nodes());
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const double area = m.signed_area(t);
    for (int a : m.triangles[t])
      for (int b : m.triangles[t]) M(a, b) += area / 12.0 * (a == b ? 2.0 : 1.0);
  }
  return M;
}

// Diffusion part with a degree-2 alpha, integrated by the edge-midpoint rule
// (exact for quadratics).
DenseMatrix diffusion_oracle(const TriMesh& m, const ScalarField& alpha) {
  DenseMatrix F = DenseMatrix::Zero(m.num_nodes(), m.num_nodes());
  for (std::size_t t = 0; t < m.triangles.size(); ++t) {
    const auto& tri = m.triangles[t];
    Point v[3];
    for (int a = 0; a < 3; ++a) v[a] = m.nodes[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])];
    const double area = m.signed_area(t);
    double mean = 0.0;
    for (int e = 0; e < 3; ++e) {
      const Point& p = v[e];
      const Point& q = v[(e + 1) % 3];
      mean += alpha(0.5 * (p.x + q.x), 0.5 * (p.y + q.y)) / 3.0;
    }
    double gx[3], gy[3];
    for (int a = 0; a < 3; ++a) {
      const Point& p = v[(a + 1) % 3];
      const Point& q = v[(a + 2) % 3];
      gx[a] = (p.y - q.y) / (2.0 * area);
      gy[a] = (q.x - p.x) / (2.0 * area);
    }
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) F(tri[a], tri[b]) += area * mean * (gx[a] * gx[b] + gy[a] * gy[b]);
  }
  return F;
}

double sym_defect(const SparseMatrix& A) {
  const SparseMatrix At = A.transpose();
  return (A - At).norm() / A.norm();
}

}  // namespace

TEST(Quadrature, DegreeFourExactness) {
  const auto& rule = degree4_rule();
  double wsum = 0.0;
  for (double w : rule.weights) wsum += w;
  EXPECT_NEAR(wsum, 1.0, 1e-14);
  // Reference triangle (0,0),(1,0),(0,1) of area 1/2: int x^a y^b = a! b! / (a+b+2)!.
  for (int a = 0; a <= 4; ++a) {
    for (int b = 0; a + b <= 4; ++b) {
      double q = 0.0;
      for (std::size_t i = 0; i < 6; ++i) {
        const double x = rule.bary[i][1], y = rule.bary[i][2];
        q += 0.5 * rule.weights[i] * std::pow(x, a) * std::pow(y, b);
      }
      EXPECT_NEAR(q, factorial(a) * factorial(b) / factorial(a + b + 2), 1e-13) << a << "," << b;
    }
  }
}

TEST(Mass, MatchesElementOracle) {
  for (int k = 0; k <= 2; ++k) {
    const auto m = build_mesh(k);
    const DenseMatrix M(assemble_mass(m));
    EXPECT_LT((M - mass_oracle(m)).norm(), 1e-14);
  }
}

TEST(Mass, PartitionOfUnityAndPositivity) {
  const auto m = build_mesh(3);
  const SparseMatrix M = assemble_mass(m);
  const Vector ones = Vector::Ones(m.num_nodes());
  EXPECT_NEAR(ones.dot(M * ones), 4.0, 1e-12);
  EXPECT_GT((M * ones).minCoeff(), 0.0);
  EXPECT_LT(sym_defect(M), 1e-13);
  for (unsigned seed = 0; seed < 100; ++seed) {
    const Vector v = random_vector(m.num_nodes(), seed);
    EXPECT_GT(v.dot(M * v), 0.0);
  }
}

TEST(Mass, QuadraturePathAgreesWithClosedForm) {
  const auto m = build_mesh(2);
  const SparseMatrix M = assemble_mass(m);
  const SparseMatrix R = assemble_reaction_part(m, [](double, double) { return 1.0; });
  EXPECT_LT(DenseMatrix(M - R).norm(), 1e-14);
}

TEST(Stiffness, ConstantLaplacianIsFivePointStencil) {
  const auto m = build_mesh(2);
  const SparseMatrix F = assemble_stiffness(m, CoefficientField::constant(1.0, 0.0));
  const int n = m.n;
  for (int j = 1; j < n; ++j) {
    for (int i = 1; i < n; ++i) {
      const int c = m.node_index(i, j);
      EXPECT_NEAR(F.coeff(c, c), 4.0, 1e-13);
      EXPECT_NEAR(F.coeff(c, m.node_index(i + 1, j)), -1.0, 1e-13);
      EXPECT_NEAR(F.coeff(c, m.node_index(i - 1, j)), -1.0, 1e-13);
      EXPECT_NEAR(F.coeff(c, m.node_index(i, j + 1)), -1.0, 1e-13);
      EXPECT_NEAR(F.coeff(c, m.node_index(i, j - 1)), -1.0, 1e-13);
      EXPECT_NEAR(F.coeff(c, m.node_index(i + 1, j + 1)), 0.0, 1e-13);
    }
  }
}

TEST(Stiffness, NeumannKernelWhenBetaVanishes) {
  const auto m = build_mesh(3);
  const Vector ones = Vector::Ones(m.num_nodes());
  for (auto preset : {CoefficientPreset::ConstantDiffusion, CoefficientPreset::VariableBetaZero}) {
    const SparseMatrix F = assemble_stiffness(m, CoefficientField::from_preset(preset));
    EXPECT_LT((F * ones).cwiseAbs().maxCoeff(), 1e-12) << to_string(preset);
  }
}

TEST(Stiffness, ReactionOnlyEqualsMass) {
  const auto m = build_mesh(2);
  const SparseMatrix F = assemble_diffusion_part(m, [](double, double) { return 0.0; }) +
                         assemble_reaction_part(m, [](double, double) { return 1.0; });
  EXPECT_LT(DenseMatrix(F - assemble_mass(m)).norm(), 1e-14);
  EXPECT_THROW(assemble_stiffness(m, CoefficientField::constant(0.0, 1.0)), InvalidCoefficient);
}

TEST(Stiffness, LinearInCoefficients) {
  const auto m = build_mesh(3);
  const SparseMatrix F11 = assemble_stiffness(m, CoefficientField::constant(1.0, 1.0));
  const SparseMatrix F10 = assemble_stiffness(m, CoefficientField::constant(1.0, 0.0));
  const SparseMatrix M = assemble_mass(m);
  EXPECT_LT(DenseMatrix(F11 - F10 - M).norm() / DenseMatrix(F11).norm(), 1e-13);
}

TEST(Stiffness, VariableDiffusionMatchesMidpointOracle) {
  const auto m = build_mesh(2);
  const auto coeff = CoefficientField::from_preset(CoefficientPreset::VariableBetaZero);
  const DenseMatrix F(assemble_stiffness(m, coeff));
  const DenseMatrix ref = diffusion_oracle(m, coeff.alpha);
  EXPECT_LT((F - ref).norm() / ref.norm(), 1e-13);
}

TEST(Stiffness, VariablePresetSymmetricAndDefinite) {
  const auto m = build_mesh(3);
  const SparseMatrix F = assemble_stiffness(m, CoefficientField::from_preset(CoefficientPreset::Variable));
  EXPECT_LT(sym_defect(F), 1e-13);
  const Vector ones = Vector::Ones(m.num_nodes());
  // With beta > 0 the constant mode is no longer in the kernel.
  EXPECT_GT(ones.dot(F * ones), 1.0);
  for (unsigned seed = 0; seed < 100; ++seed) {
    const Vector v = random_vector(m.num_nodes(), 1000 + seed);
    EXPECT_GE(v.dot(F * v), -1e-12 * v.squaredNorm());
  }
}

TEST(Stiffness, ReactionIntegralOfVariableBeta) {
  // 1^T R 1 = int beta = 4 + 0.3 int sin(pi x) cos(pi y) = 4.
  const auto m = build_mesh(4);
  const auto coeff = CoefficientField::from_preset(CoefficientPreset::Variable);
  const SparseMatrix R = assemble_reaction_part(m, coeff.beta);
  const Vector ones = Vector::Ones(m.num_nodes());
  EXPECT_NEAR(ones.dot(R * ones), 4.0, 1e-10);
}

TEST(Stiffness, RejectsBadCoefficients) {
  const auto m = build_mesh(1);
  auto neg_alpha = CoefficientField::custom([](double x, double) { return x; }, [](double, double) { return 0.0; });
  EXPECT_THROW(assemble_stiffness(m, neg_alpha), InvalidCoefficient);
  auto neg_beta = CoefficientField::custom([](double, double) { return 1.0; }, [](double, double) { return -0.1; });
  EXPECT_THROW(assemble_stiffness(m, neg_beta), InvalidCoefficient);
  EXPECT_THROW(assemble_stiffness(m, CoefficientField::constant(1.0, -1.0)), InvalidCoefficient);
  EXPECT_THROW(assemble_stiffness(m, CoefficientField{}), InvalidArgument);
}

TEST(Presets, NamesAndValues) {
  for (auto p : {CoefficientPreset::ConstantOnes, CoefficientPreset::ConstantDiffusion, CoefficientPreset::Variable,
                 CoefficientPreset::VariableBetaZero}) {
    EXPECT_EQ(coefficient_preset_from_string(to_string(p)), p);
  }
  EXPECT_THROW(coefficient_preset_from_string("anisotropic"), InvalidArgument);
  const auto v = CoefficientField::from_preset(CoefficientPreset::Variable);
  EXPECT_DOUBLE_EQ(v.alpha(0.5, 0.5), 1.05);
  EXPECT_NEAR(v.beta(0.5, 0.0), 1.3, 1e-15);
  const auto g = (*v.grad_alpha)(0.3, -0.7);
  EXPECT_DOUBLE_EQ(g[0], 0.2 * -0.7);
  EXPECT_DOUBLE_EQ(g[1], 0.2 * 0.3);
  EXPECT_TRUE(CoefficientField::from_preset(CoefficientPreset::ConstantDiffusion).beta_vanishes());
  EXPECT_FALSE(v.beta_vanishes());
  EXPECT_FALSE(v.is_constant());
}

TEST(Load, ConstantZeroAndLinear) {
  const auto m = build_mesh(3);
  const SparseMatrix M = assemble_mass(m);
  const Vector ones = Vector::Ones(m.num_nodes());
  EXPECT_LT((assemble_load(m, [](double, double) { return 1.0; }) - M * ones).norm(), 1e-13);
  EXPECT_EQ(assemble_load(m, [](double, double) { return 0.0; }).norm(), 0.0);
  auto lin = [](double x, double y) { return x + y; };
  EXPECT_LT((assemble_load(m, lin) - M * interpolate(m, lin)).norm(), 1e-12);
}

TEST(Load, FunctionalConvergesWithRefinement) {
  auto f = [](double x, double y) { return std::exp(x) * std::cos(y); };
  const double exact = (std::exp(1.0) - std::exp(-1.0)) * 2.0 * std::sin(1.0);
  double prev = 1.0;
  for (int k = 1; k <= 4; ++k) {
    const auto m = build_mesh(k);
    const double err = std::abs(assemble_load(m, f).sum() - exact);
    EXPECT_LT(err, m.h * m.h);
    if (k > 1) EXPECT_LE(err, std::max(prev / 8.0, 1e-13));
    prev = err;
  }
}

TEST(Load, InterpolateSamplesNodes) {
  const auto m = build_mesh(1);
  const Vector v = interpolate(m, [](double x, double y) { return std::cos(kPi * x) * y; });
  for (Index i = 0; i < m.num_nodes(); ++i) {
    const auto& p = m.nodes[static_cast<std::size_t>(i)];
    EXPECT_DOUBLE_EQ(v[i], std::cos(kPi * p.x) * p.y);
  }
}

TEST(MatrixMarket, SparseRoundTripIsExact) {
  const auto m = build_mesh(2);
  const SparseMatrix F = assemble_stiffness(m, CoefficientField::from_preset(CoefficientPreset::Variable));
  std::stringstream ss;
  write_matrix_market(ss, F);
  const SparseMatrix G = read_matrix_market(ss);
  ASSERT_EQ(G.rows(), F.rows());
  ASSERT_EQ(G.nonZeros(), F.nonZeros());
  EXPECT_EQ(DenseMatrix(F - G).cwiseAbs().maxCoeff(), 0.0);
}

TEST(MatrixMarket, DenseExportAndSymmetricImport) {
  DenseMatrix A(2, 2);
  A << 0.1, 1.0 / 3.0, -2.5e-300, 7.0;
  std::stringstream ss;
  write_matrix_market(ss, A);
  EXPECT_EQ(DenseMatrix(read_matrix_market(ss)), A);

  std::istringstream sym("%%MatrixMarket matrix coordinate real symmetric\n% comment\n2 2 2\n1 1 2\n2 1 -1\n");
  const DenseMatrix S(read_matrix_market(sym));
  EXPECT_EQ(S(0, 1), -1.0);
  EXPECT_EQ(S(1, 0), -1.0);
  EXPECT_EQ(S(1, 1), 0.0);

  std::istringstream bad("not a header\n");
  EXPECT_THROW(read_matrix_market(bad), InvalidArgument);
  std::istringstream out_of_range("%%MatrixMarket matrix coordinate real general\n2 2 1\n3 1 1.0\n");
  EXPECT_THROW(read_matrix_market(out_of_range), InvalidArgument);
}
