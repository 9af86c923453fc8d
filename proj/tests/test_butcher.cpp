#include "irkprec/butcher.hpp"

#include <gtest/gtest.h>

#include "json.hpp"

#include <cmath>

using namespace irkprec;

namespace {

constexpr PreconditionerKind kAllKinds[] = {PreconditionerKind::J, PreconditionerKind::GSL, PreconditionerKind::TRIU,
                                           PreconditionerKind::LD, PreconditionerKind::DU};

// sum_j a_ij c_j^{k-1} - c_i^k / k, maximised over i and k = 1..q.
double collocation_defect(const ButcherTableau& t, int q) {
  double worst = 0.0;
  for (int k = 1; k <= q; ++k) {
    for (int i = 0; i < t.s; ++i) {
      double lhs = 0.0;
      for (int j = 0; j < t.s; ++j) lhs += t.A(i, j) * std::pow(t.c[j], k - 1);
      worst = std::max(worst, std::abs(lhs - std::pow(t.c[i], k) / k));
    }
  }
  return worst;
}

double weight_defect(const Vector& b, const Vector& c, int q) {
  double worst = 0.0;
  for (int k = 1; k <= q; ++k) {
    double sum = 0.0;
    for (Index i = 0; i < b.size(); ++i) sum += b[i] * std::pow(c[i], k - 1);
    worst = std::max(worst, std::abs(sum - 1.0 / k));
  }
  return worst;
}

std::vector<ButcherTableau> library_tableaus() {
  std::vector<ButcherTableau> all;
  for (int s = 1; s <= 5; ++s) {
    all.push_back(radau_iia(s));
    all.push_back(gauss_legendre(s));
    all.push_back(nystrom_from(radau_iia(s)));
    all.push_back(nystrom_from(gauss_legendre(s)));
  }
  return all;
}

}  // namespace

TEST(Radau, OneStageIsBackwardEuler) {
  const auto t = radau_iia(1);
  EXPECT_DOUBLE_EQ(t.A(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(t.b[0], 1.0);
  EXPECT_DOUBLE_EQ(t.c[0], 1.0);
  EXPECT_FALSE(t.is_nystrom());
}

TEST(Radau, TwoStageMatchesHandSolution) {
  const auto t = radau_iia(2);
  DenseMatrix A(2, 2);
  A << 5.0 / 12, -1.0 / 12, 3.0 / 4, 1.0 / 4;
  EXPECT_LT((t.A - A).norm(), 1e-14);
  EXPECT_NEAR(t.b[0], 0.75, 1e-14);
  EXPECT_NEAR(t.b[1], 0.25, 1e-14);
  EXPECT_NEAR(t.c[0], 1.0 / 3, 1e-14);
  EXPECT_NEAR(t.c[1], 1.0, 1e-14);
}

TEST(Radau, ThreeStageNodesAreClosedForm) {
  const auto t = radau_iia(3);
  EXPECT_NEAR(t.c[0], (4.0 - std::sqrt(6.0)) / 10.0, 1e-13);
  EXPECT_NEAR(t.c[1], (4.0 + std::sqrt(6.0)) / 10.0, 1e-13);
  EXPECT_NEAR(t.c[2], 1.0, 1e-14);
}

TEST(Radau, OrderConditionsAndStiffAccuracy) {
  for (int s = 1; s <= 5; ++s) {
    const auto t = radau_iia(s);
    EXPECT_LT(weight_defect(t.b, t.c, 2 * s - 1), 1e-10) << "s=" << s;
    EXPECT_LT(quadrature_defect(t.b, t.c, 2 * s - 1), 1e-10);
    EXPECT_LT(collocation_defect(t, s), 1e-10);
    EXPECT_LT((t.A.row(s - 1).transpose() - t.b).norm(), 1e-12);
    EXPECT_NEAR(t.b.sum(), 1.0, 1e-12);
    for (int i = 0; i < s; ++i) {
      EXPECT_GT(t.c[i], 0.0);
      EXPECT_LE(t.c[i], 1.0 + 1e-15);
      if (i > 0) EXPECT_GT(t.c[i], t.c[i - 1]);
    }
    EXPECT_EQ(t.order(), 2 * s - 1);
  }
}

TEST(GaussLegendre, OneStageIsMidpoint) {
  const auto t = gauss_legendre(1);
  EXPECT_DOUBLE_EQ(t.A(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(t.b[0], 1.0);
  EXPECT_DOUBLE_EQ(t.c[0], 0.5);
}

TEST(GaussLegendre, TwoStageMatchesClosedForm) {
  const auto t = gauss_legendre(2);
  const double r = std::sqrt(3.0) / 6.0;
  EXPECT_NEAR(t.c[0], 0.5 - r, 1e-14);
  EXPECT_NEAR(t.c[1], 0.5 + r, 1e-14);
  EXPECT_NEAR(t.b[0], 0.5, 1e-14);
  EXPECT_NEAR(t.b[1], 0.5, 1e-14);
  DenseMatrix A(2, 2);
  A << 0.25, 0.25 - r, 0.25 + r, 0.25;
  EXPECT_LT((t.A - A).norm(), 1e-14);
}

TEST(GaussLegendre, ThreeStageNodesAreClosedForm) {
  const auto t = gauss_legendre(3);
  EXPECT_NEAR(t.c[0], 0.5 - std::sqrt(15.0) / 10.0, 1e-13);
  EXPECT_NEAR(t.c[1], 0.5, 1e-13);
  EXPECT_NEAR(t.c[2], 0.5 + std::sqrt(15.0) / 10.0, 1e-13);
  EXPECT_NEAR(t.b[0], 5.0 / 18, 1e-13);
  EXPECT_NEAR(t.b[1], 8.0 / 18, 1e-13);
}

TEST(GaussLegendre, OrderConditions) {
  for (int s = 1; s <= 5; ++s) {
    const auto t = gauss_legendre(s);
    EXPECT_LT(weight_defect(t.b, t.c, 2 * s), 1e-10) << "s=" << s;
    EXPECT_LT(collocation_defect(t, s), 1e-10);
    EXPECT_NEAR(t.b.sum(), 1.0, 1e-12);
    for (int i = 0; i < s; ++i) {
      EXPECT_GT(t.c[i], 0.0);
      EXPECT_LT(t.c[i], 1.0);
      EXPECT_NEAR(t.c[i] + t.c[s - 1 - i], 1.0, 1e-13);
    }
    EXPECT_EQ(t.order(), 2 * s);
  }
}

TEST(Tableau, StageCountOutOfRange) {
  EXPECT_THROW(radau_iia(0), InvalidArgument);
  EXPECT_THROW(radau_iia(6), InvalidArgument);
  EXPECT_THROW(gauss_legendre(0), InvalidArgument);
  EXPECT_THROW(gauss_legendre(6), InvalidArgument);
  EXPECT_THROW(tableau_for(TableauKind::RadauIIA, 2, 3), InvalidArgument);
}

TEST(Nystrom, FromOneStageGauss) {
  const auto t = nystrom_from(gauss_legendre(1));
  EXPECT_DOUBLE_EQ(t.A(0, 0), 0.25);
  EXPECT_DOUBLE_EQ(t.c[0], 0.5);
  ASSERT_TRUE(t.is_nystrom());
  EXPECT_DOUBLE_EQ((*t.b_prime)[0], 1.0);
  EXPECT_DOUBLE_EQ(t.b[0], 0.5);
  EXPECT_EQ(t.kind, TableauKind::NystromGaussLegendre);
}

TEST(Nystrom, MatrixIsSquareOfBase) {
  for (int s = 1; s <= 5; ++s) {
    const auto base = gauss_legendre(s);
    const auto t = nystrom_from(base);
    DenseMatrix sq = DenseMatrix::Zero(s, s);
    for (int i = 0; i < s; ++i)
      for (int j = 0; j < s; ++j)
        for (int k = 0; k < s; ++k) sq(i, j) += base.A(i, k) * base.A(k, j);
    EXPECT_LT((t.A - sq).norm(), 1e-14);
    EXPECT_EQ(t.c, base.c);
    // Position weights integrate (1 - x) x^{k-1}: 1/k - 1/(k+1).
    for (int k = 1; k <= 2 * s - 1; ++k) {
      double sum = 0.0;
      for (int i = 0; i < s; ++i) sum += t.b[i] * std::pow(t.c[i], k - 1);
      EXPECT_NEAR(sum, 1.0 / k - 1.0 / (k + 1), 1e-12);
    }
  }
}

TEST(Nystrom, RejectsNystromBase) {
  EXPECT_THROW(nystrom_from(nystrom_from(gauss_legendre(2))), InvalidArgument);
}

TEST(Ldu, ScalarCase) {
  DenseMatrix A(1, 1);
  A << 0.5;
  const auto f = ldu(A);
  EXPECT_DOUBLE_EQ(f.L(0, 0), 1.0);
  EXPECT_DOUBLE_EQ(f.D(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(f.U(0, 0), 1.0);
}

TEST(Ldu, IdentityFactorsTrivially) {
  const DenseMatrix I = DenseMatrix::Identity(3, 3);
  const auto f = ldu(I);
  EXPECT_EQ(f.L, I);
  EXPECT_EQ(f.D, I);
  EXPECT_EQ(f.U, I);
}

TEST(Ldu, ReconstructsEveryLibraryTableau) {
  for (const auto& t : library_tableaus()) {
    const auto f = ldu(t.A);
    EXPECT_LE((f.L * f.D * f.U - t.A).norm() / t.A.norm(), 1e-12) << t.label();
    for (int i = 0; i < t.s; ++i) {
      EXPECT_EQ(f.L(i, i), 1.0);
      EXPECT_EQ(f.U(i, i), 1.0);
      EXPECT_NE(f.D(i, i), 0.0);
      for (int j = i + 1; j < t.s; ++j) {
        EXPECT_EQ(f.L(i, j), 0.0);
        EXPECT_EQ(f.U(j, i), 0.0);
        EXPECT_EQ(f.D(i, j), 0.0);
      }
    }
  }
}

TEST(Ldu, ZeroPivotNamesIndex) {
  DenseMatrix A(2, 2);
  A << 0.0, 1.0, 1.0, 0.0;
  try {
    ldu(A);
    FAIL() << "expected FactorizationError";
  } catch (const FactorizationError& e) {
    EXPECT_EQ(e.pivot(), 0);
  }
  DenseMatrix B(3, 3);
  B << 1, 2, 0, 2, 4, 1, 0, 1, 1;
  try {
    ldu(B);
    FAIL() << "expected FactorizationError";
  } catch (const FactorizationError& e) {
    EXPECT_EQ(e.pivot(), 1);
  }
}

TEST(WeakPositivity, SmallCases) {
  EXPECT_TRUE(weakly_positive_definite(DenseMatrix::Identity(2, 2)));
  DenseMatrix neg(1, 1);
  neg << -1.0;
  EXPECT_FALSE(weakly_positive_definite(neg));
  EXPECT_FALSE(weakly_positive_definite(DenseMatrix::Zero(2, 2)));
  // Rotation by 90 degrees: eigenvalues +-i, off the negative axis.
  DenseMatrix rot(2, 2);
  rot << 0, -1, 1, 0;
  EXPECT_TRUE(weakly_positive_definite(rot));
}

TEST(WeakPositivity, LibraryTableausAndPreconditioners) {
  for (const auto& t : library_tableaus()) {
    EXPECT_TRUE(weakly_positive_definite(t.A)) << t.label();
    // Squared Radau tableaus are not a time-stepping family; for s = 2 their
    // diagonal has a zero entry, so J is singular.
    if (t.kind == TableauKind::NystromRadauIIA) continue;
    for (auto kind : kAllKinds) {
      EXPECT_TRUE(weakly_positive_definite(butcher_preconditioner_matrix(t, kind)))
          << t.label() << " " << to_string(kind);
    }
  }
}

TEST(PreconditionerMatrix, DefinitionsOnRadauTwo) {
  const auto t = radau_iia(2);
  DenseMatrix J(2, 2), G(2, 2), T(2, 2);
  J << 5.0 / 12, 0, 0, 0.25;
  G << 5.0 / 12, 0, 0.75, 0.25;
  T << 5.0 / 12, -1.0 / 12, 0, 0.25;
  EXPECT_LT((butcher_preconditioner_matrix(t, PreconditionerKind::J) - J).norm(), 1e-15);
  EXPECT_LT((butcher_preconditioner_matrix(t, PreconditionerKind::GSL) - G).norm(), 1e-15);
  EXPECT_LT((butcher_preconditioner_matrix(t, PreconditionerKind::TRIU) - T).norm(), 1e-15);
}

TEST(PreconditionerMatrix, LdAndDuRecoverA) {
  for (const auto& t : library_tableaus()) {
    const auto f = ldu(t.A);
    const DenseMatrix LD = butcher_preconditioner_matrix(t, PreconditionerKind::LD);
    const DenseMatrix DU = butcher_preconditioner_matrix(t, PreconditionerKind::DU);
    EXPECT_LT((LD * f.U - t.A).norm(), 1e-12 * t.A.norm()) << t.label();
    EXPECT_LT((f.L * DU - t.A).norm(), 1e-12 * t.A.norm()) << t.label();
  }
}

TEST(PreconditionerMatrix, TriangularShapes) {
  for (const auto& t : library_tableaus()) {
    for (auto kind : kAllKinds) {
      const DenseMatrix P = butcher_preconditioner_matrix(t, kind);
      const bool lower = P.triangularView<Eigen::StrictlyUpper>().toDenseMatrix().isZero(0.0);
      const bool upper = P.triangularView<Eigen::StrictlyLower>().toDenseMatrix().isZero(0.0);
      switch (kind) {
        case PreconditionerKind::J: EXPECT_TRUE(lower && upper); break;
        case PreconditionerKind::GSL:
        case PreconditionerKind::LD: EXPECT_TRUE(lower); break;
        case PreconditionerKind::TRIU:
        case PreconditionerKind::DU: EXPECT_TRUE(upper); break;
      }
      for (int i = 0; i < t.s; ++i) EXPECT_NE(P(i, i), 0.0);
    }
  }
}

TEST(PreconditionerMatrix, KindNamesRoundTrip) {
  for (auto kind : kAllKinds) EXPECT_EQ(preconditioner_kind_from_string(to_string(kind)), kind);
  EXPECT_THROW(preconditioner_kind_from_string("ILU"), InvalidArgument);
}

TEST(Tableau, JsonExport) {
  const auto t = nystrom_from(gauss_legendre(2));
  const auto j = nlohmann::json::parse(tableau_to_json(t));
  EXPECT_EQ(j.at("s").get<int>(), 2);
  ASSERT_EQ(j.at("A").size(), 4u);
  EXPECT_DOUBLE_EQ(j.at("A")[1].get<double>(), t.A(0, 1));
  EXPECT_DOUBLE_EQ(j.at("A")[2].get<double>(), t.A(1, 0));
  EXPECT_DOUBLE_EQ(j.at("b_prime")[0].get<double>(), (*t.b_prime)[0]);
  EXPECT_TRUE(j.contains("kind"));
  EXPECT_FALSE(nlohmann::json::parse(tableau_to_json(radau_iia(2))).contains("b_prime"));
}
