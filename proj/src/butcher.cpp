#include "irkprec/butcher.hpp"

#include <Eigen/Eigenvalues>
#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

namespace irkprec {

namespace {

void check_stage_count(int s) {
  if (s < 1 || s > 5) {
    throw InvalidArgument("stage count must lie in [1, 5], got " + std::to_string(s));
  }
}

// Legendre polynomial P_n and its derivative on [-1, 1] via the three-term recurrence.
std::pair<double, double> legendre(int n, double t) {
  if (n == 0) return {1.0, 0.0};
  double p0 = 1.0;
  double p1 = t;
  for (int k = 2; k <= n; ++k) {
    const double p2 = ((2.0 * k - 1.0) * t * p1 - (k - 1.0) * p0) / k;
    p0 = p1;
    p1 = p2;
  }
  // P'_n(t) = n (t P_n - P_{n-1}) / (t^2 - 1), valid away from the endpoints.
  double dp = 0.0;
  if (std::abs(t * t - 1.0) > 1e-14) {
    dp = n * (t * p1 - p0) / (t * t - 1.0);
  } else {
    dp = 0.5 * n * (n + 1.0) * std::pow(t, n + 1);
  }
  return {p1, dp};
}

// Monomial coefficients (ascending) of P_n(2x - 1).
std::vector<double> shifted_legendre_coeffs(int n) {
  // Rodrigues on [0,1]: P_n(2x-1) = sum_k (-1)^{n+k} C(n,k) C(n+k,k) x^k.
  std::vector<double> coeffs(n + 1);
  for (int k = 0; k <= n; ++k) {
    double binom_nk = 1.0;
    double binom_npk = 1.0;
    for (int j = 1; j <= k; ++j) {
      binom_nk *= static_cast<double>(n - k + j) / j;
      binom_npk *= static_cast<double>(n + j) / j;
    }
    coeffs[k] = (((n + k) % 2 == 0) ? 1.0 : -1.0) * binom_nk * binom_npk;
  }
  return coeffs;
}

// Real roots in [0,1] of a polynomial given by ascending coefficients.
std::vector<double> polynomial_roots(const std::vector<double>& coeffs) {
  const int deg = static_cast<int>(coeffs.size()) - 1;
  if (deg == 1) return {-coeffs[0] / coeffs[1]};
  DenseMatrix companion = DenseMatrix::Zero(deg, deg);
  for (int i = 1; i < deg; ++i) companion(i, i - 1) = 1.0;
  for (int i = 0; i < deg; ++i) companion(i, deg - 1) = -coeffs[i] / coeffs[deg];
  Eigen::EigenSolver<DenseMatrix> es(companion, false);
  std::vector<double> roots;
  for (int i = 0; i < deg; ++i) roots.push_back(es.eigenvalues()[i].real());
  std::sort(roots.begin(), roots.end());
  return roots;
}

// Newton polish of a root of f(x) = P_n(2x-1) - shift * P_{n-1}(2x-1).
double polish_root(int n, double shift, double x) {
  for (int it = 0; it < 50; ++it) {
    const double t = 2.0 * x - 1.0;
    auto [pn, dpn] = legendre(n, t);
    auto [pm, dpm] = legendre(n - 1, t);
    const double f = pn - shift * pm;
    const double df = 2.0 * (dpn - shift * dpm);
    if (df == 0.0) break;
    const double dx = f / df;
    x -= dx;
    if (std::abs(dx) < 1e-17) break;
  }
  return x;
}

// Collocation tableau for the given nodes: sum_j a_ij c_j^{k-1} = c_i^k / k and
// sum_j b_j c_j^{k-1} = 1 / k for k = 1..s.
std::pair<DenseMatrix, Vector> collocation(const Vector& c) {
  const Index s = c.size();
  DenseMatrix V(s, s);
  DenseMatrix R(s, s);
  Vector moments(s);
  for (Index i = 0; i < s; ++i) {
    for (Index k = 0; k < s; ++k) {
      V(i, k) = std::pow(c(i), static_cast<double>(k));
      R(i, k) = std::pow(c(i), static_cast<double>(k + 1)) / static_cast<double>(k + 1);
    }
  }
  for (Index k = 0; k < s; ++k) moments(k) = 1.0 / static_cast<double>(k + 1);
  // A V = R and V^T b = moments.
  DenseMatrix A = V.transpose().fullPivLu().solve(R.transpose()).transpose();
  Vector b = V.transpose().fullPivLu().solve(moments);
  return {A, b};
}

void validate(const ButcherTableau& t, int quad_order) {
  const double defect = quadrature_defect(t.b, t.c, quad_order);
  if (!(defect <= 1e-10)) {
    throw std::logic_error(t.label() + ": quadrature conditions violated, defect " +
                           std::to_string(defect));
  }
  for (Index i = 0; i < t.s; ++i) {
    for (int k = 1; k <= t.s; ++k) {
      double lhs = 0.0;
      for (Index j = 0; j < t.s; ++j) lhs += t.A(i, j) * std::pow(t.c(j), k - 1);
      if (std::abs(lhs - std::pow(t.c(i), k) / k) > 1e-10) {
        throw std::logic_error(t.label() + ": collocation conditions violated");
      }
    }
  }
}

}  // namespace

std::string_view to_string(TableauKind kind) {
  switch (kind) {
    case TableauKind::RadauIIA: return "RadauIIA";
    case TableauKind::GaussLegendre: return "GaussLegendre";
    case TableauKind::NystromGaussLegendre: return "NystromGaussLegendre";
    case TableauKind::NystromRadauIIA: return "NystromRadauIIA";
  }
  return "unknown";
}

int ButcherTableau::order() const {
  switch (kind) {
    case TableauKind::RadauIIA:
    case TableauKind::NystromRadauIIA: return 2 * s - 1;
    case TableauKind::GaussLegendre:
    case TableauKind::NystromGaussLegendre: return 2 * s;
  }
  return 0;
}

std::string ButcherTableau::label() const {
  const bool radau = kind == TableauKind::RadauIIA || kind == TableauKind::NystromRadauIIA;
  return (radau ? "RIIA-" : "GL-") + std::to_string(s);
}

double quadrature_defect(const Vector& b, const Vector& c, int max_k) {
  double worst = 0.0;
  for (int k = 1; k <= max_k; ++k) {
    double sum = 0.0;
    for (Index i = 0; i < b.size(); ++i) sum += b(i) * std::pow(c(i), k - 1);
    worst = std::max(worst, std::abs(sum - 1.0 / k));
  }
  return worst;
}

ButcherTableau radau_iia(int s) {
  check_stage_count(s);
  Vector c(s);
  if (s == 1) {
    c(0) = 1.0;
  } else {
    // Right Radau nodes: zeros of P_s(2x-1) - P_{s-1}(2x-1).
    std::vector<double> ps = shifted_legendre_coeffs(s);
    const std::vector<double> pm = shifted_legendre_coeffs(s - 1);
    for (int k = 0; k < s; ++k) ps[k] -= pm[k];
    std::vector<double> roots = polynomial_roots(ps);
    for (int i = 0; i < s; ++i) c(i) = polish_root(s, 1.0, roots[i]);
    c(s - 1) = 1.0;
  }
  auto [A, b] = collocation(c);
  // b equals the last row of A for stiffly accurate methods; take it exactly.
  b = A.row(s - 1).transpose();
  ButcherTableau t{TableauKind::RadauIIA, s, A, b, c, std::nullopt};
  validate(t, 2 * s - 1);
  return t;
}

ButcherTableau gauss_legendre(int s) {
  check_stage_count(s);
  const std::vector<double> roots = polynomial_roots(shifted_legendre_coeffs(s));
  Vector c(s);
  for (int i = 0; i < s; ++i) c(i) = polish_root(s, 0.0, roots[i]);
  auto [A, b] = collocation(c);
  ButcherTableau t{TableauKind::GaussLegendre, s, A, b, c, std::nullopt};
  validate(t, 2 * s);
  return t;
}

ButcherTableau nystrom_from(const ButcherTableau& base) {
  if (base.is_nystrom()) {
    throw InvalidArgument("nystrom_from expects a first-order IRK tableau");
  }
  ButcherTableau t;
  t.kind = base.kind == TableauKind::GaussLegendre ? TableauKind::NystromGaussLegendre
                                                   : TableauKind::NystromRadauIIA;
  t.s = base.s;
  t.A = base.A * base.A;
  t.c = base.c;
  t.b_prime = base.b;
  t.b = base.b.cwiseProduct((Vector::Ones(base.s) - base.c));
  return t;
}

ButcherTableau tableau_for(TableauKind base_family, int s, int mu) {
  if (mu != 1 && mu != 2) throw InvalidArgument("mu must be 1 or 2");
  ButcherTableau base;
  switch (base_family) {
    case TableauKind::RadauIIA:
    case TableauKind::NystromRadauIIA: base = radau_iia(s); break;
    case TableauKind::GaussLegendre:
    case TableauKind::NystromGaussLegendre: base = gauss_legendre(s); break;
  }
  return mu == 2 ? nystrom_from(base) : base;
}

LduFactors ldu(const DenseMatrix& A) {
  if (A.rows() != A.cols()) throw InvalidArgument("ldu: matrix must be square");
  const Index s = A.rows();
  DenseMatrix L = DenseMatrix::Identity(s, s);
  DenseMatrix W = A;
  const double scale = std::max(A.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
  for (Index k = 0; k < s; ++k) {
    if (std::abs(W(k, k)) <= 1e-14 * scale) {
      throw FactorizationError("ldu: zero pivot at index " + std::to_string(k),
                               static_cast<int>(k));
    }
    for (Index i = k + 1; i < s; ++i) {
      L(i, k) = W(i, k) / W(k, k);
      W.row(i) -= L(i, k) * W.row(k);
      W(i, k) = 0.0;
    }
  }
  DenseMatrix D = DenseMatrix::Zero(s, s);
  DenseMatrix U = DenseMatrix::Identity(s, s);
  for (Index k = 0; k < s; ++k) {
    D(k, k) = W(k, k);
    for (Index j = k + 1; j < s; ++j) U(k, j) = W(k, j) / W(k, k);
  }
  return {L, D, U};
}

bool weakly_positive_definite(const DenseMatrix& A, double tol) {
  if (A.rows() != A.cols()) throw InvalidArgument("weakly_positive_definite: matrix must be square");
  if (A.rows() == 0) return false;
  Eigen::EigenSolver<DenseMatrix> es(A, false);
  for (Index i = 0; i < A.rows(); ++i) {
    const std::complex<double> lambda = es.eigenvalues()(i);
    const bool real_axis = std::abs(lambda.imag()) <= tol * std::abs(lambda);
    if (real_axis && lambda.real() <= tol) return false;
  }
  return true;
}

std::string_view to_string(PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::J: return "J";
    case PreconditionerKind::GSL: return "GSL";
    case PreconditionerKind::TRIU: return "TRIU";
    case PreconditionerKind::LD: return "LD";
    case PreconditionerKind::DU: return "DU";
  }
  return "unknown";
}

PreconditionerKind preconditioner_kind_from_string(std::string_view name) {
  for (auto kind : {PreconditionerKind::J, PreconditionerKind::GSL, PreconditionerKind::TRIU,
                    PreconditionerKind::LD, PreconditionerKind::DU}) {
    if (name == to_string(kind)) return kind;
  }
  throw InvalidArgument("unknown preconditioner kind '" + std::string(name) + "'");
}

DenseMatrix butcher_preconditioner_matrix(const DenseMatrix& A, PreconditionerKind kind) {
  switch (kind) {
    case PreconditionerKind::J: return A.diagonal().asDiagonal();
    case PreconditionerKind::GSL: return A.triangularView<Eigen::Lower>();
    case PreconditionerKind::TRIU: return A.triangularView<Eigen::Upper>();
    case PreconditionerKind::LD: {
      const LduFactors f = ldu(A);
      return f.L * f.D;
    }
    case PreconditionerKind::DU: {
      const LduFactors f = ldu(A);
      return f.D * f.U;
    }
  }
  throw InvalidArgument("unknown preconditioner kind");
}

std::string tableau_to_json(const ButcherTableau& t) {
  std::vector<double> a;
  a.reserve(static_cast<std::size_t>(t.s * t.s));
  for (Index i = 0; i < t.s; ++i) {
    for (Index k = 0; k < t.s; ++k) a.push_back(t.A(i, k));
  }
  nlohmann::json j{{"kind", to_string(t.kind)},
                     {"s", t.s},
                     {"A", a},
                     {"b", std::vector<double>(t.b.data(), t.b.data() + t.b.size())},
                     {"c", std::vector<double>(t.c.data(), t.c.data() + t.c.size())}};
  if (t.b_prime) {
    j["b_prime"] = std::vector<double>(t.b_prime->data(), t.b_prime->data() + t.b_prime->size());
  }
  return j.dump();
}

}  // namespace irkprec
