#include "irkprec/assembly.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <numbers>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

namespace irkprec {

namespace {

using Triplets = std::vector<Eigen::Triplet<double>>;

struct ElementGeometry {
  std::array<Point, 3> v;
  double area;
  // Gradients of the three barycentric basis functions (constant on the element).
  std::array<std::array<double, 2>, 3> grad;
};

ElementGeometry geometry(const TriMesh& mesh, std::size_t t) {
  ElementGeometry g{};
  const auto& tri = mesh.triangles[t];
  for (int a = 0; a < 3; ++a) g.v[static_cast<std::size_t>(a)] = mesh.nodes[static_cast<std::size_t>(tri[static_cast<std::size_t>(a)])];
  const double x1 = g.v[0].x, y1 = g.v[0].y;
  const double x2 = g.v[1].x, y2 = g.v[1].y;
  const double x3 = g.v[2].x, y3 = g.v[2].y;
  const double det = (x2 - x1) * (y3 - y1) - (x3 - x1) * (y2 - y1);
  g.area = 0.5 * det;
  g.grad[0] = {(y2 - y3) / det, (x3 - x2) / det};
  g.grad[1] = {(y3 - y1) / det, (x1 - x3) / det};
  g.grad[2] = {(y1 - y2) / det, (x2 - x1) / det};
  return g;
}

Point map_point(const ElementGeometry& g, const std::array<double, 3>& lam) {
  return {lam[0] * g.v[0].x + lam[1] * g.v[1].x + lam[2] * g.v[2].x,
          lam[0] * g.v[0].y + lam[1] * g.v[1].y + lam[2] * g.v[2].y};
}

SparseMatrix finish(const TriMesh& mesh, Triplets& trip) {
  SparseMatrix A(mesh.num_nodes(), mesh.num_nodes());
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

void scatter(Triplets& trip, const std::array<int, 3>& tri, const double (&local)[3][3]) {
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) trip.emplace_back(tri[static_cast<std::size_t>(a)], tri[static_cast<std::size_t>(b)], local[a][b]);
}

enum class SignCheck { None, Positive, NonNegative };

void check_value(double v, SignCheck check, const char* name, const Point& p) {
  const bool bad = !std::isfinite(v) || (check == SignCheck::Positive && !(v > 0.0)) ||
                   (check == SignCheck::NonNegative && v < 0.0);
  if (bad) {
    std::ostringstream msg;
    msg << name << " = " << v << " at (" << p.x << ", " << p.y << ")";
    throw InvalidCoefficient(msg.str());
  }
}

// Closed-form element contributions; `diffusion` and `reaction` are
// constant coefficient values.
SparseMatrix assemble_constant(const TriMesh& mesh, double diffusion, double reaction) {
  Triplets trip;
  trip.reserve(mesh.triangles.size() * 9);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const ElementGeometry g = geometry(mesh, t);
    double local[3][3];
    for (int a = 0; a < 3; ++a) {
      for (int b = 0; b < 3; ++b) {
        const auto& ga = g.grad[static_cast<std::size_t>(a)];
        const auto& gb = g.grad[static_cast<std::size_t>(b)];
        const double k = diffusion * g.area * (ga[0] * gb[0] + ga[1] * gb[1]);
        const double m = reaction * g.area / 12.0 * (a == b ? 2.0 : 1.0);
        local[a][b] = k + m;
      }
    }
    scatter(trip, mesh.triangles[t], local);
  }
  return finish(mesh, trip);
}

SparseMatrix assemble_quadrature(const TriMesh& mesh, const ScalarField* alpha, SignCheck alpha_check,
                                 const ScalarField* beta, SignCheck beta_check) {
  const auto& rule = degree4_rule();
  Triplets trip;
  trip.reserve(mesh.triangles.size() * 9);
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const ElementGeometry g = geometry(mesh, t);
    double local[3][3] = {};
    double alpha_avg = 0.0;
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const Point p = map_point(g, rule.bary[q]);
      const double w = rule.weights[q] * g.area;
      if (alpha) {
        const double a = (*alpha)(p.x, p.y);
        check_value(a, alpha_check, "alpha", p);
        alpha_avg += w * a;
      }
      if (beta) {
        const double b = (*beta)(p.x, p.y);
        check_value(b, beta_check, "beta", p);
        for (int i = 0; i < 3; ++i)
          for (int j = 0; j < 3; ++j) local[i][j] += w * b * rule.bary[q][static_cast<std::size_t>(i)] * rule.bary[q][static_cast<std::size_t>(j)];
      }
    }
    if (alpha) {
      for (int i = 0; i < 3; ++i) {
        for (int j = 0; j < 3; ++j) {
          const auto& gi = g.grad[static_cast<std::size_t>(i)];
          const auto& gj = g.grad[static_cast<std::size_t>(j)];
          local[i][j] += alpha_avg * (gi[0] * gj[0] + gi[1] * gj[1]);
        }
      }
    }
    scatter(trip, mesh.triangles[t], local);
  }
  return finish(mesh, trip);
}

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string_view to_string(CoefficientPreset preset) {
  switch (preset) {
    case CoefficientPreset::ConstantOnes: return "constant";
    case CoefficientPreset::ConstantDiffusion: return "constant-beta0";
    case CoefficientPreset::Variable: return "variable";
    case CoefficientPreset::VariableBetaZero: return "variable-beta0";
    case CoefficientPreset::Custom: return "custom";
  }
  return "custom";
}

CoefficientPreset coefficient_preset_from_string(std::string_view name) {
  for (auto p : {CoefficientPreset::ConstantOnes, CoefficientPreset::ConstantDiffusion, CoefficientPreset::Variable,
                 CoefficientPreset::VariableBetaZero}) {
    if (name == to_string(p)) return p;
  }
  throw InvalidArgument("unknown coefficient preset '" + std::string(name) + "'");
}

CoefficientField CoefficientField::constant(double alpha, double beta) {
  CoefficientField c;
  c.alpha = [alpha](double, double) { return alpha; };
  c.beta = [beta](double, double) { return beta; };
  c.grad_alpha = [](double, double) { return std::array<double, 2>{0.0, 0.0}; };
  c.constant_values = std::array<double, 2>{alpha, beta};
  return c;
}

CoefficientField CoefficientField::custom(ScalarField alpha, ScalarField beta, std::optional<VectorField> grad_alpha) {
  CoefficientField c;
  c.alpha = std::move(alpha);
  c.beta = std::move(beta);
  c.grad_alpha = std::move(grad_alpha);
  return c;
}

CoefficientField CoefficientField::from_preset(CoefficientPreset preset) {
  constexpr double pi = std::numbers::pi;
  CoefficientField c;
  switch (preset) {
    case CoefficientPreset::ConstantOnes: c = constant(1.0, 1.0); break;
    case CoefficientPreset::ConstantDiffusion: c = constant(1.0, 0.0); break;
    case CoefficientPreset::Variable:
    case CoefficientPreset::VariableBetaZero: {
      c.alpha = [](double x, double y) { return 1.0 + 0.2 * x * y; };
      c.grad_alpha = [](double x, double y) { return std::array<double, 2>{0.2 * y, 0.2 * x}; };
      if (preset == CoefficientPreset::Variable) {
        c.beta = [](double x, double y) { return 1.0 + 0.3 * std::sin(pi * x) * std::cos(pi * y); };
      } else {
        c.beta = [](double, double) { return 0.0; };
      }
      break;
    }
    case CoefficientPreset::Custom: throw InvalidArgument("from_preset: Custom has no definition");
  }
  c.preset = preset;
  return c;
}

bool CoefficientField::beta_vanishes() const {
  if (constant_values) return (*constant_values)[1] == 0.0;
  return preset == CoefficientPreset::VariableBetaZero || preset == CoefficientPreset::ConstantDiffusion;
}

const TriangleQuadrature& degree4_rule() {
  static const TriangleQuadrature rule = [] {
    constexpr double a1 = 0.445948490915965, b1 = 0.108103018168070, w1 = 0.223381589678011;
    constexpr double a2 = 0.091576213509771, b2 = 0.816847572980459, w2 = 0.109951743655322;
    TriangleQuadrature r{};
    r.bary = {{{a1, a1, b1}, {a1, b1, a1}, {b1, a1, a1}, {a2, a2, b2}, {a2, b2, a2}, {b2, a2, a2}}};
    r.weights = {w1, w1, w1, w2, w2, w2};
    return r;
  }();
  return rule;
}

SparseMatrix assemble_mass(const TriMesh& mesh) { return assemble_constant(mesh, 0.0, 1.0); }

SparseMatrix assemble_stiffness(const TriMesh& mesh, const CoefficientField& coeff) {
  if (coeff.is_constant()) {
    const auto [alpha, beta] = *coeff.constant_values;
    check_value(alpha, SignCheck::Positive, "alpha", {0.0, 0.0});
    check_value(beta, SignCheck::NonNegative, "beta", {0.0, 0.0});
    return assemble_constant(mesh, alpha, beta);
  }
  if (!coeff.alpha || !coeff.beta) throw InvalidArgument("assemble_stiffness: coefficient functions missing");
  return assemble_quadrature(mesh, &coeff.alpha, SignCheck::Positive, &coeff.beta, SignCheck::NonNegative);
}

SparseMatrix assemble_diffusion_part(const TriMesh& mesh, const ScalarField& alpha) {
  return assemble_quadrature(mesh, &alpha, SignCheck::None, nullptr, SignCheck::None);
}

SparseMatrix assemble_reaction_part(const TriMesh& mesh, const ScalarField& beta) {
  return assemble_quadrature(mesh, nullptr, SignCheck::None, &beta, SignCheck::None);
}

Vector assemble_load(const TriMesh& mesh, const ScalarField& f) {
  const auto& rule = degree4_rule();
  Vector load = Vector::Zero(mesh.num_nodes());
  for (std::size_t t = 0; t < mesh.triangles.size(); ++t) {
    const ElementGeometry g = geometry(mesh, t);
    const auto& tri = mesh.triangles[t];
    for (std::size_t q = 0; q < rule.weights.size(); ++q) {
      const Point p = map_point(g, rule.bary[q]);
      const double wf = rule.weights[q] * g.area * f(p.x, p.y);
      for (std::size_t a = 0; a < 3; ++a) load[tri[a]] += wf * rule.bary[q][a];
    }
  }
  return load;
}

Vector interpolate(const TriMesh& mesh, const ScalarField& f) {
  Vector v(mesh.num_nodes());
  for (Index i = 0; i < mesh.num_nodes(); ++i) {
    const Point& p = mesh.nodes[static_cast<std::size_t>(i)];
    v[i] = f(p.x, p.y);
  }
  return v;
}

void write_matrix_market(std::ostream& os, const SparseMatrix& A) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.rows() << ' ' << A.cols() << ' ' << A.nonZeros() << '\n';
  for (Index r = 0; r < A.outerSize(); ++r) {
    for (SparseMatrix::InnerIterator it(A, r); it; ++it) {
      os << it.row() + 1 << ' ' << it.col() + 1 << ' ' << shortest(it.value()) << '\n';
    }
  }
}

void write_matrix_market(std::ostream& os, const DenseMatrix& A) {
  os << "%%MatrixMarket matrix coordinate real general\n";
  os << A.rows() << ' ' << A.cols() << ' ' << A.size() << '\n';
  for (Index i = 0; i < A.rows(); ++i)
    for (Index j = 0; j < A.cols(); ++j) os << i + 1 << ' ' << j + 1 << ' ' << shortest(A(i, j)) << '\n';
}

SparseMatrix read_matrix_market(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line.rfind("%%MatrixMarket", 0) != 0) {
    throw InvalidArgument("read_matrix_market: missing header");
  }
  if (line.find("coordinate") == std::string::npos || line.find("real") == std::string::npos) {
    throw InvalidArgument("read_matrix_market: only coordinate real matrices are supported");
  }
  const bool symmetric = line.find("symmetric") != std::string::npos;
  while (std::getline(is, line) && (line.empty() || line[0] == '%')) {
  }
  Index rows = 0, cols = 0, nnz = 0;
  {
    std::istringstream dims(line);
    if (!(dims >> rows >> cols >> nnz)) throw InvalidArgument("read_matrix_market: bad size line");
  }
  Triplets trip;
  trip.reserve(static_cast<std::size_t>(nnz));
  for (Index e = 0; e < nnz; ++e) {
    if (!std::getline(is, line)) throw InvalidArgument("read_matrix_market: truncated entries");
    const char* p = line.data();
    const char* end = p + line.size();
    long long i = 0, j = 0;
    double v = 0.0;
    auto skip = [&] {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
    };
    skip();
    auto r1 = std::from_chars(p, end, i);
    p = r1.ptr;
    skip();
    auto r2 = std::from_chars(p, end, j);
    p = r2.ptr;
    skip();
    auto r3 = std::from_chars(p, end, v);
    if (r1.ec != std::errc{} || r2.ec != std::errc{} || r3.ec != std::errc{} || i < 1 || j < 1 || i > rows ||
        j > cols) {
      throw InvalidArgument("read_matrix_market: bad entry '" + line + "'");
    }
    trip.emplace_back(static_cast<int>(i - 1), static_cast<int>(j - 1), v);
    if (symmetric && i != j) trip.emplace_back(static_cast<int>(j - 1), static_cast<int>(i - 1), v);
  }
  SparseMatrix A(rows, cols);
  A.setFromTriplets(trip.begin(), trip.end());
  A.makeCompressed();
  return A;
}

}  // namespace irkprec
