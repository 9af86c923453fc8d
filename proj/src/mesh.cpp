#include "irkprec/mesh.hpp"

#include <charconv>
#include <cmath>
#include <limits>
#include <ostream>
#include <string>

namespace irkprec {

namespace {

constexpr int kMaxMeshExponent = 12;

std::string shortest(double v) {
  char buf[32];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

double TriMesh::signed_area(std::size_t t) const {
  const auto& tri = triangles[t];
  const Point& a = nodes[static_cast<std::size_t>(tri[0])];
  const Point& b = nodes[static_cast<std::size_t>(tri[1])];
  const Point& c = nodes[static_cast<std::size_t>(tri[2])];
  return 0.5 * ((b.x - a.x) * (c.y - a.y) - (c.x - a.x) * (b.y - a.y));
}

TriMesh build_mesh(int k) {
  if (k < 0) throw InvalidArgument("build_mesh: k must be non-negative");
  if (k > kMaxMeshExponent) {
    throw ResourceError("build_mesh: k = " + std::to_string(k) + " exceeds the supported maximum " +
                        std::to_string(kMaxMeshExponent));
  }
  TriMesh mesh;
  mesh.k = k;
  mesh.n = 1 << (k + 1);
  mesh.h = 2.0 / mesh.n;
  const int n = mesh.n;
  mesh.nodes.reserve(static_cast<std::size_t>((n + 1) * (n + 1)));
  for (int j = 0; j <= n; ++j) {
    for (int i = 0; i <= n; ++i) {
      mesh.nodes.push_back({-1.0 + i * mesh.h, -1.0 + j * mesh.h});
      if (i == 0 || j == 0 || i == n || j == n) mesh.boundary_nodes.push_back(mesh.node_index(i, j));
    }
  }
  mesh.triangles.reserve(static_cast<std::size_t>(2 * n * n));
  for (int j = 0; j < n; ++j) {
    for (int i = 0; i < n; ++i) {
      const int ll = mesh.node_index(i, j);
      const int lr = mesh.node_index(i + 1, j);
      const int ul = mesh.node_index(i, j + 1);
      const int ur = mesh.node_index(i + 1, j + 1);
      mesh.triangles.push_back({ll, lr, ur});
      mesh.triangles.push_back({ll, ur, ul});
    }
  }
  return mesh;
}

SparseMatrix prolongation(const TriMesh& coarse, const TriMesh& fine) {
  if (fine.n != 2 * coarse.n) throw InvalidArgument("prolongation: meshes are not nested");
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(static_cast<std::size_t>(fine.num_nodes()) * 2);
  for (int j = 0; j <= fine.n; ++j) {
    for (int i = 0; i <= fine.n; ++i) {
      const int row = fine.node_index(i, j);
      const int ci = i / 2;
      const int cj = j / 2;
      const bool odd_i = (i % 2) != 0;
      const bool odd_j = (j % 2) != 0;
      if (!odd_i && !odd_j) {
        trip.emplace_back(row, coarse.node_index(ci, cj), 1.0);
      } else if (odd_i && !odd_j) {
        trip.emplace_back(row, coarse.node_index(ci, cj), 0.5);
        trip.emplace_back(row, coarse.node_index(ci + 1, cj), 0.5);
      } else if (!odd_i && odd_j) {
        trip.emplace_back(row, coarse.node_index(ci, cj), 0.5);
        trip.emplace_back(row, coarse.node_index(ci, cj + 1), 0.5);
      } else {
        // Square midpoint sits on the lower-left to upper-right diagonal.
        trip.emplace_back(row, coarse.node_index(ci, cj), 0.5);
        trip.emplace_back(row, coarse.node_index(ci + 1, cj + 1), 0.5);
      }
    }
  }
  SparseMatrix P(fine.num_nodes(), coarse.num_nodes());
  P.setFromTriplets(trip.begin(), trip.end());
  return P;
}

MeshHierarchy build_hierarchy(int k_fine, int k_coarse) {
  if (k_coarse < 0 || k_fine < k_coarse) {
    throw InvalidArgument("build_hierarchy: need 0 <= k_coarse <= k_fine");
  }
  MeshHierarchy hierarchy;
  for (int k = k_coarse; k <= k_fine; ++k) {
    hierarchy.levels.push_back(build_mesh(k));
    if (hierarchy.levels.size() > 1) {
      const auto l = hierarchy.levels.size();
      hierarchy.prolongations.push_back(prolongation(hierarchy.levels[l - 2], hierarchy.levels[l - 1]));
    }
  }
  return hierarchy;
}

void write_mesh(std::ostream& os, const TriMesh& mesh) {
  os << mesh.num_nodes() << ' ' << mesh.num_triangles() << '\n';
  for (const auto& p : mesh.nodes) os << shortest(p.x) << ' ' << shortest(p.y) << '\n';
  for (const auto& t : mesh.triangles) os << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace irkprec
