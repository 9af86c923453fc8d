#pragma once

#include "irkprec/types.hpp"

#include <array>
#include <iosfwd>
#include <vector>

namespace irkprec {

struct Point {
  double x = 0.0;
  double y = 0.0;
};

/// Uniform triangulation of [-1,1]^2 with n = 2^{k+1} squares per side, each
/// split along its lower-left to upper-right diagonal. Nodes are numbered
/// row-major (y outer, x inner).
struct TriMesh {
  int k = 0;
  int n = 0;
  double h = 0.0;
  std::vector<Point> nodes;
  std::vector<std::array<int, 3>> triangles;
  std::vector<int> boundary_nodes;

  Index num_nodes() const { return static_cast<Index>(nodes.size()); }
  Index num_triangles() const { return static_cast<Index>(triangles.size()); }
  double signed_area(std::size_t t) const;
  int node_index(int i, int j) const { return j * (n + 1) + i; }
};

/// Mesh with h = 2^-k. k = 0 (n = 2) is accepted for use as a multigrid
/// coarse level.
TriMesh build_mesh(int k);

/// Nested meshes for k = k_coarse..k_fine (coarsest first) and the P1
/// interpolation operators between consecutive levels.
struct MeshHierarchy {
  std::vector<TriMesh> levels;
  /// prolongations[l] maps level l nodal values to level l + 1.
  std::vector<SparseMatrix> prolongations;

  std::size_t num_levels() const { return levels.size(); }
  const TriMesh& finest() const { return levels.back(); }
};

MeshHierarchy build_hierarchy(int k_fine, int k_coarse = 1);

/// P1 nodal interpolation from the mesh with n squares per side to its
/// uniform refinement.
SparseMatrix prolongation(const TriMesh& coarse, const TriMesh& fine);

/// Plain-text export: a header line "num_nodes num_triangles", one "x y" line
/// per node, then one zero-based "i j k" line per triangle.
void write_mesh(std::ostream& os, const TriMesh& mesh);

}  // namespace irkprec
