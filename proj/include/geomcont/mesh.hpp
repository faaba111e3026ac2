#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/SparseCore>

#include <array>
#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace geomcont {

using Vec = Eigen::VectorXd;
using SpMat = Eigen::SparseMatrix<double>;

/// Triangulated surface immersed in R^3 with boundary bookkeeping and
/// refinement ancestry. Triangles are counterclockwise w.r.t. the chosen
/// orientation. Adaptation operations return new meshes; a SurfaceMesh is
/// never mutated after construction, so instances can be shared freely.
struct SurfaceMesh {
  Eigen::MatrixX3d X;    // vertex coordinates
  Eigen::MatrixX3i tri;  // triangle vertex triples

  std::vector<std::array<int, 2>> dbc_edges;  // Dirichlet boundary edges
  std::vector<std::array<int, 2>> nbc_edges;  // Neumann boundary edges
  std::vector<int> idx;  // vertices incident to dbc_edges (sorted)
  std::vector<int> idN;  // vertices incident to nbc_edges (sorted)

  // Parent record for triangles created by refine(). group is a sibling-set
  // id shared by all children of one parent; -1 marks root triangles. nsib is
  // the sibling count, used by coarsen to recognize complete sets.
  struct Parent {
    int group = -1;
    std::array<int, 3> verts{{-1, -1, -1}};
    int nsib = 0;
  };
  std::vector<Parent> ancestry;  // size nt, or empty if no triangle has one

  int np() const { return static_cast<int>(X.rows()); }
  int nt() const { return static_cast<int>(tri.rows()); }

  bool has_ancestry() const;
  Parent parent_of(int t) const;

  // rebuilds idx/idN from the boundary edge lists
  void rebuild_boundary_vertex_lists();
  bool is_boundary_vertex(int v) const;  // in idx or idN
};

inline std::int64_t edge_key(int a, int b) {
  if (a > b) std::swap(a, b);
  return (static_cast<std::int64_t>(a) << 32) | static_cast<std::int64_t>(b);
}

/// edge -> incident triangle list (1 = boundary, 2 = interior)
std::unordered_map<std::int64_t, std::vector<int>> edge_incidence(const SurfaceMesh& m);

/// Distortion and size extremes per Eq. of the mesh-quality block.
/// delta_mesh = max over triangles of (longest edge / in-radius);
/// 2*sqrt(3) ~= 3.4641 for an equilateral triangle.
struct MeshQuality {
  double delta_mesh = 0;
  double a_max = 0, a_min = 0;
  double h_max = 0, h_min = 0;
  int worst_tri = -1;
  bool degenerate = false;  // some triangle has in-radius 0
};

enum class Exec { Auto, Serial, Parallel };

MeshQuality mesh_quality(const SurfaceMesh& m, Exec ex = Exec::Auto);

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                     const Eigen::Vector3d& c);
double triangle_distortion(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                           const Eigen::Vector3d& c);  // h/r, inf if degenerate
Vec triangle_areas(const SurfaceMesh& m);

/// Triangle selection rules for adaptation.
struct ElementSelector {
  enum class Kind {
    LargestArea,         // the floor(sigma*nt) largest triangles
    SmallestAreaRefined, // smallest triangles among those with ancestry
    ShapeDistortion,     // top sigma fraction by h/r
    BoundaryAdjacent,    // all triangles with a boundary edge
    AreaThreshold,       // all triangles with area > (1-sigma)*maxA
  };
  Kind kind = Kind::LargestArea;
  double sigma = 0.3;
};

std::vector<int> select_elements(const SurfaceMesh& m, const ElementSelector& sel);

/// Throws std::runtime_error naming the first violated invariant:
/// non-manifold edges, inverted/zero-area triangles, inconsistent boundary
/// classification.
void validate_mesh(const SurfaceMesh& m);

/// Merge vertices closer than tol (absolute); used to close seams of
/// parametrically generated meshes. Degenerate triangles produced by the
/// welding are removed.
SurfaceMesh weld_duplicates(const SurfaceMesh& m, double tol);

double bbox_diagonal(const SurfaceMesh& m);

// ASCII format "SMESH 1": counts line "np nt ndbc nnbc", np coordinate lines,
// nt triangle lines (0-based), then boundary edge lines "i j D|N".
SurfaceMesh load_mesh(const std::string& path);
void save_mesh(const SurfaceMesh& m, const std::string& path);

/// Boundary edges detected from incidence (classified Dirichlet), idx/idN
/// rebuilt. Reports duplicate vertices within 1e-12 via validate-style error.
void finalize_boundary(SurfaceMesh& m);

}  // namespace geomcont
