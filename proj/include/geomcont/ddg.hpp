#pragma once

#include "geomcont/mesh.hpp"

#include <array>

namespace geomcont {

enum class MassKind { Voronoi, Full, Barycentric };

/// Cotangent Laplacian in the positive semidefinite convention:
/// L_ij = -(cot a_ij + cot b_ij)/2 off the diagonal, diagonal = -row sum,
/// so u'Lu is the Dirichlet energy and L*1 = 0.
SpMat cotan_laplacian(const SurfaceMesh& m, Exec ex = Exec::Auto);

/// Voronoi: diagonal of mixed areas (rhomb through edge midpoints and
/// circumcenter for non-obtuse triangles; |T|/2 at the obtuse corner and
/// |T|/4 at the others otherwise). Full: linear-element consistent mass.
/// Barycentric: diagonal of |T|/3 shares.
SpMat mass_matrix(const SurfaceMesh& m, MassKind kind, Exec ex = Exec::Auto);

/// Diagonal of a lumped mass matrix as a vector.
Vec lumped_mass(const SurfaceMesh& m, MassKind kind = MassKind::Voronoi, Exec ex = Exec::Auto);

/// Mixed (Voronoi) area contribution of every triangle corner, nt x 3.
Eigen::MatrixX3d corner_mixed_areas(const SurfaceMesh& m);

/// Interior angles at the three corners of every triangle, nt x 3.
Eigen::MatrixX3d corner_angles(const SurfaceMesh& m);

/// Zero the given coordinate component on a vertex set before renormalizing,
/// e.g. horizontal normals on a support plane.
struct NormalCorrection {
  std::vector<int> verts;
  int component = 2;
};

/// Angle-weighted average of incident triangle normals, scaled by
/// orientation, corrections applied, then renormalized. Throws if a normal
/// vanishes after correction.
Eigen::MatrixX3d vertex_normals(const SurfaceMesh& m, double orientation = 1.0,
                                const std::vector<NormalCorrection>& corrections = {},
                                Exec ex = Exec::Auto);

struct MeanCurvature {
  Vec weak;  // H_weak(i) = -<(L X)(i), N(i)>/2
  Vec H;     // M^{-1} H_weak
};

/// Lumped-mass version (Voronoi or barycentric diagonal).
MeanCurvature mean_curvature(const SurfaceMesh& m, const Eigen::MatrixX3d& N, const Vec& mass);
/// Consistent-mass version; solves with the full mass matrix.
MeanCurvature mean_curvature_full(const SurfaceMesh& m, const Eigen::MatrixX3d& N,
                                  const SpMat& mass_full);

struct CurvatureBundle {
  Vec K_weak;  // angle deficit: 2*pi - sum(angles) interior, pi - sum at boundary
  Vec K;       // M^{-1} K_weak
  Vec k1, k2;  // principal curvatures, k1 >= k2
};

CurvatureBundle discrete_curvatures(const SurfaceMesh& m, const Vec& H, const Vec& mass);

double area(const SurfaceMesh& m);

/// Algebraic volume V = (1/3) sum_i m_i <X_i, N_i>.
double volume(const SurfaceMesh& m, const Eigen::MatrixX3d& N, const Vec& mass);

/// Flux correction closing each boundary loop with a centroid fan, oriented
/// consistently with the triangle winding. Add to volume() when the physical
/// volume of an open surface is wanted (zero for loops in planes through the
/// origin and for closed meshes).
double boundary_cap_volume(const SurfaceMesh& m);

/// Per-triangle constant gradient of the linear interpolant of f.
Eigen::MatrixX3d face_gradient(const SurfaceMesh& m, const Vec& f);

/// Face gradients interpolated to vertices with Voronoi mixed-area weights.
Eigen::MatrixX3d surface_gradient(const SurfaceMesh& m, const Vec& f);

/// Node-to-node derivative operators (d/dx, d/dy, d/dz on the surface),
/// face gradient composed with the Voronoi-weighted center-to-point map.
std::array<SpMat, 3> gradient_operators(const SurfaceMesh& m);

/// Weak Jacobi operator J = L - M diag(4H^2 - 2K); M^{-1} J discretizes
/// -Laplace - |S|^2.
SpMat jacobi_operator(const SpMat& L, const Vec& mass, const Vec& H, const Vec& K);

// --- exact shape derivatives along a fixed normal field ------------------
// Entries (i, j) are N0_j-directional derivatives of per-vertex quantities,
// i.e. the building blocks of analytic Jacobians for X = X0 + u N0.

/// d(dA/du_i)/du_j: the area Hessian contracted with N0 on both sides.
SpMat area_hessian_normal(const SurfaceMesh& m, const Eigen::MatrixX3d& N0);

/// d(voronoi mass_i)/du_j, with the mixed-area obtuse branches.
SpMat mass_gradient_normal(const SurfaceMesh& m, const Eigen::MatrixX3d& N0);

/// d((L(X) w)_i)/du_j for a fixed vertex field w.
SpMat stiffness_action_gradient_normal(const SurfaceMesh& m, const Vec& w,
                                       const Eigen::MatrixX3d& N0);

/// d(angle deficit K_weak_i)/du_j.
SpMat angle_deficit_gradient_normal(const SurfaceMesh& m, const Eigen::MatrixX3d& N0);

}  // namespace geomcont
