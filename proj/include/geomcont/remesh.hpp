#pragma once

#include "geomcont/mesh.hpp"

#include <functional>

namespace geomcont {

/// Collapse short edges of badly shaped triangles. Repeats iters passes; in
/// each pass the worst sigma-fraction by distortion h/r is visited and the
/// shortest edge of each is collapsed to the midpoint, skipping collapses
/// that would produce a non-manifold configuration or flip a triangle. With
/// keep_boundary set, triangles touching the boundary are never collapsed.
/// Ancestry is cleared.
SurfaceMesh degcoarsen(const SurfaceMesh& m, double sigma, int iters = 5,
                       bool keep_boundary = false);

/// Intrinsic Delaunay retriangulation: flips interior edges (on the two
/// unfolded triangles) until the opposite-angle sum of every interior edge
/// is <= pi. Vertex positions unchanged, boundary edges never flipped,
/// ancestry cleared.
SurfaceMesh retriangulate(const SurfaceMesh& m);

/// Boundary projection hook for move_points: receives the vertex id and its
/// proposed position, returns the admissible position. The default pins
/// boundary vertices in place.
using BoundaryProject = std::function<Eigen::Vector3d(int, const Eigen::Vector3d&)>;

/// Edge-spring relaxation: desired length 1.2 x mean edge length, repulsive
/// forces only. After each pseudo-time step interior displacements are
/// projected onto the local tangent plane and boundary vertices onto the
/// prescribed curve; each step is followed by retriangulate. A step causing
/// triangle inversion is halved and retried up to 5 times, then the routine
/// throws.
SurfaceMesh move_points(const SurfaceMesh& m, double dt, int iters,
                        const BoundaryProject& project = nullptr);

}  // namespace geomcont
