#pragma once

#include "geomcont/mesh.hpp"

namespace geomcont {

/// Icosahedron subdivided `level` times, vertices projected to the unit
/// sphere. Outward orientation, no boundary. level 2/3/4 give 162/642/2562
/// vertices.
SurfaceMesh icosphere(int level);

/// Structured polar disk of radius `radius` in the z=0 plane, counterclockwise
/// seen from +z. Ring k carries 6k vertices at radius radius*(k/nrings)^grading;
/// grading < 1 densifies the rim. Boundary classified Dirichlet.
SurfaceMesh disk_mesh(int nrings, double radius = 1.0, double grading = 1.0);

/// Cylinder of the given radius with axis along 'z' or 'x', spanning
/// [c0, c1] along the axis, nax axial intervals and nphi around. Outward
/// orientation; the two rims are Dirichlet boundary.
SurfaceMesh cylinder_mesh(double radius, double c0, double c1, int nax, int nphi,
                          char axis = 'z');

/// Upper unit hemisphere built from a (possibly rim-graded) disk mesh lifted
/// by z = sqrt(1 - r^2). Outward orientation.
SurfaceMesh hemisphere_mesh(int nrings, double grading = 0.8);

}  // namespace geomcont
