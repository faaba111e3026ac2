#pragma once

#include "geomcont/ddg.hpp"
#include "geomcont/mesh.hpp"

#include <functional>
#include <optional>

namespace geomcont {

/// Operator bundle evaluated on one surface, shared by residuals,
/// constraints and stability computations.
struct Operators {
  SpMat L;             // cotan Laplacian (PSD convention)
  Vec mass;            // Voronoi lumped mass
  Eigen::MatrixX3d N;  // problem normals (orientation + corrections applied)
  Vec Hweak, H;
  Vec Kweak, K;
  std::array<SpMat, 3> grad;  // node-wise surface derivative operators
  bool has_grad = false;
};

/// Normal field recipe: orientation sign plus component-zeroing corrections.
/// The corrections hook lets a problem depend on the current boundary lists.
struct NormalSpec {
  double orientation = 1.0;
  std::function<std::vector<NormalCorrection>(const SurfaceMesh&)> corrections;
  Eigen::MatrixX3d eval(const SurfaceMesh& m) const;
};

Operators build_operators(const SurfaceMesh& m, const NormalSpec& normal,
                          bool with_grad = false);

enum class ConstraintKind {
  Volume,           // q = V(X) - pars[target_slot]
  Area,             // q = A(X) - pars[target_slot]
  RotationalPC,     // q = dphi' u, removes the z-rotation kernel
  TranslationalPC,  // q = <grad_axis X, N> M u, removes a translation kernel
  NormalIntegralPC  // q = sum_i M_i N_i[axis] (position pinning)
};

struct Constraint {
  ConstraintKind kind = ConstraintKind::Volume;
  int target_slot = -1;      // parameter carrying the target value
  int multiplier_slot = -1;  // parameter slot of the Lagrange multiplier (PCs)
  int axis = 0;              // x/y/z for translational and normal-integral kinds
  bool include_caps = false; // close boundary loops when measuring volume
};

struct ConstraintEval {
  double value = 0;
  Vec du;     // gradient w.r.t. the full-vertex normal displacement
  Vec dpars;  // partials w.r.t. the full parameter vector
};

/// Exact polyhedral (tet-sum) volume used by the volume constraint; agrees
/// with the quadrature volume() to discretization accuracy and has a
/// closed-form gradient.
double tet_volume(const SurfaceMesh& m);

/// Gradient of tet_volume w.r.t. normal displacement along N0.
Vec tet_volume_grad(const SurfaceMesh& m, const Eigen::MatrixX3d& N0);

ConstraintEval eval_constraint(const Constraint& c, const SurfaceMesh& m, const Operators& ops,
                               const Eigen::MatrixX3d& N0, const Vec& u_full, const Vec& pars,
                               const NormalSpec& normal);

/// Vertex field scaled by the Lagrange multiplier and added to the PDE
/// residual (weak form): the constraint row for rot/trans PCs, M.*N[axis]
/// for the normal-integral kind.
Vec pc_field(const Constraint& c, const SurfaceMesh& m, const Operators& ops);

/// Linear identification of periodically paired boundary vertices.
struct PeriodicMaps {
  SpMat fill;  // np_full x np_reduced, one nonzero per row
  SpMat drop;  // np_reduced x np_full selection, drop*fill = I
  std::vector<std::pair<int, int>> pairs;  // (source, target)
  std::vector<int> red2full;
  std::vector<int> full2red;  // targets map to their source's reduced index
  int np_full = 0, np_red = 0;
};

/// Pairs boundary vertices v with the boundary vertex nearest X_v + shift
/// within tol. Throws listing the offenders when a boundary vertex is
/// neither matched nor a match target, or when a match is ambiguous.
PeriodicMaps build_periodic_maps(const SurfaceMesh& m, const Eigen::Vector3d& shift, double tol);

}  // namespace geomcont
