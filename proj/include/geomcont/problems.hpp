#pragma once

#include "geomcont/contcore.hpp"
#include "geomcont/shapes.hpp"

namespace geomcont {

struct ProblemSetup {
  ProblemDef def;
  ProblemState state;
};

// ---------------------------------------------------------------------------
// spherical caps over the unit circle

/// CMC caps over the unit disk: residual -<LX,N> - 2 M H0 with u=0 on the
/// rim, volume (or area) constraint, parameters (H, V, A).
ProblemSetup cap_problem(int nrings = 10, bool area_constraint = false);

struct CapReference {
  double H = 0;  // exact cap curvature for the outer normal
  double h = 0;  // cap height
};
/// Solves pi h (3 + h^2) / 6 = V for the unique h >= 0 (bisection to 1e-12).
CapReference cap_reference(double V);

/// Relative L2 error of the discrete H against the exact cap value at the
/// current volume parameter.
double cap_error(const ProblemState& state, const EvalContext& ctx);

// ---------------------------------------------------------------------------
// minimal surfaces over prescribed boundary curves

/// Boundary-curve modes: 0 zero-DBC, 1 prescribe X3 = alpha sin(k phi) on the
/// rim (deliberately under-determined), 2 pin the rim to gamma(phi; alpha, k)
/// on the unit sphere. Parameters (H, V, A, alpha).
ProblemSetup bdcurve_problem(int mode, int k, int nrings = 10);

/// gamma(phi; alpha, k) of the curve-bc mode.
Eigen::Vector3d bdcurve_gamma(double phi, double alpha, int k);

// ---------------------------------------------------------------------------
// Enneper

Eigen::Vector3d enneper_point(double r, double theta);
Eigen::Vector3d enneper_gamma(double theta, double alpha);

/// Minimal surface pinned to the Enneper boundary curve; the boundary
/// parameter theta is carried per vertex (as cos/sin fields) and survives
/// refinement by linear interpolation. Parameters (H, V, A, alpha).
ProblemSetup enneper_problem(double alpha0, int nrings = 12);

// ---------------------------------------------------------------------------
// nodoids

struct NodoidParams {
  double a = 1.0;   // shape parameter > -1
  double H = 1.0;   // mean curvature (positive, inner normal)
  double t0 = 1.0;  // half parameter interval
  double buckle_radius() const;  // R at t = 0
  double neck_radius() const;    // at t = pi
};

/// Nodary profile point (x, z) at parameter t (z by adaptive quadrature).
Eigen::Vector2d nodoid_profile_point(const NodoidParams& p, double t);

enum class NodoidVariant { TrigQuadrature, Elliptic };

/// Surface of revolution sampled on an (axial x angular) grid with the seam
/// welded; Chebyshev axial spacing optional.
SurfaceMesh nodoid_mesh(const NodoidParams& p, int nax, int nphi,
                        NodoidVariant variant = NodoidVariant::TrigQuadrature,
                        bool chebyshev = false);

struct NodoidTableRow {
  double t0 = 0, a = 0, H = 0, A = 0, residual = 0;
  bool ok = false;
};
/// Continuation table of the boundary relation for circles of radius rstar a
/// height apart: solves for a(t0) on a t0 grid and evaluates H and the area.
std::vector<NodoidTableRow> nodoid_boundary_solve(double rstar, double height,
                                                  double t0_min = 2e-3, double t0_max = 4.9,
                                                  int n = 360);

/// Liquid bridge / nodoid with Dirichlet circles at z = +/- l: continuation
/// in (A, H), inner normal, rotational PC available at slot 3.
ProblemSetup nodoid_dbc_problem(double rstar = 1.0, double l = 0.5, int nax = 16,
                                int nphi = 32);

/// One-cell z-periodic nodoid at fixed H: height delta is the primary
/// parameter (implemented by axial rescaling), three translational PCs are
/// always active, rotational PC at slot 5.
ProblemSetup nodoid_pbc_problem(double H0 = 1.0, double a0 = 2.5, int nax = 24, int nphi = 36);

// ---------------------------------------------------------------------------
// Helfrich cylinders

struct HelfrichParams {
  double c0 = 0;      // spontaneous curvature
  double lam1 = 0.25; // surface tension
  double alpha = 1.0; // boundary circle radius
};

/// Two-field formulation (u, H) of the clamped Helfrich cylinder on
/// x in [-1, 1]; parameters (c0, lam1, alpha, s_rot), inner normal.
ProblemSetup helfrich_cylinder_problem(const HelfrichParams& p, int nax = 24, int nphi = 40);

// ---------------------------------------------------------------------------
// spheres and hemispheres

ProblemSetup sphere_problem(int level = 3);
ProblemSetup hemisphere_problem(int nrings = 14);

// ---------------------------------------------------------------------------
// helpers

/// Adds the rotational phase condition (multiplier at the given slot) and
/// appends the slot to the active parameters.
void enable_rotational_pc(ProblemSetup& setup, int multiplier_slot);

/// Dominant angular wave number of a vertex field on the ring of vertices
/// with axis coordinate within halfwidth of center (Fourier projection on
/// m = 0..mmax).
int dominant_wavenumber(const SurfaceMesh& m, const Vec& field, char axis, double center,
                        double halfwidth, int mmax = 6);

/// z-parity pairing: relative M-weighted inner product of a field with its
/// z-mirrored counterpart; -1 odd, +1 even.
double z_parity(const SurfaceMesh& m, const Vec& mass, const Vec& field, double pair_tol);

}  // namespace geomcont
