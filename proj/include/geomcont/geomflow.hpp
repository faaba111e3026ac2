#pragma once

#include "geomcont/contcore.hpp"

namespace geomcont {

enum class FlowKind { MCF, VPMCF, Custom };

/// Explicit Euler stepping of Xdot = f N.  With the curvature convention of
/// this library (H = -1 on the unit sphere with outer normal), H N is the
/// inward mean-curvature vector and the area-decreasing flow steps along
/// +H N; spheres shrink with radius sqrt(R0^2 - 2t).
struct FlowSettings {
  FlowKind kind = FlowKind::MCF;
  double dt = 1e-3;
  int nsteps = 100;
  int adapt_every = 0;  // apply the adapt action every k steps (0: never)
  AdaptPolicy adapt;
  bool fix_dirichlet = true;  // Dirichlet vertices are held bitwise fixed
  // custom flow field f per vertex (kind == Custom)
  std::function<Vec(const SurfaceMesh&, const Operators&)> flowf;
  int record_every = 1;
};

struct FlowSample {
  double t = 0, A = 0, V = 0, delta_mesh = 0;
};

struct FlowResult {
  SurfaceMesh mesh;
  std::vector<FlowSample> series;
  double volume_drift = 0;  // |1 - V(T)/V(0)| (VPMCF diagnostics)
  bool ok = true;
  std::string message;
};

/// One explicit Euler step; throws after a halving retry if a triangle
/// inverts.
SurfaceMesh flow_step(const SurfaceMesh& m, const NormalSpec& normal, FlowKind kind, double dt,
                      bool fix_dirichlet = true,
                      const std::function<Vec(const SurfaceMesh&, const Operators&)>& flowf = {});

FlowResult flow_run(SurfaceMesh mesh, const NormalSpec& normal, const FlowSettings& settings);

void write_flow_csv(const std::string& path, const std::vector<FlowSample>& series);

}  // namespace geomcont
