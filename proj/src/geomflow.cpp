#include "geomcont/geomflow.hpp"

#include "geomcont/remesh.hpp"

#include <cmath>
#include <fstream>
#include <stdexcept>

namespace geomcont {

namespace {

SurfaceMesh try_step(const SurfaceMesh& m, const NormalSpec& normal, FlowKind kind, double dt,
                     bool fix_dirichlet,
                     const std::function<Vec(const SurfaceMesh&, const Operators&)>& flowf,
                     bool& inverted) {
  Operators ops = build_operators(m, normal, false);
  Vec f;
  switch (kind) {
    case FlowKind::MCF:
      f = ops.H;
      break;
    case FlowKind::VPMCF: {
      const double Hbar = ops.Hweak.sum() / ops.mass.sum();
      f = ops.H.array() - Hbar;
      break;
    }
    case FlowKind::Custom:
      if (!flowf) throw std::runtime_error("flow_step: custom flow without flowf");
      f = flowf(m, ops);
      break;
  }
  SurfaceMesh out = m;
  for (int i = 0; i < m.np(); ++i) {
    if (fix_dirichlet && std::binary_search(m.idx.begin(), m.idx.end(), i)) continue;
    out.X.row(i) += dt * f[i] * ops.N.row(i);
  }
  inverted = false;
  for (int t = 0; t < m.nt() && !inverted; ++t) {
    Eigen::Vector3d n0 = (m.X.row(m.tri(t, 1)) - m.X.row(m.tri(t, 0)))
                             .cross(m.X.row(m.tri(t, 2)) - m.X.row(m.tri(t, 0)));
    Eigen::Vector3d n1 = (out.X.row(out.tri(t, 1)) - out.X.row(out.tri(t, 0)))
                             .cross(out.X.row(out.tri(t, 2)) - out.X.row(out.tri(t, 0)));
    if (n1.norm() <= 0 || n0.dot(n1) <= 0) inverted = true;
  }
  return out;
}

}  // namespace

SurfaceMesh flow_step(const SurfaceMesh& m, const NormalSpec& normal, FlowKind kind, double dt,
                      bool fix_dirichlet,
                      const std::function<Vec(const SurfaceMesh&, const Operators&)>& flowf) {
  bool inverted = false;
  SurfaceMesh out = try_step(m, normal, kind, dt, fix_dirichlet, flowf, inverted);
  if (!inverted) return out;
  out = try_step(m, normal, kind, dt / 2, fix_dirichlet, flowf, inverted);
  if (!inverted) return out;
  throw std::runtime_error("flow_step: triangle inversion persists after halving dt");
}

FlowResult flow_run(SurfaceMesh mesh, const NormalSpec& normal, const FlowSettings& settings) {
  FlowResult res;
  double t = 0;
  auto sample = [&](const SurfaceMesh& m) {
    FlowSample s;
    s.t = t;
    s.A = area(m);
    s.V = tet_volume(m) + boundary_cap_volume(m);
    s.delta_mesh = mesh_quality(m).delta_mesh;
    res.series.push_back(s);
  };
  sample(mesh);
  const double V0 = res.series.front().V;

  for (int step = 1; step <= settings.nsteps; ++step) {
    try {
      mesh = flow_step(mesh, normal, settings.kind, settings.dt, settings.fix_dirichlet,
                       settings.flowf);
    } catch (const std::exception& e) {
      res.ok = false;
      res.message = e.what();
      break;
    }
    t += settings.dt;
    if (settings.adapt_every > 0 && step % settings.adapt_every == 0) {
      switch (settings.adapt.action) {
        case AdaptPolicy::Action::Refine: {
          auto sel = select_elements(mesh, settings.adapt.selector);
          mesh = refine(mesh, sel, settings.adapt.strategy, settings.adapt.keepbd).mesh;
          break;
        }
        case AdaptPolicy::Action::Coarsen: {
          auto sel = select_elements(mesh, settings.adapt.selector);
          mesh = coarsen(mesh, sel).mesh;
          break;
        }
        case AdaptPolicy::Action::Degcoarsen:
          mesh = degcoarsen(mesh, settings.adapt.sigma, settings.adapt.iters,
                            settings.adapt.keepbd);
          break;
        case AdaptPolicy::Action::MoveRetrig:
          mesh = move_points(mesh, settings.adapt.dt, settings.adapt.iters);
          break;
      }
    }
    if (step % std::max(1, settings.record_every) == 0 || step == settings.nsteps) sample(mesh);
  }
  if (V0 != 0) res.volume_drift = std::abs(1.0 - res.series.back().V / V0);
  res.mesh = std::move(mesh);
  return res;
}

void write_flow_csv(const std::string& path, const std::vector<FlowSample>& series) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_flow_csv: cannot open " + path);
  out << "t,A,V,delta_mesh\n";
  out.precision(15);
  for (const auto& s : series)
    out << s.t << "," << s.A << "," << s.V << "," << s.delta_mesh << "\n";
}

}  // namespace geomcont
