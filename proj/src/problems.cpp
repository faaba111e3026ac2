#include "geomcont/problems.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <functional>
#include <limits>
#include <set>
#include <stdexcept>

namespace geomcont {

namespace {

// adaptive Simpson quadrature
double adsimp_rec(const std::function<double(double)>& f, double a, double b, double fa,
                  double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4 * frm + fb);
  if (depth <= 0 || std::abs(left + right - whole) <= 15 * tol)
    return left + right + (left + right - whole) / 15.0;
  return adsimp_rec(f, a, m, fa, flm, fm, left, tol / 2, depth - 1) +
         adsimp_rec(f, m, b, fm, frm, fb, right, tol / 2, depth - 1);
}

double adsimp(const std::function<double(double)>& f, double a, double b, double tol = 1e-11) {
  if (a == b) return 0.0;
  const double fa = f(a), fb = f(b), fm = f(0.5 * (a + b));
  const double whole = (b - a) / 6.0 * (fa + 4 * fm + fb);
  return adsimp_rec(f, a, b, fa, fm, fb, whole, tol, 40);
}

// Carlson symmetric forms for the incomplete elliptic integrals
double carlson_rf(double x, double y, double z) {
  for (int i = 0; i < 200; ++i) {
    const double lam = std::sqrt(x * y) + std::sqrt(y * z) + std::sqrt(z * x);
    x = 0.25 * (x + lam);
    y = 0.25 * (y + lam);
    z = 0.25 * (z + lam);
    const double mu = (x + y + z) / 3.0;
    if (std::max({std::abs(x - mu), std::abs(y - mu), std::abs(z - mu)}) < 1e-14 * mu)
      return 1.0 / std::sqrt(mu);
  }
  return 1.0 / std::sqrt((x + y + z) / 3.0);
}

double carlson_rd(double x, double y, double z) {
  double sum = 0, fac = 1;
  for (int i = 0; i < 200; ++i) {
    const double lam = std::sqrt(x * y) + std::sqrt(y * z) + std::sqrt(z * x);
    sum += fac / (std::sqrt(z) * (z + lam));
    fac *= 0.25;
    x = 0.25 * (x + lam);
    y = 0.25 * (y + lam);
    z = 0.25 * (z + lam);
    const double mu = (x + y + 3 * z) / 5.0;
    if (std::max({std::abs(x - mu), std::abs(y - mu), std::abs(z - mu)}) < 1e-14 * mu)
      return 3 * sum + fac / (mu * std::sqrt(mu));
  }
  return 3 * sum;
}

double ellip_f(double phi, double k) {
  const double s = std::sin(phi), c = std::cos(phi);
  return s * carlson_rf(c * c, 1 - k * k * s * s, 1.0);
}

double ellip_e(double phi, double k) {
  const double s = std::sin(phi), c = std::cos(phi);
  return s * carlson_rf(c * c, 1 - k * k * s * s, 1.0) -
         (k * k / 3.0) * s * s * s * carlson_rd(c * c, 1 - k * k * s * s, 1.0);
}

// ---------------------------------------------------------------------------
// shared CMC pieces

// Weak CMC residual with the step-frozen normal field: -<L X, N0> is the
// exact area gradient along N0, the mass in the source term is live.
Vec cmc_pde(const EvalContext& ctx, double H0) {
  Eigen::MatrixX3d LX = ctx.ops.L * ctx.mesh_n.X;
  Vec G = -(LX.array() * ctx.N0.array()).rowwise().sum();
  G -= 2.0 * H0 * ctx.ops.mass;
  return G;
}

SpMat replace_rows(const SpMat& J, const std::vector<int>& rows,
                   const std::vector<Eigen::Triplet<double>>& repl) {
  std::set<int> bd(rows.begin(), rows.end());
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < J.outerSize(); ++k)
    for (SpMat::InnerIterator it(J, k); it; ++it)
      if (!bd.count(static_cast<int>(it.row())))
        trip.emplace_back(it.row(), it.col(), it.value());
  trip.insert(trip.end(), repl.begin(), repl.end());
  SpMat out(J.rows(), J.cols());
  out.setFromTriplets(trip.begin(), trip.end());
  return out;
}

// exact d(cmc_pde)/du with Dirichlet rows replaced by the identity
SpMat cmc_jac(const EvalContext& ctx, double H0, const std::vector<int>& dirichlet) {
  SpMat J = -area_hessian_normal(ctx.mesh_n, ctx.N0) -
            2.0 * H0 * mass_gradient_normal(ctx.mesh_n, ctx.N0);
  if (dirichlet.empty()) return J;
  std::vector<Eigen::Triplet<double>> repl;
  for (int j : dirichlet) repl.emplace_back(j, j, 1.0);
  return replace_rows(J, dirichlet, repl);
}

ProblemState fresh_state(const ProblemDef& def, SurfaceMesh mesh, Vec pars,
                         std::vector<int> ilam) {
  ProblemState s;
  s.mesh = std::move(mesh);
  s.pars = std::move(pars);
  s.ilam = std::move(ilam);
  s.N0 = def.normal.eval(s.mesh);
  s.u = Vec::Zero(def.nfields * s.mesh.np());
  return s;
}

}  // namespace

// ---------------------------------------------------------------------------
// spherical caps

CapReference cap_reference(double V) {
  if (V < 0) throw std::runtime_error("cap_reference: V must be nonnegative");
  CapReference out;
  if (V == 0) return out;
  auto g = [&](double h) { return M_PI * h * (3.0 + h * h) / 6.0 - V; };
  double lo = 0, hi = std::max(2.0, std::cbrt(6.0 * V / M_PI) + 1.0);
  while (g(hi) < 0) hi *= 2;
  for (int i = 0; i < 200 && hi - lo > 1e-12 * (1 + hi); ++i) {
    const double mid = 0.5 * (lo + hi);
    (g(mid) < 0 ? lo : hi) = mid;
  }
  out.h = 0.5 * (lo + hi);
  out.H = -2.0 * out.h / (1.0 + out.h * out.h);
  return out;
}

double cap_error(const ProblemState& state, const EvalContext& ctx) {
  const double V = state.pars[1];
  if (V <= 1e-8) return 0.0;
  const double Hex = cap_reference(V).H;
  if (std::abs(Hex) < 1e-12) return 0.0;
  double s = 0;
  for (int i = 0; i < ctx.mesh_n.np(); ++i) {
    const double d = ctx.ops.H[i] - Hex;
    s += ctx.ops.mass[i] * d * d;
  }
  return std::sqrt(s) / std::abs(Hex);
}

ProblemSetup cap_problem(int nrings, bool area_constraint) {
  ProblemSetup su;
  ProblemDef& def = su.def;
  def.name = "cap";
  def.par_names = {"H", "V", "A"};
  def.normal.orientation = 1.0;  // outer
  def.volume_caps = true;
  def.stab_sign = -1.0;
  Constraint c;
  if (area_constraint) {
    c.kind = ConstraintKind::Area;
    c.target_slot = 2;
  } else {
    c.kind = ConstraintKind::Volume;
    c.target_slot = 1;
    c.include_caps = true;
  }
  def.constraints = {c};
  def.residual = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    Vec G = cmc_pde(ctx, state.pars[0]);
    for (int j : state.mesh.idx) G[j] = ctx.u1_full[j];
    return G;
  };
  def.jacobian = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    return cmc_jac(ctx, state.pars[0], state.mesh.idx);
  };
  def.error = cap_error;

  SurfaceMesh disk = disk_mesh(nrings);
  Vec pars(3);
  pars << 0.0, 0.0, area(disk);
  std::vector<int> ilam = area_constraint ? std::vector<int>{2, 0} : std::vector<int>{1, 0};
  su.state = fresh_state(def, std::move(disk), pars, ilam);
  return su;
}

// ---------------------------------------------------------------------------
// boundary curves

Eigen::Vector3d bdcurve_gamma(double phi, double alpha, int k) {
  const double c = std::cos(k * phi);
  const double b2 = 1.0 - alpha * alpha * c * c;
  if (b2 <= 0) throw std::runtime_error("bdcurve_gamma: beta undefined (alpha >= 1)");
  const double beta = std::sqrt(b2);
  return {beta * std::cos(phi), beta * std::sin(phi), alpha * c};
}

ProblemSetup bdcurve_problem(int mode, int k, int nrings) {
  ProblemSetup su;
  ProblemDef& def = su.def;
  def.name = "bdcurve";
  def.par_names = {"H", "V", "A", "alpha"};
  def.normal.orientation = 1.0;
  def.stab_sign = -1.0;

  if (mode == 1) {
    def.residual = [k](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
      Vec G = cmc_pde(ctx, state.pars[0]);
      const double al = state.pars[3];
      for (int j : state.mesh.idx) {
        const double phi = std::atan2(ctx.mesh_n.X(j, 1), ctx.mesh_n.X(j, 0));
        G[j] = ctx.mesh_n.X(j, 2) - al * std::sin(k * phi);
      }
      return G;
    };
    def.jacobian = [k](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
      SpMat J = cmc_jac(ctx, state.pars[0], {});
      const double al = state.pars[3];
      std::vector<Eigen::Triplet<double>> repl;
      for (int j : state.mesh.idx) {
        const double x = ctx.mesh_n.X(j, 0), y = ctx.mesh_n.X(j, 1);
        const double rho2 = x * x + y * y;
        const double phi = std::atan2(y, x);
        const double dphi = rho2 > 0 ? (-y * ctx.N0(j, 0) + x * ctx.N0(j, 1)) / rho2 : 0.0;
        repl.emplace_back(j, j, ctx.N0(j, 2) - al * k * std::cos(k * phi) * dphi);
      }
      return replace_rows(J, state.mesh.idx, repl);
    };
  } else {
    def.residual = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
      Vec G = cmc_pde(ctx, state.pars[0]);
      for (int j : state.mesh.idx) G[j] = ctx.u1_full[j];
      return G;
    };
    def.jacobian = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
      return cmc_jac(ctx, state.pars[0], state.mesh.idx);
    };
    if (mode == 2) {
      def.prepare = [k, normal = def.normal](ProblemState& s) {
        const double al = s.pars[3];
        for (int j : s.mesh.idx) {
          const double phi = std::atan2(s.mesh.X(j, 1), s.mesh.X(j, 0));
          s.mesh.X.row(j) = bdcurve_gamma(phi, al, k).transpose();
        }
        s.N0 = normal.eval(s.mesh);
      };
    }
  }

  SurfaceMesh disk = disk_mesh(nrings);
  Vec pars(4);
  pars << 0.0, 0.0, area(disk), 0.0;
  std::vector<int> ilam = (mode == 0) ? std::vector<int>{0} : std::vector<int>{3};
  su.state = fresh_state(def, std::move(disk), pars, ilam);
  return su;
}

// ---------------------------------------------------------------------------
// Enneper

Eigen::Vector3d enneper_point(double r, double theta) {
  return {r * std::cos(theta) - r * r * r / 3.0 * std::cos(3 * theta),
          -r * std::sin(theta) - r * r * r / 3.0 * std::sin(3 * theta),
          r * r * std::cos(2 * theta)};
}

Eigen::Vector3d enneper_gamma(double theta, double alpha) { return enneper_point(alpha, theta); }

ProblemSetup enneper_problem(double alpha0, int nrings) {
  ProblemSetup su;
  ProblemDef& def = su.def;
  def.name = "enneper";
  def.par_names = {"H", "V", "A", "alpha"};
  def.normal.orientation = 1.0;
  def.stab_sign = -1.0;
  def.residual = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    Vec G = cmc_pde(ctx, state.pars[0]);  // H0 = 0 throughout
    for (int j : state.mesh.idx) G[j] = ctx.u1_full[j];
    return G;
  };
  def.jacobian = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    return cmc_jac(ctx, state.pars[0], state.mesh.idx);
  };
  def.prepare = [normal = def.normal](ProblemState& s) {
    const double al = s.pars[3];
    const Vec& c = s.fields.at("costh");
    const Vec& sn = s.fields.at("sinth");
    for (int j : s.mesh.idx) {
      const double th = std::atan2(sn[j], c[j]);
      s.mesh.X.row(j) = enneper_gamma(th, al).transpose();
    }
    s.N0 = normal.eval(s.mesh);
  };

  SurfaceMesh disk = disk_mesh(nrings, alpha0);
  SurfaceMesh mesh = disk;
  for (int i = 0; i < mesh.np(); ++i) {
    const double r = std::hypot(disk.X(i, 0), disk.X(i, 1));
    const double th = std::atan2(disk.X(i, 1), disk.X(i, 0));
    mesh.X.row(i) = enneper_point(r, th).transpose();
  }
  Vec pars(4);
  pars << 0.0, 0.0, area(mesh), alpha0;
  su.state = fresh_state(def, std::move(mesh), pars, {3});
  Vec costh = Vec::Zero(su.state.mesh.np()), sinth = Vec::Zero(su.state.mesh.np());
  for (int j : su.state.mesh.idx) {
    const double th = std::atan2(disk.X(j, 1), disk.X(j, 0));
    costh[j] = std::cos(th);
    sinth[j] = std::sin(th);
  }
  su.state.fields["costh"] = costh;
  su.state.fields["sinth"] = sinth;
  return su;
}

// ---------------------------------------------------------------------------
// nodoids

double NodoidParams::buckle_radius() const {
  return (1.0 + std::sqrt(1.0 + a)) / (2 * std::abs(H));
}
double NodoidParams::neck_radius() const {
  return (std::sqrt(1.0 + a) - 1.0) / (2 * std::abs(H));
}

Eigen::Vector2d nodoid_profile_point(const NodoidParams& p, double t) {
  auto sq = [&](double tau) { return std::sqrt(std::cos(tau) * std::cos(tau) + p.a); };
  const double x = (std::cos(t) + sq(t)) / (2 * std::abs(p.H));
  auto integrand = [&](double tau) {
    const double s = sq(tau);
    return (std::cos(tau) + s) / s * std::cos(tau);
  };
  const double sgn = t < 0 ? -1.0 : 1.0;
  const double z = sgn * adsimp(integrand, 0.0, std::abs(t)) / (2 * std::abs(p.H));
  return {x, z};
}

SurfaceMesh nodoid_mesh(const NodoidParams& p, int nax, int nphi, NodoidVariant variant,
                        bool chebyshev) {
  std::vector<double> xs(nax + 1), zs(nax + 1);
  if (variant == NodoidVariant::TrigQuadrature) {
    if (p.a <= 0) throw std::runtime_error("nodoid_mesh: trig variant needs a > 0");
    for (int i = 0; i <= nax; ++i) {
      const double s = static_cast<double>(i) / nax;
      const double t = chebyshev ? -p.t0 * std::cos(M_PI * s) : -p.t0 + 2 * p.t0 * s;
      auto xz = nodoid_profile_point(p, t);
      xs[i] = xz[0];
      zs[i] = xz[1];
    }
  } else {
    const double r = p.neck_radius(), R = p.buckle_radius();
    if (!(R > r && r > 0))
      throw std::runtime_error("nodoid_mesh: elliptic variant needs R > r > 0");
    const double k = std::sqrt((R * R - r * r) / (R * R));
    for (int i = 0; i <= nax; ++i) {
      const double s = static_cast<double>(i) / nax;
      const double x = chebyshev ? -(M_PI / 2) * std::cos(M_PI * s) : -M_PI / 2 + M_PI * s;
      const double del = std::sqrt(1.0 - k * k * std::sin(x) * std::sin(x));
      xs[i] = r / del;
      zs[i] = R * ellip_e(x, k) - r * ellip_f(x, k) -
              R * k * k * std::sin(x) * std::cos(x) / del;
    }
  }

  SurfaceMesh m;
  m.X.resize((nax + 1) * nphi, 3);
  auto vid = [&](int i, int j) { return i * nphi + (j % nphi); };
  for (int i = 0; i <= nax; ++i)
    for (int j = 0; j < nphi; ++j) {
      const double th = -M_PI + 2 * M_PI * j / nphi;
      m.X.row(vid(i, j)) << xs[i] * std::cos(th), xs[i] * std::sin(th), zs[i];
    }
  std::vector<std::array<int, 3>> tris;
  for (int i = 0; i < nax; ++i)
    for (int j = 0; j < nphi; ++j) {
      tris.push_back({vid(i, j), vid(i + 1, j + 1), vid(i + 1, j)});
      tris.push_back({vid(i, j), vid(i, j + 1), vid(i + 1, j + 1)});
    }
  m.tri.resize(tris.size(), 3);
  for (size_t t = 0; t < tris.size(); ++t) m.tri.row(t) << tris[t][0], tris[t][1], tris[t][2];
  for (int j = 0; j < nphi; ++j) {
    m.dbc_edges.push_back({vid(0, j), vid(0, j + 1)});
    m.dbc_edges.push_back({vid(nax, j), vid(nax, j + 1)});
  }
  m.rebuild_boundary_vertex_lists();
  return m;
}

namespace {

// integrate h(tau) with a 1/sqrt(cos^2 tau + a) endpoint spike; for a < 0 the
// square root vanishes at tau* = acos(sqrt(-a)) just past t0, and the
// substitution tau = tau* - w^2 makes the integrand smooth
double nodoid_integral(const std::function<double(double)>& h, double a, double t0) {
  if (a >= -1e-12 || t0 <= 0) return adsimp(h, 0.0, t0);
  const double tstar = std::acos(std::sqrt(std::min(-a, 1.0)));
  if (!(tstar > t0)) return adsimp(h, 0.0, t0);
  const double w0 = std::sqrt(tstar - t0), w1 = std::sqrt(tstar);
  return adsimp([&](double w) { return 2.0 * w * h(tstar - w * w); }, w0, w1);
}

double nodoid_I(double a, double t0) {
  return nodoid_integral(
      [a](double tau) {
        const double c = std::cos(tau);
        return c * c / std::sqrt(std::max(c * c + a, 1e-300));
      },
      a, t0);
}

// boundary relation for circles of radius rstar a full height apart
double nodoid_rel(double a, double t0, double rstar, double height) {
  const double c = std::cos(t0);
  const double s = std::sqrt(c * c + a);
  return height / (2 * rstar) * (c + s) - (std::sin(t0) + nodoid_I(a, t0));
}

}  // namespace

std::vector<NodoidTableRow> nodoid_boundary_solve(double rstar, double height, double t0_min,
                                                  double t0_max, int n) {
  std::vector<NodoidTableRow> table;
  table.reserve(n);
  double a_prev = std::numeric_limits<double>::quiet_NaN();
  for (int i = 0; i < n; ++i) {
    const double f = static_cast<double>(i) / (n - 1);
    const double t0 = t0_min * std::pow(t0_max / t0_min, f);  // resolve the cylinder end
    NodoidTableRow row;
    row.t0 = t0;
    const double c = std::cos(t0);
    const double a_min = (t0 < M_PI / 2) ? -c * c * (1.0 - 1e-12) + 1e-14 : 1e-12;
    auto g = [&](double a) { return nodoid_rel(a, t0, rstar, height); };
    // warm-started bracket: continue the root from the previous grid point
    double a_lo = a_min, a_hi = 2.0;
    if (std::isfinite(a_prev)) {
      a_lo = std::max(a_min, a_prev - 0.2 * (1 + std::abs(a_prev)));
      a_hi = a_prev + 0.2 * (1 + std::abs(a_prev));
    }
    double glo = g(a_lo), ghi = g(a_hi);
    int guard = 0;
    while (glo * ghi > 0 && guard++ < 60) {
      a_lo = std::max(a_min, a_lo - 0.5 * (a_hi - a_lo));
      a_hi += 0.5 * (a_hi - a_lo);
      glo = g(a_lo);
      ghi = g(a_hi);
    }
    if (glo * ghi > 0) {
      table.push_back(row);
      continue;
    }
    for (int it = 0; it < 160; ++it) {
      // alternate secant and bisection so the bracket provably shrinks
      double mid = a_hi - ghi * (a_hi - a_lo) / (ghi - glo);
      if ((it & 1) || !(mid > a_lo && mid < a_hi)) mid = 0.5 * (a_lo + a_hi);
      const double gm = g(mid);
      if (gm * glo <= 0) {
        a_hi = mid;
        ghi = gm;
      } else {
        a_lo = mid;
        glo = gm;
      }
      if (a_hi - a_lo < 1e-14 * (1 + std::abs(a_hi))) break;
    }
    row.a = 0.5 * (a_lo + a_hi);
    a_prev = row.a;
    row.residual = g(row.a);
    const double s = std::sqrt(c * c + row.a);
    row.H = (c + s) / (2 * rstar);
    row.A = (M_PI / (row.H * row.H)) *
            nodoid_integral(
                [&](double tau) {
                  const double ct = std::cos(tau);
                  const double st = std::sqrt(std::max(ct * ct + row.a, 1e-300));
                  return (ct + st) * (ct + st) / st;
                },
                row.a, t0);
    row.ok = true;
    table.push_back(row);
  }
  return table;
}

ProblemSetup nodoid_dbc_problem(double rstar, double l, int nax, int nphi) {
  ProblemSetup su;
  ProblemDef& def = su.def;
  def.name = "noddbc";
  def.par_names = {"H", "V", "A", "s_rot"};
  def.normal.orientation = -1.0;  // inner normal: H = 1/(2 rstar) on the cylinder
  def.volume_caps = true;
  def.stab_sign = -1.0;
  Constraint ca;
  ca.kind = ConstraintKind::Area;
  ca.target_slot = 2;
  def.constraints = {ca};
  def.residual = [](const ProblemDef& prob, const ProblemState& state, const EvalContext& ctx) {
    Vec G = cmc_pde(ctx, state.pars[0]);
    G += pc_terms(prob, state, ctx);
    for (int j : state.mesh.idx) G[j] = ctx.u1_full[j];
    return G;
  };
  def.jacobian = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    return cmc_jac(ctx, state.pars[0], state.mesh.idx);
  };

  SurfaceMesh cyl = cylinder_mesh(rstar, -l, l, nax, nphi);
  Vec pars(4);
  pars << 1.0 / (2 * rstar), tet_volume(cyl) + boundary_cap_volume(cyl), area(cyl), 0.0;
  su.state = fresh_state(def, std::move(cyl), pars, {2, 0});
  return su;
}

ProblemSetup nodoid_pbc_problem(double H0, double a0, int nax, int nphi) {
  ProblemSetup su;
  ProblemDef& def = su.def;
  def.name = "nodpbc";
  def.par_names = {"H", "delta", "s_x", "s_y", "s_z", "s_rot"};
  def.normal.orientation = -1.0;
  def.normal.corrections = [](const SurfaceMesh& m) {
    std::vector<int> verts = m.idx;
    verts.insert(verts.end(), m.idN.begin(), m.idN.end());
    return std::vector<NormalCorrection>{{verts, 2}};  // horizontal seam normals
  };
  def.stab_sign = -1.0;
  for (int axis = 0; axis < 3; ++axis) {
    Constraint c;
    c.kind = ConstraintKind::TranslationalPC;
    c.axis = axis;
    c.multiplier_slot = 2 + axis;
    def.constraints.push_back(c);
  }
  def.residual = [](const ProblemDef& prob, const ProblemState& state, const EvalContext& ctx) {
    Vec G = cmc_pde(ctx, state.pars[0]);
    G += pc_terms(prob, state, ctx);
    return G;  // periodic seam, no Dirichlet rows
  };
  def.jacobian = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    return cmc_jac(ctx, state.pars[0], {});
  };
  def.prepare = [normal = def.normal](ProblemState& s) {
    const double want = s.pars[1];
    Vec& ref = s.fields.at("delta_ref");
    if (std::abs(want / ref[0] - 1.0) > 1e-15) {
      s.mesh.X.col(2) *= want / ref[0];
      ref[0] = want;
      s.N0 = normal.eval(s.mesh);
    }
  };
  def.periodic_shift = [](const ProblemState& s) { return Eigen::Vector3d(0, 0, s.pars[1]); };

  NodoidParams np{a0, H0, M_PI};
  SurfaceMesh mesh = nodoid_mesh(np, nax, nphi);
  // the axial period is the seam-to-seam height 2 z(pi); the bulge of a
  // self-intersecting cell reaches beyond it
  const double delta0 = 2.0 * nodoid_profile_point(np, M_PI)[1];
  Vec pars(6);
  pars << H0, delta0, 0, 0, 0, 0;
  su.state = fresh_state(def, std::move(mesh), pars, {1, 2, 3, 4});
  su.state.fields["delta_ref"] = Vec::Constant(1, delta0);
  su.state.periodic = build_periodic_maps(su.state.mesh, Eigen::Vector3d(0, 0, delta0),
                                          1e-8 * bbox_diagonal(su.state.mesh));
  su.state.u = Vec::Zero(su.state.np_red());
  return su;
}

// ---------------------------------------------------------------------------
// Helfrich cylinders

ProblemSetup helfrich_cylinder_problem(const HelfrichParams& hp, int nax, int nphi) {
  ProblemSetup su;
  ProblemDef& def = su.def;
  def.name = "helfrich";
  def.nfields = 2;
  def.par_names = {"c0", "lam1", "alpha", "s_rot"};
  def.normal.orientation = -1.0;  // inner normal: H = 1/(2 alpha) on the cylinder
  def.stab_sign = 1.0;
  def.mass_on_field2 = false;
  def.wants_ref = true;
  def.ref_grads = true;  // clamped rows use the step-frozen axial derivative
  def.residual = [](const ProblemDef& prob, const ProblemState& state, const EvalContext& ctx) {
    const int np = ctx.mesh_n.np();
    const double c0 = state.pars[0], lam1 = state.pars[1], al = state.pars[2];
    const Vec& u2 = ctx.u2_full;
    Vec r(2 * np);
    Vec Lu2 = ctx.ops.L * u2;
    Eigen::MatrixX3d LX = ctx.ops.L * ctx.mesh_n.X;
    Vec Hweak = -(LX.array() * ctx.N0.array()).rowwise().sum() / 2.0;
    for (int i = 0; i < np; ++i) {
      const double K = ctx.ops.K[i];
      const double f = 2 * u2[i] * (u2[i] * u2[i] - K) - 2 * lam1 * u2[i] + 2 * c0 * K -
                       2 * c0 * c0 * u2[i];
      r[i] = -Lu2[i] + ctx.ops.mass[i] * f;
      r[np + i] = ctx.ops.mass[i] * u2[i] - Hweak[i];
    }
    r.head(np) += pc_terms(prob, state, ctx);
    Vec rho2(np);
    for (int i = 0; i < np; ++i)
      rho2[i] =
          ctx.mesh_n.X(i, 1) * ctx.mesh_n.X(i, 1) + ctx.mesh_n.X(i, 2) * ctx.mesh_n.X(i, 2);
    Vec slope = ctx.ops_ref.grad[0] * rho2;
    for (int j : state.mesh.idx) {
      r[j] = rho2[j] - al * al;  // boundary circle of radius alpha
      r[np + j] = slope[j];      // clamped: vanishing axial slope
    }
    return r;
  };
  def.jacobian = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    const int np = ctx.mesh_n.np();
    const double c0 = state.pars[0], lam1 = state.pars[1];
    const Vec& u2 = ctx.u2_full;
    SpMat dm = mass_gradient_normal(ctx.mesh_n, ctx.N0);
    SpMat dKw = angle_deficit_gradient_normal(ctx.mesh_n, ctx.N0);
    SpMat dLu2 = stiffness_action_gradient_normal(ctx.mesh_n, u2, ctx.N0);
    SpMat hessA = area_hessian_normal(ctx.mesh_n, ctx.N0);
    std::vector<Eigen::Triplet<double>> trip;
    auto add_block = [&](int roff, int coff, const SpMat& B, double scale,
                         const Vec* rowscale) {
      for (int k = 0; k < B.outerSize(); ++k)
        for (SpMat::InnerIterator it(B, k); it; ++it) {
          double v = scale * it.value();
          if (rowscale) v *= (*rowscale)[it.row()];
          if (v != 0) trip.emplace_back(roff + it.row(), coff + it.col(), v);
        }
    };
    // block (1,1): -dLu2 + diag(f - f_K K) dm + diag(f_K) dKweak
    Vec f(np), fK(np), fu(np);
    for (int i = 0; i < np; ++i) {
      const double K = ctx.ops.K[i];
      f[i] = 2 * u2[i] * (u2[i] * u2[i] - K) - 2 * lam1 * u2[i] + 2 * c0 * K -
             2 * c0 * c0 * u2[i];
      fK[i] = -2 * u2[i] + 2 * c0;
      fu[i] = 2 * (3 * u2[i] * u2[i] - K) - 2 * lam1 - 2 * c0 * c0;
    }
    Vec fmKK = f - (fK.array() * ctx.ops.K.array()).matrix();
    add_block(0, 0, dLu2, -1.0, nullptr);
    add_block(0, 0, dm, 1.0, &fmKK);
    add_block(0, 0, dKw, 1.0, &fK);
    // block (1,2): -L + diag(m f_u)
    add_block(0, np, ctx.ops.L, -1.0, nullptr);
    for (int i = 0; i < np; ++i)
      trip.emplace_back(i, np + i, ctx.ops.mass[i] * fu[i]);
    // block (2,1): diag(u2) dm + hessA / 2
    add_block(np, 0, dm, 1.0, &u2);
    add_block(np, 0, hessA, 0.5, nullptr);
    // block (2,2): diag(m)
    for (int i = 0; i < np; ++i) trip.emplace_back(np + i, np + i, ctx.ops.mass[i]);
    // clamped boundary rows
    std::set<int> bd(state.mesh.idx.begin(), state.mesh.idx.end());
    std::vector<Eigen::Triplet<double>> kept;
    for (const auto& tr : trip) {
      const int r = tr.row() < np ? tr.row() : tr.row() - np;
      if (!bd.count(r)) kept.push_back(tr);
    }
    Vec drho(np);
    for (int i = 0; i < np; ++i)
      drho[i] = 2 * (ctx.mesh_n.X(i, 1) * ctx.N0(i, 1) + ctx.mesh_n.X(i, 2) * ctx.N0(i, 2));
    for (int j : state.mesh.idx) kept.emplace_back(j, j, drho[j]);
    // row access to the frozen axial derivative operator
    SpMat gxT = SpMat(ctx.ops_ref.grad[0].transpose());
    for (int j : state.mesh.idx) {
      for (SpMat::InnerIterator it(gxT, j); it; ++it)
        kept.emplace_back(np + j, it.row(), it.value() * drho[it.row()]);
    }
    SpMat J(2 * np, 2 * np);
    J.setFromTriplets(kept.begin(), kept.end());
    return J;
  };
  def.energy = [](const ProblemState& state, const EvalContext& ctx) {
    const double c0 = state.pars[0], lam1 = state.pars[1];
    double e = 0;
    for (int i = 0; i < ctx.mesh_n.np(); ++i) {
      const double d = ctx.u2_full[i] - c0;
      e += ctx.ops.mass[i] * d * d;
    }
    return e + lam1 * area(ctx.mesh_n);
  };

  SurfaceMesh cyl = cylinder_mesh(hp.alpha, -1.0, 1.0, nax, nphi, 'x');
  Vec pars(4);
  pars << hp.c0, hp.lam1, hp.alpha, 0.0;
  su.state = fresh_state(def, std::move(cyl), pars, {1});
  Operators ops = build_operators(su.state.mesh, def.normal, false);
  const int np = su.state.mesh.np();
  su.state.u.segment(np, np) = ops.H;  // start the curvature field at the measured H
  return su;
}

// ---------------------------------------------------------------------------
// spheres / hemispheres

ProblemSetup sphere_problem(int level) {
  ProblemSetup su;
  ProblemDef& def = su.def;
  def.name = "sphere";
  def.par_names = {"H", "V", "A"};
  def.normal.orientation = 1.0;  // outer: H = -1 on the unit sphere
  def.stab_sign = -1.0;
  Constraint c;
  c.kind = ConstraintKind::Volume;
  c.target_slot = 1;
  def.constraints = {c};
  def.residual = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    return cmc_pde(ctx, state.pars[0]);
  };
  def.jacobian = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    return cmc_jac(ctx, state.pars[0], {});
  };

  SurfaceMesh sph = icosphere(level);
  Vec pars(3);
  pars << -1.0, tet_volume(sph), area(sph);
  su.state = fresh_state(def, std::move(sph), pars, {1, 0});
  return su;
}

ProblemSetup hemisphere_problem(int nrings) {
  ProblemSetup su;
  ProblemDef& def = su.def;
  def.name = "hemisphere";
  def.par_names = {"H", "V", "A", "s_x", "s_y"};
  def.normal.orientation = 1.0;
  def.normal.corrections = [](const SurfaceMesh& m) {
    return std::vector<NormalCorrection>{{m.idN, 2}};  // rim normals in the support plane
  };
  def.volume_caps = true;
  def.stab_sign = -1.0;
  def.wants_ref = true;
  def.ref_grads = true;
  {
    Constraint c;
    c.kind = ConstraintKind::Volume;
    c.target_slot = 1;
    c.include_caps = true;
    def.constraints.push_back(c);
  }
  for (int axis = 0; axis < 2; ++axis) {
    Constraint c;
    c.kind = ConstraintKind::NormalIntegralPC;
    c.axis = axis;
    c.multiplier_slot = 3 + axis;
    def.constraints.push_back(c);
  }
  def.residual = [](const ProblemDef& prob, const ProblemState& state, const EvalContext& ctx) {
    Vec G = cmc_pde(ctx, state.pars[0]);
    G += pc_terms(prob, state, ctx);
    // free rim on the support plane: vanishing z-derivative of x^2 + y^2
    const int np = ctx.mesh_n.np();
    Vec rho2(np);
    for (int i = 0; i < np; ++i)
      rho2[i] =
          ctx.mesh_n.X(i, 0) * ctx.mesh_n.X(i, 0) + ctx.mesh_n.X(i, 1) * ctx.mesh_n.X(i, 1);
    Vec slope = ctx.ops_ref.grad[2] * rho2;
    for (int j : state.mesh.idN) G[j] = slope[j];
    return G;
  };
  def.jacobian = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    SpMat J = cmc_jac(ctx, state.pars[0], {});
    const int np = ctx.mesh_n.np();
    Vec drho(np);
    for (int i = 0; i < np; ++i)
      drho[i] = 2 * (ctx.mesh_n.X(i, 0) * ctx.N0(i, 0) + ctx.mesh_n.X(i, 1) * ctx.N0(i, 1));
    SpMat gzT = SpMat(ctx.ops_ref.grad[2].transpose());
    std::vector<Eigen::Triplet<double>> repl;
    for (int j : state.mesh.idN)
      for (SpMat::InnerIterator it(gzT, j); it; ++it)
        repl.emplace_back(j, it.row(), it.value() * drho[it.row()]);
    return replace_rows(J, state.mesh.idN, repl);
  };

  SurfaceMesh hs = hemisphere_mesh(nrings, 0.75);
  hs.nbc_edges = hs.dbc_edges;  // the rim slides on the support plane
  hs.dbc_edges.clear();
  hs.rebuild_boundary_vertex_lists();
  Vec pars(5);
  pars << -1.0, tet_volume(hs), area(hs), 0.0, 0.0;
  su.state = fresh_state(def, std::move(hs), pars, {1, 0, 3, 4});
  return su;
}

// ---------------------------------------------------------------------------
// helpers

void enable_rotational_pc(ProblemSetup& setup, int multiplier_slot) {
  Constraint c;
  c.kind = ConstraintKind::RotationalPC;
  c.multiplier_slot = multiplier_slot;
  setup.def.constraints.push_back(c);
  setup.state.ilam.push_back(multiplier_slot);
}

int dominant_wavenumber(const SurfaceMesh& m, const Vec& field, char axis, double center,
                        double halfwidth, int mmax) {
  std::vector<int> ring;
  const int ax = axis == 'x' ? 0 : (axis == 'y' ? 1 : 2);
  for (int v = 0; v < m.np(); ++v)
    if (std::abs(m.X(v, ax) - center) <= halfwidth) ring.push_back(v);
  if (ring.empty()) return -1;
  int best = 0;
  double bestmag = -1;
  for (int mm = 0; mm <= mmax; ++mm) {
    std::complex<double> c(0, 0);
    for (int v : ring) {
      const double phi = (ax == 0) ? std::atan2(m.X(v, 2), m.X(v, 1))
                                   : std::atan2(m.X(v, 1), m.X(v, 0));
      c += field[v] * std::exp(std::complex<double>(0, -mm * phi));
    }
    const double mag = std::abs(c) * (mm == 0 ? 0.5 : 1.0);
    if (mag > bestmag) {
      bestmag = mag;
      best = mm;
    }
  }
  return best;
}

double z_parity(const SurfaceMesh& m, const Vec& mass, const Vec& field, double) {
  // overlap with even test fields, relative to the field norm
  const int np = m.np();
  std::vector<Vec> tests;
  tests.push_back(Vec::Ones(np));
  tests.push_back(m.X.col(2).array().square().matrix());
  tests.push_back((m.X.col(0).array().square() + m.X.col(1).array().square()).matrix());
  const double fn = std::sqrt((field.array().square() * mass.array()).sum());
  double worst = 0;
  for (const auto& g : tests) {
    const double gn = std::sqrt((g.array().square() * mass.array()).sum());
    const double ov = std::abs((field.array() * g.array() * mass.array()).sum());
    worst = std::max(worst, ov / (fn * gn + 1e-300));
  }
  return worst;
}

}  // namespace geomcont
