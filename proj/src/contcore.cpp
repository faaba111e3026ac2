#include "geomcont/contcore.hpp"

#include "geomcont/eigs.hpp"
#include "geomcont/remesh.hpp"

#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace geomcont {

Vec fill_field(const ProblemState& state, const Vec& reduced) {
  if (!state.periodic) return reduced;
  return state.periodic->fill * reduced;
}

Vec drop_field(const ProblemState& state, const Vec& full) {
  if (!state.periodic) return full;
  return state.periodic->drop * full;
}

namespace {

// adjoint reduction: seam rows add up, so the weak form lives on the quotient
Vec reduce_rows(const ProblemDef& prob, const ProblemState& state, const Vec& full) {
  if (!state.periodic) return full;
  const int np = state.mesh.np();
  const int nr = state.np_red();
  SpMat fillT = SpMat(state.periodic->fill.transpose());
  Vec red(prob.nfields * nr);
  for (int f = 0; f < prob.nfields; ++f)
    red.segment(f * nr, nr) = fillT * full.segment(f * np, np);
  return red;
}

Vec reduce_gradient(const ProblemState& state, const Vec& du_full) {
  if (!state.periodic) return du_full;
  return SpMat(state.periodic->fill.transpose()) * du_full;
}

}  // namespace

EvalContext make_context(const ProblemDef& prob, const ProblemState& state) {
  return make_context(prob, state, state.u);
}

EvalContext make_context(const ProblemDef& prob, const ProblemState& state, const Vec& u_red) {
  const ProblemState* base = &state;
  ProblemState scratch;
  if (prob.prepare) {
    scratch = state;
    prob.prepare(scratch);
    base = &scratch;
  }
  EvalContext ctx;
  const int nr = base->np_red();
  ctx.u1_full = fill_field(*base, u_red.head(nr));
  if (prob.nfields == 2) ctx.u2_full = fill_field(*base, u_red.segment(nr, nr));
  ctx.N0 = base->N0;
  ctx.mesh_n = base->mesh;
  for (int i = 0; i < ctx.mesh_n.np(); ++i)
    ctx.mesh_n.X.row(i) += ctx.u1_full[i] * base->N0.row(i);
  ctx.ops = build_operators(ctx.mesh_n, prob.normal, prob.needs_grad_n);
  // phase-condition rows are frozen at the reference surface of the step
  bool needs_ref = prob.wants_ref;
  for (const auto& c : prob.constraints)
    if (c.kind == ConstraintKind::RotationalPC ||
        c.kind == ConstraintKind::TranslationalPC ||
        c.kind == ConstraintKind::NormalIntegralPC)
      needs_ref = true;
  if (needs_ref) {
    ctx.mesh_ref = base->mesh;
    ctx.ops_ref = build_operators(ctx.mesh_ref, prob.normal, prob.ref_grads);
    ctx.has_ref = true;
  }
  return ctx;
}

namespace {

bool frozen_kind(const Constraint& c) {
  return c.kind == ConstraintKind::RotationalPC ||
         c.kind == ConstraintKind::TranslationalPC ||
         c.kind == ConstraintKind::NormalIntegralPC;
}

ConstraintEval eval_constraint_ctx(const ProblemDef& prob, const Constraint& c,
                                   const ProblemState& state, const EvalContext& ctx) {
  const bool ref = frozen_kind(c) && ctx.has_ref;
  return eval_constraint(c, ref ? ctx.mesh_ref : ctx.mesh_n, ref ? ctx.ops_ref : ctx.ops,
                         ctx.N0, ctx.u1_full, state.pars, prob.normal);
}

}  // namespace

Vec pc_terms(const ProblemDef& prob, const ProblemState& state, const EvalContext& ctx) {
  Vec f = Vec::Zero(ctx.mesh_n.np());
  for (const auto& c : prob.constraints) {
    if (c.multiplier_slot < 0) continue;
    const bool ref = frozen_kind(c) && ctx.has_ref;
    f += state.pars[c.multiplier_slot] *
         pc_field(c, ref ? ctx.mesh_ref : ctx.mesh_n, ref ? ctx.ops_ref : ctx.ops);
  }
  return f;
}

namespace {

Vec constraint_values(const ProblemDef& prob, const ProblemState& state,
                      const EvalContext& ctx) {
  const int nq = static_cast<int>(prob.constraints.size());
  Vec q(nq);
  for (int k = 0; k < nq; ++k) q[k] = eval_constraint_ctx(prob, prob.constraints[k], state, ctx).value;
  return q;
}

}  // namespace

Vec assemble_residual(const ProblemDef& prob, const ProblemState& state,
                      const EvalContext& ctx) {
  Vec Gred = reduce_rows(prob, state, prob.residual(prob, state, ctx));
  Vec q = constraint_values(prob, state, ctx);
  Vec F(Gred.size() + q.size());
  F << Gred, q;
  return F;
}

// ---------------------------------------------------------------------------
// colored finite-difference Jacobian

namespace {

std::vector<int> d2_coloring(const ProblemState& state, int& ncolors) {
  const SurfaceMesh& m = state.mesh;
  const int nr = state.np_red();
  auto rid = [&](int v) { return state.periodic ? state.periodic->full2red[v] : v; };
  std::vector<std::set<int>> adj(nr);
  for (int t = 0; t < m.nt(); ++t)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) adj[rid(m.tri(t, a))].insert(rid(m.tri(t, b)));

  // distance-2 neighborhoods
  std::vector<std::set<int>> adj2(nr);
  for (int v = 0; v < nr; ++v) {
    for (int n1 : adj[v]) {
      if (n1 != v) adj2[v].insert(n1);
      for (int n2 : adj[n1])
        if (n2 != v) adj2[v].insert(n2);
    }
  }
  // DSATUR keeps the color count near the clique bound of max valence + 1
  std::vector<int> color(nr, -1);
  std::vector<std::set<int>> satur(nr);
  std::vector<int> deg(nr);
  for (int v = 0; v < nr; ++v) deg[v] = static_cast<int>(adj2[v].size());
  ncolors = 0;
  for (int it = 0; it < nr; ++it) {
    int best = -1;
    for (int v = 0; v < nr; ++v) {
      if (color[v] >= 0) continue;
      if (best < 0 || satur[v].size() > satur[best].size() ||
          (satur[v].size() == satur[best].size() && deg[v] > deg[best]))
        best = v;
    }
    int c = 0;
    while (satur[best].count(c)) ++c;
    color[best] = c;
    ncolors = std::max(ncolors, c + 1);
    for (int w : adj2[best]) satur[w].insert(c);
  }
  return color;
}

}  // namespace

int fd_jacobian_colors(const ProblemDef& prob, const ProblemState& state) {
  (void)prob;
  int nc = 0;
  d2_coloring(state, nc);
  return nc;
}

SpMat fd_jacobian(const ProblemDef& prob, const ProblemState& state) {
  const int nr = state.np_red();
  const int nu = prob.nfields * nr;
  const SurfaceMesh& m = state.mesh;
  auto rid = [&](int v) { return state.periodic ? state.periodic->full2red[v] : v; };

  std::vector<std::set<int>> adj(nr);
  for (int t = 0; t < m.nt(); ++t)
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) adj[rid(m.tri(t, a))].insert(rid(m.tri(t, b)));

  int ncolors = 0;
  std::vector<int> color = d2_coloring(state, ncolors);

  EvalContext ctx0 = make_context(prob, state);
  Vec G0 = reduce_rows(prob, state, prob.residual(prob, state, ctx0));

  std::vector<Eigen::Triplet<double>> trip;
  for (int f = 0; f < prob.nfields; ++f) {
    for (int c = 0; c < ncolors; ++c) {
      Vec u = state.u;
      Vec step = Vec::Zero(nr);
      bool any = false;
      for (int j = 0; j < nr; ++j) {
        if (color[j] != c) continue;
        step[j] = 1e-6 * (1.0 + std::abs(u[f * nr + j]));
        u[f * nr + j] += step[j];
        any = true;
      }
      if (!any) continue;
      EvalContext ctx = make_context(prob, state, u);
      Vec G = reduce_rows(prob, state, prob.residual(prob, state, ctx));
      for (int j = 0; j < nr; ++j) {
        if (color[j] != c) continue;
        for (int r : adj[j]) {
          for (int g = 0; g < prob.nfields; ++g) {
            const double v = (G[g * nr + r] - G0[g * nr + r]) / step[j];
            if (v != 0.0) trip.emplace_back(g * nr + r, f * nr + j, v);
          }
        }
      }
    }
  }
  SpMat J(nu, nu);
  J.setFromTriplets(trip.begin(), trip.end());
  return J;
}

double jaccheck(const ProblemDef& prob, const ProblemState& state) {
  if (!prob.jacobian) return -1.0;
  EvalContext ctx = make_context(prob, state);
  SpMat Ja = prob.jacobian(prob, state, ctx);
  if (state.periodic) {
    // compare on the full space; fd_jacobian works on the reduced one
    const int nr = state.np_red();
    SpMat fill = state.periodic->fill;
    SpMat fillT = SpMat(fill.transpose());
    SpMat red(prob.nfields * nr, prob.nfields * nr);
    std::vector<Eigen::Triplet<double>> trip;
    const int np = state.mesh.np();
    for (int fa = 0; fa < prob.nfields; ++fa)
      for (int fb = 0; fb < prob.nfields; ++fb) {
        SpMat block = SpMat(fillT * SpMat(Ja.block(fa * np, fb * np, np, np)) * fill);
        for (int k = 0; k < block.outerSize(); ++k)
          for (SpMat::InnerIterator it(block, k); it; ++it)
            trip.emplace_back(fa * nr + it.row(), fb * nr + it.col(), it.value());
      }
    red.setFromTriplets(trip.begin(), trip.end());
    Ja = red;
  }
  SpMat Jn = fd_jacobian(prob, state);
  const double nn = Jn.norm();
  return nn > 0 ? (Ja - Jn).norm() / nn : 0.0;
}

double qjaccheck(const ProblemDef& prob, const ProblemState& state, int k) {
  if (k < 0 || k >= static_cast<int>(prob.constraints.size())) return -1.0;
  EvalContext ctx = make_context(prob, state);
  auto ev = eval_constraint_ctx(prob, prob.constraints[k], state, ctx);
  Vec du_red = reduce_gradient(state, ev.du);
  // deterministic direction
  const int nr = state.np_red();
  Vec phi(nr);
  std::uint64_t s = 0x9e3779b97f4a7c15ull;
  for (int i = 0; i < nr; ++i) {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    phi[i] = static_cast<double>((s >> 11) & 0xfffffffffffull) / double(1ull << 44) - 0.5;
  }
  const double eps = 1e-6;
  Vec up = state.u;
  up.head(nr) += eps * phi;
  Vec um = state.u;
  um.head(nr) -= eps * phi;
  EvalContext cp = make_context(prob, state, up);
  EvalContext cm = make_context(prob, state, um);
  // constraint value as a function of u with everything else fixed
  auto val = [&](const EvalContext& c) {
    return eval_constraint_ctx(prob, prob.constraints[k], state, c).value;
  };
  const double fd = (val(cp) - val(cm)) / (2 * eps);
  const double an = du_red.dot(phi);
  const double scale = std::max({std::abs(fd), std::abs(an), 1e-12});
  return std::abs(fd - an) / scale;
}

// ---------------------------------------------------------------------------
// extended Jacobian

ExtendedJacobian assemble_jacobian(const ProblemDef& prob, const ProblemState& state,
                                   const EvalContext& ctx) {
  const int nr = state.np_red();
  const int nu = prob.nfields * nr;
  const int nq = static_cast<int>(prob.constraints.size());
  const int na = static_cast<int>(state.ilam.size());

  SpMat Ju_u;
  if (prob.jacobian) {
    SpMat Jfull = prob.jacobian(prob, state, ctx);
    if (state.periodic) {
      const int np = state.mesh.np();
      SpMat fill = state.periodic->fill;
      SpMat fillT = SpMat(fill.transpose());
      std::vector<Eigen::Triplet<double>> trip;
      for (int fa = 0; fa < prob.nfields; ++fa)
        for (int fb = 0; fb < prob.nfields; ++fb) {
          SpMat block = Jfull.block(fa * np, fb * np, np, np);
          SpMat red = fillT * block * fill;
          for (int k = 0; k < red.outerSize(); ++k)
            for (SpMat::InnerIterator it(red, k); it; ++it)
              trip.emplace_back(fa * nr + it.row(), fb * nr + it.col(), it.value());
        }
      Ju_u.resize(nu, nu);
      Ju_u.setFromTriplets(trip.begin(), trip.end());
    } else {
      Ju_u = Jfull;
    }
  } else {
    Ju_u = fd_jacobian(prob, state);
  }

  Eigen::MatrixXd qu = Eigen::MatrixXd::Zero(nq, nu);
  Eigen::MatrixXd qp = Eigen::MatrixXd::Zero(nq, state.pars.size());
  for (int k = 0; k < nq; ++k) {
    auto ev = eval_constraint_ctx(prob, prob.constraints[k], state, ctx);
    Vec du_red = reduce_gradient(state, ev.du);
    qu.row(k).head(nr) = du_red.transpose();
    qp.row(k) = ev.dpars.transpose();
  }

  ExtendedJacobian ej;
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (int k = 0; k < Ju_u.outerSize(); ++k)
      for (SpMat::InnerIterator it(Ju_u, k); it; ++it)
        trip.emplace_back(it.row(), it.col(), it.value());
    for (int k = 0; k < nq; ++k)
      for (int j = 0; j < nu; ++j)
        if (qu(k, j) != 0) trip.emplace_back(nu + k, j, qu(k, j));
    ej.Ju.resize(nu + nq, nu);
    ej.Ju.setFromTriplets(trip.begin(), trip.end());
  }

  ej.Jp.resize(nu + nq, na);
  for (int a = 0; a < na; ++a) {
    const int slot = state.ilam[a];
    const double delta = 1e-6 * (1.0 + std::abs(state.pars[slot]));
    ProblemState sp = state;
    sp.pars[slot] += delta;
    Vec Fp = assemble_residual(prob, sp, make_context(prob, sp));
    ProblemState sm = state;
    sm.pars[slot] -= delta;
    Vec Fm = assemble_residual(prob, sm, make_context(prob, sm));
    ej.Jp.col(a) = (Fp - Fm) / (2 * delta);
  }
  return ej;
}

// ---------------------------------------------------------------------------
// linear algebra helpers

namespace {

Vec solve_sparse(const SpMat& A, const Vec& rhs, bool* ok = nullptr) {
  Eigen::SparseLU<SpMat> lu;
  lu.analyzePattern(A);
  lu.factorize(A);
  if (lu.info() != Eigen::Success) {
    if (ok) *ok = false;
    return Vec::Zero(rhs.size());
  }
  if (ok) *ok = true;
  return lu.solve(rhs);
}

SpMat compose_square(const SpMat& Ju, const Eigen::MatrixXd& Jp,
                     const std::vector<int>& par_cols, const Vec* arc_u = nullptr,
                     const Vec* arc_p = nullptr) {
  const int nrow = static_cast<int>(Ju.rows()) + (arc_u ? 1 : 0);
  const int nu = static_cast<int>(Ju.cols());
  const int ncol = nu + static_cast<int>(par_cols.size());
  std::vector<Eigen::Triplet<double>> trip;
  for (int k = 0; k < Ju.outerSize(); ++k)
    for (SpMat::InnerIterator it(Ju, k); it; ++it)
      trip.emplace_back(it.row(), it.col(), it.value());
  for (size_t c = 0; c < par_cols.size(); ++c)
    for (int r = 0; r < Ju.rows(); ++r) {
      const double v = Jp(r, par_cols[c]);
      if (v != 0) trip.emplace_back(r, nu + static_cast<int>(c), v);
    }
  if (arc_u) {
    for (int j = 0; j < nu; ++j)
      if ((*arc_u)[j] != 0) trip.emplace_back(nrow - 1, j, (*arc_u)[j]);
    for (size_t c = 0; c < par_cols.size(); ++c)
      if ((*arc_p)[c] != 0) trip.emplace_back(nrow - 1, nu + static_cast<int>(c), (*arc_p)[c]);
  }
  SpMat A(nrow, ncol);
  A.setFromTriplets(trip.begin(), trip.end());
  return A;
}

double xi_weight(const ContSettings& settings, const ProblemState& state) {
  if (settings.xi > 0) return settings.xi;
  return 1.0 / std::max(1, state.np_red());
}

struct TangentFrame {
  Vec tu, tp;
};

TangentFrame unpack_tangent(const Vec& t, int nu, int na) {
  return {t.head(nu), t.tail(na)};
}

double xi_dot(double xi, const TangentFrame& a, const TangentFrame& b) {
  return xi * a.tu.dot(b.tu) + a.tp.dot(b.tp);
}

}  // namespace

NewtonReport newton_correct(const ProblemDef& prob, ProblemState& state,
                            const ContSettings& settings) {
  NewtonReport rep;
  const int nr = state.np_red();
  const int nu = prob.nfields * nr;
  const int na = static_cast<int>(state.ilam.size());
  std::vector<int> sec;
  for (int i = 1; i < na; ++i) sec.push_back(i);

  Vec acc_u1;  // xcont_mode 2 bookkeeping
  if (state.xcont_mode == 2) acc_u1 = Vec::Zero(state.mesh.np());

  for (int it = 0; it < settings.maxit; ++it) {
    EvalContext ctx = make_context(prob, state);
    Vec F = assemble_residual(prob, state, ctx);
    rep.resnorm = F.size() ? F.cwiseAbs().maxCoeff() : 0.0;
    if (rep.resnorm <= settings.tol) {
      rep.converged = true;
      rep.iterations = it;
      return rep;
    }
    auto ej = assemble_jacobian(prob, state, ctx);
    SpMat A = compose_square(ej.Ju, ej.Jp, sec);
    bool ok = false;
    Vec d = solve_sparse(A, -F, &ok);
    if (!ok) {
      rep.converged = false;
      rep.iterations = it;
      return rep;
    }
    double best = -1;
    Vec bu, bp;
    for (double lam : {1.0, 0.5, 0.25}) {
      ProblemState trial = state;
      trial.u += lam * d.head(nu);
      for (size_t k = 0; k < sec.size(); ++k)
        trial.pars[state.ilam[sec[k]]] += lam * d[nu + static_cast<int>(k)];
      Vec Ft = assemble_residual(prob, trial, make_context(prob, trial));
      const double nt = Ft.cwiseAbs().maxCoeff();
      if (best < 0 || nt < best) {
        best = nt;
        bu = trial.u;
        bp = trial.pars;
      }
      if (nt < rep.resnorm) break;
    }
    state.u = bu;
    state.pars = bp;
    if (state.xcont_mode == 2) {
      if (prob.prepare) prob.prepare(state);
      Vec u1 = fill_field(state, state.u.head(nr));
      acc_u1 += u1;
      if (prob.update)
        prob.update(state, u1);
      else {
        for (int i = 0; i < state.mesh.np(); ++i)
          state.mesh.X.row(i) += u1[i] * state.N0.row(i);
        state.N0 = prob.normal.eval(state.mesh);
      }
      state.u.head(nr).setZero();
      state.up = acc_u1;
    }
    rep.iterations = it + 1;
  }
  Vec F = assemble_residual(prob, state, make_context(prob, state));
  rep.resnorm = F.cwiseAbs().maxCoeff();
  rep.converged = rep.resnorm <= settings.tol;
  return rep;
}

// ---------------------------------------------------------------------------
// stability

namespace {

SpMat stability_matrix(const ProblemDef& prob, const ProblemState& state,
                       const EvalContext& ctx, Vec& bigmass) {
  const int nr = state.np_red();
  const int nu = prob.nfields * nr;
  const int nq = static_cast<int>(prob.constraints.size());
  auto ej = assemble_jacobian(prob, state, ctx);
  std::vector<int> sec;
  for (size_t i = 1; i < state.ilam.size(); ++i) sec.push_back(static_cast<int>(i));
  SpMat A = compose_square(ej.Ju, ej.Jp, sec);
  A = prob.stab_sign * A;
  Vec massred = state.periodic
                    ? Vec(SpMat(state.periodic->fill.transpose()) * ctx.ops.mass)
                    : ctx.ops.mass;
  bigmass = Vec::Zero(nu + nq);
  bigmass.head(nr) = massred;
  if (prob.nfields == 2 && prob.mass_on_field2) bigmass.segment(nr, nr) = massred;
  return A;
}

double auto_shift(const ContSettings& settings, const EvalContext& ctx) {
  if (settings.eig_shift != 0.0) return settings.eig_shift;
  double scale = 0;
  for (int i = 0; i < ctx.ops.H.size(); ++i)
    scale = std::max(scale, 4 * ctx.ops.H[i] * ctx.ops.H[i] - 2 * ctx.ops.K[i]);
  return -std::max(0.6 * scale, 0.15);
}

}  // namespace

int stability_index(const ProblemDef& prob, const ProblemState& state,
                    const ContSettings& settings) {
  EvalContext ctx = make_context(prob, state);
  Vec bigmass;
  SpMat A = stability_matrix(prob, state, ctx, bigmass);
  auto eg = pencil_eigs(A, bigmass, auto_shift(settings, ctx), settings.neig);
  if (eg.values.empty()) return -1;
  return count_negative(eg, settings.eig_zero_tol);
}

namespace {

// real part of the pencil eigenvalue nearest zero, for secant localization
double critical_mu(const ProblemDef& prob, const ProblemState& state,
                   const ContSettings& settings) {
  EvalContext ctx = make_context(prob, state);
  Vec bigmass;
  SpMat A = stability_matrix(prob, state, ctx, bigmass);
  auto eg = pencil_eigs(A, bigmass, -1e-6, std::min(settings.neig, 12));
  double best = 1e30;
  for (const auto& mu : eg.values)
    if (std::abs(mu.real()) < std::abs(best)) best = mu.real();
  return best;
}

}  // namespace

// ---------------------------------------------------------------------------
// records

namespace {

BranchRecord make_record(const ProblemDef& prob, const ProblemState& state, int count,
                         int type, int ineg) {
  BranchRecord r;
  r.count = count;
  r.type = type;
  r.ineg = ineg;
  r.lam = state.pars[state.ilam[0]];
  r.pars = state.pars;
  EvalContext ctx = make_context(prob, state);
  r.A = area(ctx.mesh_n);
  // capped problems report the physical volume of the closed-up surface,
  // which is also what the volume constraint measures
  r.V = prob.volume_caps ? tet_volume(ctx.mesh_n) + boundary_cap_volume(ctx.mesh_n)
                         : volume(ctx.mesh_n, ctx.ops.N, ctx.ops.mass);
  r.E = prob.energy ? prob.energy(state, ctx) : r.A + state.pars[0] * r.V;
  if (prob.error) r.err = prob.error(state, ctx);
  auto q = mesh_quality(ctx.mesh_n);
  r.delta_mesh = q.delta_mesh;
  r.a_max = q.a_max;
  r.a_min = q.a_min;
  r.h_max = q.h_max;
  r.h_min = q.h_min;
  return r;
}

}  // namespace

std::vector<double> BranchRecord::flat() const {
  std::vector<double> v{static_cast<double>(count), static_cast<double>(type),
                        static_cast<double>(ineg), lam, err, l2};
  for (int i = 0; i < pars.size(); ++i) v.push_back(pars[i]);
  v.push_back(V);
  v.push_back(A);
  v.push_back(E);
  v.push_back(delta_mesh);
  v.push_back(a_max);
  v.push_back(a_min);
  v.push_back(h_max);
  v.push_back(h_min);
  return v;
}

void write_branch_csv(const std::string& path, const std::vector<BranchRecord>& records,
                      const std::vector<std::string>& par_names) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("write_branch_csv: cannot open " + path);
  out << "count,type,ineg,lam,err,l2";
  for (const auto& n : par_names) out << "," << n;
  out << ",V,A,E,delta_mesh,a_max,a_min,h_max,h_min\n";
  out.precision(15);
  for (const auto& r : records) {
    auto v = r.flat();
    for (size_t i = 0; i < v.size(); ++i) out << (i ? "," : "") << v[i];
    out << "\n";
  }
}

// ---------------------------------------------------------------------------
// continuation driver

namespace {

void default_update(const ProblemDef& prob, ProblemState& state) {
  if (prob.prepare) prob.prepare(state);  // sync the reference to the final parameters
  const int nr = state.np_red();
  Vec u1 = fill_field(state, state.u.head(nr));
  if (prob.update) {
    prob.update(state, u1);
  } else {
    for (int i = 0; i < state.mesh.np(); ++i) state.mesh.X.row(i) += u1[i] * state.N0.row(i);
    state.N0 = prob.normal.eval(state.mesh);
  }
  state.up = u1;
  state.u.head(nr).setZero();
}

Vec bordered_tangent(const ProblemDef& prob, const ProblemState& state,
                     const ContSettings& settings, const Vec* prev) {
  const int nr = state.np_red();
  const int nu = prob.nfields * nr;
  const int na = static_cast<int>(state.ilam.size());
  EvalContext ctx = make_context(prob, state);
  auto ej = assemble_jacobian(prob, state, ctx);
  std::vector<int> allp(na);
  std::iota(allp.begin(), allp.end(), 0);
  const double xi = xi_weight(settings, state);
  Vec wu(nu), wp(na);
  if (prev && prev->size() == nu + na) {
    wu = xi * prev->head(nu);
    wp = prev->tail(na);
  } else {
    wu.setZero();
    wp.setZero();
    wp[0] = 1.0;
  }
  SpMat A = compose_square(ej.Ju, ej.Jp, allp, &wu, &wp);
  Vec rhs = Vec::Zero(nu + static_cast<int>(prob.constraints.size()) + 1);
  rhs[rhs.size() - 1] = 1.0;
  bool ok = false;
  Vec t = solve_sparse(A, rhs, &ok);
  if (!ok) return Vec();
  TangentFrame f = unpack_tangent(t, nu, na);
  return t / std::sqrt(std::max(xi_dot(xi, f, f), 1e-300));
}

NewtonReport arclength_correct(const ProblemDef& prob, ProblemState& state,
                               const ContSettings& settings, const Vec& y_old_u,
                               const Vec& y_old_p, const Vec& tangent, double ds) {
  NewtonReport rep;
  const int nr = state.np_red();
  const int nu = prob.nfields * nr;
  const int na = static_cast<int>(state.ilam.size());
  const int nq = static_cast<int>(prob.constraints.size());
  const double xi = xi_weight(settings, state);
  TangentFrame tf = unpack_tangent(tangent, nu, na);
  std::vector<int> allp(na);
  std::iota(allp.begin(), allp.end(), 0);

  auto arc_of = [&](const ProblemState& s) {
    Vec du = s.u - y_old_u;
    Vec dp(na);
    for (int a = 0; a < na; ++a) dp[a] = s.pars[s.ilam[a]] - y_old_p[a];
    return xi_dot(xi, tf, {du, dp}) - ds;
  };

  for (int it = 0; it < settings.maxit; ++it) {
    EvalContext ctx = make_context(prob, state);
    Vec F = assemble_residual(prob, state, ctx);
    const double arc = arc_of(state);
    rep.resnorm = std::max(F.cwiseAbs().maxCoeff(), 1e-3 * std::abs(arc));
    if (rep.resnorm <= settings.tol) {
      rep.converged = true;
      rep.iterations = it;
      return rep;
    }
    auto ej = assemble_jacobian(prob, state, ctx);
    Vec wu = xi * tf.tu, wp = tf.tp;
    SpMat A = compose_square(ej.Ju, ej.Jp, allp, &wu, &wp);
    Vec rhs(nu + nq + 1);
    rhs << -F, -arc;
    bool ok = false;
    Vec d = solve_sparse(A, rhs, &ok);
    if (!ok) {
      rep.converged = false;
      return rep;
    }
    double best = -1;
    Vec bu, bp;
    for (double lam : {1.0, 0.5, 0.25}) {
      ProblemState trial = state;
      trial.u += lam * d.head(nu);
      for (int a = 0; a < na; ++a) trial.pars[state.ilam[a]] += lam * d[nu + a];
      Vec Ft = assemble_residual(prob, trial, make_context(prob, trial));
      const double nt = std::max(Ft.cwiseAbs().maxCoeff(), 1e-3 * std::abs(arc_of(trial)));
      if (best < 0 || nt < best) {
        best = nt;
        bu = trial.u;
        bp = trial.pars;
      }
      if (nt < rep.resnorm) break;
    }
    state.u = bu;
    state.pars = bp;
    rep.iterations = it + 1;
  }
  Vec F = assemble_residual(prob, state, make_context(prob, state));
  rep.resnorm = std::max(F.cwiseAbs().maxCoeff(), 1e-3 * std::abs(arc_of(state)));
  rep.converged = rep.resnorm <= settings.tol;
  return rep;
}

}  // namespace

ContResult cont(const ProblemDef& prob, ProblemState state, const ContSettings& settings,
                int nsteps, const AdaptPolicy& adapt) {
  ContResult res;
  if (prob.prepare) prob.prepare(state);

  {
    NewtonReport rep = newton_correct(prob, state, settings);
    if (!rep.converged) {
      res.failed = true;
      res.message = "initial point did not converge (res=" + std::to_string(rep.resnorm) + ")";
      res.state = state;
      return res;
    }
    default_update(prob, state);
  }

  const int na = static_cast<int>(state.ilam.size());
  int ineg_prev = settings.spcalc ? stability_index(prob, state, settings) : 0;
  res.records.push_back(make_record(prob, state, 0, 0, ineg_prev));

  Vec tangent = state.has_tangent ? state.tangent : Vec();
  if (tangent.size() != prob.nfields * state.np_red() + na)
    tangent = bordered_tangent(prob, state, settings, nullptr);
  if (tangent.size() == 0) {
    res.failed = true;
    res.message = "tangent solve failed";
    res.state = state;
    return res;
  }
  if (settings.ds < 0) tangent = -tangent;
  double ds = std::abs(settings.ds);

  ProblemState prev = state;
  prev.tangent = tangent;
  prev.has_tangent = true;

  int accepted = 0;
  while (accepted < nsteps) {
    const int nu = prob.nfields * state.np_red();
    ProblemState trial = state;
    Vec y_old_u = state.u;
    Vec y_old_p(na);
    for (int a = 0; a < na; ++a) y_old_p[a] = state.pars[state.ilam[a]];
    trial.u += ds * tangent.head(nu);
    for (int a = 0; a < na; ++a) trial.pars[trial.ilam[a]] += ds * tangent[nu + a];

    NewtonReport rep = arclength_correct(prob, trial, settings, y_old_u, y_old_p, tangent, ds);
    if (!rep.converged) {
      ds *= 0.5;
      if (ds < settings.dsmin) {
        res.failed = true;
        res.message =
            "continuation failure: ds below dsmin at step " + std::to_string(accepted + 1);
        break;
      }
      continue;
    }

    Vec tnew(nu + na);
    tnew.head(nu) = trial.u - y_old_u;
    for (int a = 0; a < na; ++a) tnew[nu + a] = trial.pars[trial.ilam[a]] - y_old_p[a];
    const double xi = xi_weight(settings, state);
    TangentFrame tf = unpack_tangent(tnew, nu, na);
    tnew /= std::sqrt(std::max(xi_dot(xi, tf, tf), 1e-300));
    TangentFrame to = unpack_tangent(tangent, nu, na);
    TangentFrame tn = unpack_tangent(tnew, nu, na);
    if (xi_dot(xi, to, tn) < 0) tnew = -tnew;

    const bool reversal = (tangent[nu] * tnew[nu] < 0);

    default_update(prob, trial);
    trial.tangent = tnew;
    trial.has_tangent = true;
    ++accepted;

    int ineg = ineg_prev;
    if (settings.spcalc) ineg = stability_index(prob, trial, settings);

    int type = 0;
    if (settings.spcalc && ineg >= 0 && ineg_prev >= 0 && ineg != ineg_prev) {
      BifPoint bp = locate_bp(prob, prev, trial, settings);
      bp.ineg_before = ineg_prev;
      bp.ineg_after = ineg;
      bp.after_step = accepted;
      if (reversal && std::abs(ineg - ineg_prev) == 1) bp.type = 2;
      res.special.push_back(bp);
      type = res.special.back().type;
    } else if (reversal) {
      BifPoint bp;
      bp.type = 2;
      bp.state = trial;
      bp.lam = trial.pars[trial.ilam[0]];
      bp.ineg_before = ineg_prev;
      bp.ineg_after = ineg;
      bp.after_step = accepted;
      bp.localized = false;
      res.special.push_back(bp);
      type = 2;
    }

    res.records.push_back(make_record(prob, trial, accepted, type, ineg));
    const double err = res.records.back().err;
    if (settings.verbose > 0) {
      const auto& r = res.records.back();
      std::printf("step %3d  lam=%+.6f ineg=%2d its=%d res=%.2e ds=%.3g V=%.4f A=%.4f dm=%.1f\n",
                  accepted, r.lam, r.ineg, rep.iterations, rep.resnorm, ds, r.V, r.A,
                  r.delta_mesh);
      std::fflush(stdout);
    }

    if (rep.iterations <= 3) ds = std::min(ds * 1.3, settings.dsmax);

    ineg_prev = ineg;
    prev = trial;
    state = trial;
    tangent = tnew;

    if (adapt.trigger != AdaptPolicy::Trigger::None) {
      if (adaptation_hook(prob, state, adapt, accepted, err)) {
        if (prob.prepare) prob.prepare(state);
        NewtonReport rp = newton_correct(prob, state, settings);
        if (rp.converged) default_update(prob, state);
        Vec t2 = bordered_tangent(prob, state, settings, nullptr);
        if (t2.size()) {
          if (t2[prob.nfields * state.np_red()] * tnew[nu] < 0) t2 = -t2;
          tangent = t2;
          state.tangent = t2;
          state.has_tangent = true;
          prev = state;
        }
      }
    }
  }
  res.state = state;
  return res;
}

BifPoint locate_bp(const ProblemDef& prob, const ProblemState& state_a,
                   const ProblemState& state_b, const ContSettings& settings) {
  BifPoint bp;
  bp.type = 1;
  ProblemState a = state_a, b = state_b;
  int ineg_a = stability_index(prob, a, settings);
  const int ineg_b0 = stability_index(prob, b, settings);
  int ineg_b = ineg_b0;
  double lam_a = a.pars[a.ilam[0]], lam_b = b.pars[b.ilam[0]];

  auto bracket_len = [&](const ProblemState& sa, const ProblemState& sb) {
    if (sa.u.size() != sb.u.size()) return std::abs(lam_b - lam_a);
    Vec du = sb.u - sa.u;
    double s = xi_weight(settings, sa) * du.squaredNorm();
    for (size_t k = 0; k < sa.ilam.size(); ++k) {
      const double dp = sb.pars[sa.ilam[k]] - sa.pars[sa.ilam[k]];
      s += dp * dp;
    }
    return std::sqrt(s);
  };

  double mu_a = critical_mu(prob, a, settings);
  double mu_b = critical_mu(prob, b, settings);
  const double mu_scale = std::max({std::abs(mu_a), std::abs(mu_b), 1e-300});
  int last_side = 0;  // Illinois anti-stall bookkeeping

  bool tangent_reversed = false;
  for (int bis = 0; bis < settings.bisec_max; ++bis) {
    if (std::abs(lam_b - lam_a) < 1e-6 * (1.0 + std::abs(lam_b))) break;
    if (!a.has_tangent) break;
    double h = bracket_len(a, b);
    if (h <= settings.dsmin * 1e-3) break;
    // regula falsi on the crossing eigenvalue, clipped toward the interior
    double frac = 0.5;
    if (mu_a * mu_b < 0) frac = std::clamp(mu_a / (mu_a - mu_b), 0.1, 0.9);
    if (std::getenv("GC_DEBUG_BP"))
      std::fprintf(stderr, "bis %d: lam=[%.8g, %.8g] mu=[%.4g, %.4g] frac=%.3g h=%.4g\n", bis,
                   lam_a, lam_b, mu_a, mu_b, frac, h);
    ProblemState mid = a;
    const int nu = prob.nfields * a.np_red();
    mid.u += frac * h * a.tangent.head(nu);
    for (size_t k = 0; k < a.ilam.size(); ++k)
      mid.pars[a.ilam[k]] += frac * h * a.tangent[nu + k];
    Vec y_old_u = a.u;
    Vec y_old_p(a.ilam.size());
    for (size_t k = 0; k < a.ilam.size(); ++k) y_old_p[k] = a.pars[a.ilam[k]];
    NewtonReport rep =
        arclength_correct(prob, mid, settings, y_old_u, y_old_p, a.tangent, frac * h);
    if (!rep.converged) {
      bp.localized = false;
      break;
    }
    Vec tnew(nu + a.ilam.size());
    tnew.head(nu) = mid.u - y_old_u;
    for (size_t k = 0; k < a.ilam.size(); ++k) tnew[nu + k] = mid.pars[a.ilam[k]] - y_old_p[k];
    const double xi = xi_weight(settings, a);
    TangentFrame tf{tnew.head(nu), tnew.tail(a.ilam.size())};
    tnew /= std::sqrt(std::max(xi_dot(xi, tf, tf), 1e-300));
    if (tnew[nu] * a.tangent[nu] < 0) tangent_reversed = true;

    ProblemState mid_up = mid;
    default_update(prob, mid_up);
    mid_up.tangent = tnew;
    mid_up.has_tangent = true;
    const int ineg_m = stability_index(prob, mid_up, settings);
    const double mu_m = critical_mu(prob, mid_up, settings);
    if (std::abs(mu_m) <= 1e-8 * mu_scale) {  // landed on the crossing
      b = mid_up;
      ineg_b = ineg_m;
      lam_b = b.pars[b.ilam[0]];
      mu_b = mu_m;
      break;
    }
    if (ineg_m == ineg_a) {
      a = mid_up;
      lam_a = a.pars[a.ilam[0]];
      mu_a = mu_m;
      if (last_side == 1) mu_b *= 0.5;  // Illinois: keep both ends moving
      last_side = 1;
    } else {
      b = mid_up;
      ineg_b = ineg_m;
      lam_b = b.pars[b.ilam[0]];
      mu_b = mu_m;
      if (last_side == 2) mu_a *= 0.5;
      last_side = 2;
    }
  }
  // report the bracket end closest to the crossing
  if (std::abs(mu_a) < std::abs(mu_b)) {
    bp.state = a;
    bp.lam = lam_a;
  } else {
    bp.state = b;
    bp.lam = lam_b;
  }
  bp.ineg_before = ineg_a;
  bp.ineg_after = ineg_b;
  if (tangent_reversed && std::abs(ineg_b0 - ineg_a) == 1) bp.type = 2;
  return bp;
}

KernelInfo kernel_at_bp(const ProblemDef& prob, const ProblemState& bp_state,
                        const ContSettings& settings, int m_small) {
  KernelInfo ki;
  EvalContext ctx = make_context(prob, bp_state);
  Vec bigmass;
  SpMat A = stability_matrix(prob, bp_state, ctx, bigmass);
  auto eg = pencil_eigs(A, bigmass, -1e-4, std::max(2 * m_small + 6, 10));
  std::vector<int> order(eg.values.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](int i, int j) { return std::abs(eg.values[i]) < std::abs(eg.values[j]); });
  std::vector<Vec> basis;
  for (int oi : order) {
    if (static_cast<int>(basis.size()) >= m_small) break;
    Vec v = eg.vectors.col(oi);
    for (const auto& w : basis) {
      const double proj = (v.array() * bigmass.array() * w.array()).sum();
      v -= proj * w;
    }
    const double nn = std::sqrt(std::max((v.array() * bigmass.array() * v.array()).sum(), 0.0));
    if (nn < 1e-10) continue;
    v /= nn;
    basis.push_back(v);
    ki.mu.push_back(eg.values[oi].real());
  }
  ki.vectors.resize(A.rows(), static_cast<int>(basis.size()));
  for (size_t k = 0; k < basis.size(); ++k) ki.vectors.col(k) = basis[k];
  return ki;
}

SwibraResult swibra(const ProblemDef& prob, const ProblemState& bp_state, const Vec& direction,
                    double ds0, const ContSettings& settings) {
  SwibraResult sr;
  ProblemState s = bp_state;
  const int nr = s.np_red();
  const int nu = prob.nfields * nr;
  Vec dir = direction;
  if (dir.size() > nu) dir = direction.head(nu);
  const double dn = dir.norm();
  if (dn == 0) {
    sr.message = "zero direction";
    return sr;
  }
  dir /= dn;
  s.u += ds0 * dir;
  NewtonReport rep = newton_correct(prob, s, settings);
  if (!rep.converged) {
    sr.message = "corrector did not converge";
    return sr;
  }
  Vec step = s.u - bp_state.u;
  const double sn = step.norm();
  if (sn < 1e-14 || std::abs(step.dot(dir)) / sn < std::cos(75.0 * M_PI / 180.0)) {
    sr.message = "fell back onto the old branch";
    return sr;
  }
  Vec t = Vec::Zero(nu + static_cast<int>(s.ilam.size()));
  t.head(nu) = step;
  const double xi = 1.0 / std::max(1, s.np_red());
  t /= std::sqrt(xi * step.squaredNorm());
  default_update(prob, s);
  s.tangent = t;
  s.has_tangent = true;
  sr.state = s;
  sr.ok = true;
  return sr;
}

bool adaptation_hook(const ProblemDef& prob, ProblemState& state, const AdaptPolicy& policy,
                     int step, double err) {
  bool fire = false;
  switch (policy.trigger) {
    case AdaptPolicy::Trigger::None:
      return false;
    case AdaptPolicy::Trigger::EveryK:
      fire = (policy.k > 0 && step > 0 && step % policy.k == 0);
      break;
    case AdaptPolicy::Trigger::ErrorThreshold:
      fire = err > policy.errbound;
      break;
    case AdaptPolicy::Trigger::MaxAreaThreshold:
      fire = triangle_areas(state.mesh).maxCoeff() > policy.maxA;
      break;
    case AdaptPolicy::Trigger::DistortionThreshold:
      fire = mesh_quality(state.mesh).delta_mesh > policy.distbound;
      break;
  }
  if (!fire) return false;

  try {
    switch (policy.action) {
      case AdaptPolicy::Action::Refine: {
        auto sel = select_elements(state.mesh, policy.selector);
        auto rr = refine(state.mesh, sel, policy.strategy, policy.keepbd);
        for (auto& [k, f] : state.fields)
          if (f.size() == state.mesh.np()) f = rr.P * f;
        if (state.up.size() == state.mesh.np()) state.up = rr.P * state.up;
        state.mesh = rr.mesh;
        break;
      }
      case AdaptPolicy::Action::Coarsen: {
        auto sel = select_elements(state.mesh, policy.selector);
        auto cr = coarsen(state.mesh, sel);
        for (auto& [k, f] : state.fields)
          if (f.size() == state.mesh.np()) f = cr.R * f;
        if (state.up.size() == state.mesh.np()) state.up = cr.R * state.up;
        state.mesh = cr.mesh;
        break;
      }
      case AdaptPolicy::Action::Degcoarsen: {
        state.mesh = degcoarsen(state.mesh, policy.sigma, policy.iters, policy.keepbd);
        state.fields.clear();
        state.up = Vec();
        break;
      }
      case AdaptPolicy::Action::MoveRetrig: {
        state.mesh = move_points(state.mesh, policy.dt, policy.iters);
        break;
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "adaptation failed, continuing on the old mesh: " << e.what() << "\n";
    return false;
  }

  state.N0 = prob.normal.eval(state.mesh);
  if (prob.periodic_shift) {
    state.periodic = build_periodic_maps(state.mesh, prob.periodic_shift(state),
                                         1e-8 * bbox_diagonal(state.mesh));
  }
  state.u = Vec::Zero(prob.nfields * state.np_red());
  state.has_tangent = false;
  state.tangent = Vec();
  return true;
}

void save_point(const std::string& basename, const ProblemDef& prob,
                const ProblemState& state) {
  save_mesh(state.mesh, basename + ".smesh");
  std::ofstream out(basename + ".pars");
  if (!out) throw std::runtime_error("save_point: cannot open " + basename + ".pars");
  out.precision(17);
  out << "problem " << prob.name << "\n";
  out << "npars " << state.pars.size() << "\n";
  for (int i = 0; i < state.pars.size(); ++i) out << state.pars[i] << "\n";
  out << "ilam " << state.ilam.size() << "\n";
  for (int v : state.ilam) out << v << "\n";
  out << "xcont_mode " << state.xcont_mode << "\n";
  out << "u " << state.u.size() << "\n";
  for (int i = 0; i < state.u.size(); ++i) out << state.u[i] << "\n";
  out << "fields " << state.fields.size() << "\n";
  for (const auto& [k, f] : state.fields) {
    out << k << " " << f.size() << "\n";
    for (int i = 0; i < f.size(); ++i) out << f[i] << "\n";
  }
}

ProblemState load_point(const std::string& basename, const ProblemDef& prob) {
  ProblemState s;
  s.mesh = load_mesh(basename + ".smesh");
  std::ifstream in(basename + ".pars");
  if (!in) throw std::runtime_error("load_point: cannot open " + basename + ".pars");
  std::string key, pname;
  in >> key >> pname;
  int n = 0;
  in >> key >> n;
  s.pars.resize(n);
  for (int i = 0; i < n; ++i) in >> s.pars[i];
  in >> key >> n;
  s.ilam.resize(n);
  for (int i = 0; i < n; ++i) in >> s.ilam[i];
  in >> key >> s.xcont_mode;
  in >> key >> n;
  s.u.resize(n);
  for (int i = 0; i < n; ++i) in >> s.u[i];
  in >> key >> n;
  for (int f = 0; f < n; ++f) {
    std::string fname;
    int fn = 0;
    in >> fname >> fn;
    Vec v(fn);
    for (int i = 0; i < fn; ++i) in >> v[i];
    s.fields[fname] = v;
  }
  s.N0 = prob.normal.eval(s.mesh);
  if (prob.periodic_shift)
    s.periodic =
        build_periodic_maps(s.mesh, prob.periodic_shift(s), 1e-8 * bbox_diagonal(s.mesh));
  if (s.u.size() != prob.nfields * s.np_red()) s.u = Vec::Zero(prob.nfields * s.np_red());
  return s;
}

}  // namespace geomcont
