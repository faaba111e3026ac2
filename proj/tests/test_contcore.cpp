#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geomcont/contcore.hpp"
#include "geomcont/problems.hpp"

#include <cmath>
#include <cstdio>
#include <random>

using namespace geomcont;

namespace {

// scalar toy problem on a fixed triangle: G_j = -lam u_j + u_j^3, so the
// linearization crosses zero exactly at lam = 0
ProblemSetup toy_problem() {
  ProblemSetup su;
  ProblemDef& def = su.def;
  def.name = "toy";
  def.par_names = {"lam"};
  def.stab_sign = -1.0;
  def.residual = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    const double lam = state.pars[0];
    Vec G(ctx.u1_full.size());
    for (int i = 0; i < G.size(); ++i)
      G[i] = -lam * ctx.u1_full[i] + std::pow(ctx.u1_full[i], 3);
    return G;
  };
  def.jacobian = [](const ProblemDef&, const ProblemState& state, const EvalContext& ctx) {
    const double lam = state.pars[0];
    SpMat J(ctx.u1_full.size(), ctx.u1_full.size());
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < ctx.u1_full.size(); ++i)
      trip.emplace_back(i, i, -lam + 3 * ctx.u1_full[i] * ctx.u1_full[i]);
    J.setFromTriplets(trip.begin(), trip.end());
    return J;
  };

  SurfaceMesh m;
  m.X.resize(3, 3);
  m.X << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  m.tri.resize(1, 3);
  m.tri << 0, 1, 2;
  finalize_boundary(m);
  m.dbc_edges.clear();
  m.rebuild_boundary_vertex_lists();

  ProblemState s;
  s.mesh = m;
  s.pars = Vec::Constant(1, -0.5);
  s.ilam = {0};
  s.N0 = def.normal.eval(s.mesh);
  s.u = Vec::Zero(3);
  su.state = s;
  return su;
}

}  // namespace

TEST_CASE("toy problem: BP at lam = 0 within 1e-6") {
  auto su = toy_problem();
  ContSettings cs;
  cs.ds = 0.12;
  cs.dsmax = 0.12;
  cs.tol = 1e-10;
  auto res = cont(su.def, su.state, cs, 12);
  REQUIRE(!res.failed);
  REQUIRE(res.special.size() >= 1);
  const auto& bp = res.special.front();
  CHECK(bp.type == 1);
  CHECK(std::abs(bp.lam) < 1e-6);
  CHECK(bp.ineg_before == 3);  // three unknowns cross together here
  CHECK(bp.ineg_after == 0);
}

TEST_CASE("cap problem: equilibrium, jaccheck, first step direction") {
  auto su = cap_problem(8);
  ContSettings cs;
  cs.tol = 1e-9;

  SUBCASE("disk residual vanishes identically") {
    EvalContext ctx = make_context(su.def, su.state);
    Vec F = assemble_residual(su.def, su.state, ctx);
    CHECK(F.cwiseAbs().maxCoeff() < 1e-12);
  }
  SUBCASE("newton from equilibrium does nothing") {
    ProblemState s = su.state;
    auto rep = newton_correct(su.def, s, cs);
    CHECK(rep.converged);
    CHECK(rep.iterations <= 1);
  }
  SUBCASE("jaccheck at a displaced cap state") {
    // continue two steps to a curved state, then compare Jacobians
    auto res = cont(su.def, su.state, cs, 2);
    REQUIRE(!res.failed);
    const double err = jaccheck(su.def, res.state);
    CHECK(err >= 0);
    CHECK(err < 1e-3);
    const double qerr = qjaccheck(su.def, res.state, 0);
    CHECK(qerr < 1e-3);
  }
  SUBCASE("first accepted step has V > 0 and H < 0") {
    ContSettings c2 = cs;
    c2.ds = 0.2;
    auto res = cont(su.def, su.state, c2, 3);
    REQUIRE(!res.failed);
    REQUIRE(res.records.size() >= 2);
    CHECK(res.records[1].pars[1] > 0);  // V
    CHECK(res.records[1].pars[0] < 0);  // H (outer normal)
    CHECK(res.records[1].ineg == 0);
    // tangent coherence is implicit: no fold reported
    for (const auto& sp : res.special) CHECK(sp.type != 2);
  }
}

TEST_CASE("newton from a perturbed cap equilibrium converges in few iterations") {
  auto su = cap_problem(8);
  ContSettings cs;
  cs.tol = 1e-9;
  auto res = cont(su.def, su.state, cs, 4);  // walk to a genuinely curved cap
  REQUIRE(!res.failed);
  ProblemState s = res.state;
  std::mt19937 rng(17);
  std::normal_distribution<double> g;
  for (int i = 0; i < s.mesh.np(); ++i)
    if (!s.mesh.is_boundary_vertex(i)) s.u[i] += 1e-3 * g(rng);
  auto rep = newton_correct(su.def, s, cs);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 5);
}

TEST_CASE("xcont mode 1 vs mode 2 converge to nearby surfaces") {
  auto su = cap_problem(8);
  ContSettings cs;
  cs.tol = 1e-10;
  auto res = cont(su.def, su.state, cs, 4);
  REQUIRE(!res.failed);

  ProblemState s1 = res.state;
  std::mt19937 rng(23);
  std::normal_distribution<double> g;
  Vec pert = Vec::Zero(s1.mesh.np());
  for (int i = 0; i < s1.mesh.np(); ++i)
    if (!s1.mesh.is_boundary_vertex(i)) pert[i] = 1e-3 * g(rng);
  s1.u += pert;
  ProblemState s2 = s1;
  s2.xcont_mode = 2;

  auto r1 = newton_correct(su.def, s1, cs);
  auto r2 = newton_correct(su.def, s2, cs);
  REQUIRE(r1.converged);
  REQUIRE(r2.converged);

  // compare final surfaces: max distance from mode-2 vertices to the mode-1
  // vertex set (the meshes share connectivity; tangential drift is tiny)
  SurfaceMesh m1 = s1.mesh;
  for (int i = 0; i < m1.np(); ++i) m1.X.row(i) += s1.u[i] * s1.N0.row(i);
  const SurfaceMesh& m2 = s2.mesh;  // mode 2 already folded u into X
  double worst = 0;
  for (int i = 0; i < m2.np(); ++i) {
    double best = 1e30;
    for (int j = 0; j < m1.np(); ++j)
      best = std::min(best, (m2.X.row(i) - m1.X.row(j)).norm());
    worst = std::max(worst, best);
  }
  CHECK(worst < 1e-5);  // both are discrete zeros of the same residual map
}

TEST_CASE("fd_jacobian coloring stays within valence + 2") {
  auto su = cap_problem(8);
  int maxval = 0;
  {
    std::vector<int> val(su.state.mesh.np(), 0);
    auto inc = edge_incidence(su.state.mesh);
    for (auto& [key, ts] : inc) {
      val[static_cast<int>(key >> 32)]++;
      val[static_cast<int>(key & 0xffffffff)]++;
    }
    for (int v : val) maxval = std::max(maxval, v);
  }
  const int nc = fd_jacobian_colors(su.def, su.state);
  CHECK(nc <= maxval + 2);
  CHECK(nc >= 4);
}

TEST_CASE("fd jacobian pattern is symmetric for the CMC residual") {
  auto su = cap_problem(5);
  SpMat J = fd_jacobian(su.def, su.state);
  Eigen::MatrixXd D = Eigen::MatrixXd(J);
  for (int i = 0; i < D.rows(); ++i)
    for (int j = 0; j < D.cols(); ++j)
      if (D(i, j) != 0.0 && !su.state.mesh.is_boundary_vertex(i) &&
          !su.state.mesh.is_boundary_vertex(j))
        CHECK(D(j, i) != 0.0);
}

TEST_CASE("branch records: layout and CSV") {
  auto su = cap_problem(6);
  ContSettings cs;
  auto res = cont(su.def, su.state, cs, 3);
  REQUIRE(!res.failed);
  REQUIRE(res.records.size() == 4);
  const auto flat = res.records[1].flat();
  CHECK(flat.size() == 6u + 3u + 8u);  // 6 + m + 8 with m = 3 parameters
  CHECK(flat[0] == 1.0);               // count
  CHECK(flat[3] == res.records[1].pars[su.state.ilam[0]]);  // lam is the primary parameter

  write_branch_csv("branch_test.csv", res.records, su.def.par_names);
  std::ifstream in("branch_test.csv");
  std::string header;
  std::getline(in, header);
  CHECK(header ==
        "count,type,ineg,lam,err,l2,H,V,A,V,A,E,delta_mesh,a_max,a_min,h_max,h_min");
  int lines = 0;
  std::string tmp;
  while (std::getline(in, tmp)) ++lines;
  CHECK(lines == 4);
  std::remove("branch_test.csv");
}

TEST_CASE("snapshots reload and polish in at most 2 iterations") {
  auto su = cap_problem(6);
  ContSettings cs;
  auto res = cont(su.def, su.state, cs, 3);
  REQUIRE(!res.failed);
  save_point("pt_test", su.def, res.state);
  auto loaded = load_point("pt_test", su.def);
  auto rep = newton_correct(su.def, loaded, cs);
  CHECK(rep.converged);
  CHECK(rep.iterations <= 2);
  std::remove("pt_test.smesh");
  std::remove("pt_test.pars");
}

TEST_CASE("adaptation hook refines on the every-k trigger and keeps fields") {
  auto su = cap_problem(5);
  AdaptPolicy pol;
  pol.trigger = AdaptPolicy::Trigger::EveryK;
  pol.k = 2;
  pol.action = AdaptPolicy::Action::Refine;
  pol.selector = {ElementSelector::Kind::LargestArea, 0.3};
  ProblemState s = su.state;
  const int np0 = s.mesh.np();
  CHECK(!adaptation_hook(su.def, s, pol, 1, 0.0));
  CHECK(adaptation_hook(su.def, s, pol, 2, 0.0));
  CHECK(s.mesh.np() > np0);
  CHECK(s.u.size() == s.mesh.np());
  validate_mesh(s.mesh);
}
