#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geomcont/refine.hpp"
#include "geomcont/remesh.hpp"
#include "geomcont/shapes.hpp"

#include <cmath>
#include <random>
#include <set>

using namespace geomcont;

namespace {

std::set<std::array<int, 3>> tri_set(const SurfaceMesh& m) {
  std::set<std::array<int, 3>> s;
  for (int t = 0; t < m.nt(); ++t) {
    std::array<int, 3> v{m.tri(t, 0), m.tri(t, 1), m.tri(t, 2)};
    std::sort(v.begin(), v.end());
    s.insert(v);
  }
  return s;
}

// equilateral triangular lattice on a parallelogram patch
SurfaceMesh triangle_grid(int nx, int ny, double h = 1.0) {
  SurfaceMesh m;
  m.X.resize((nx + 1) * (ny + 1), 3);
  auto vid = [&](int i, int j) { return j * (nx + 1) + i; };
  for (int j = 0; j <= ny; ++j)
    for (int i = 0; i <= nx; ++i)
      m.X.row(vid(i, j)) << h * (i + 0.5 * j), h * j * std::sqrt(3.0) / 2.0, 0.0;
  std::vector<std::array<int, 3>> tris;
  for (int j = 0; j < ny; ++j)
    for (int i = 0; i < nx; ++i) {
      tris.push_back({vid(i, j), vid(i + 1, j), vid(i, j + 1)});
      tris.push_back({vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)});
    }
  m.tri.resize(tris.size(), 3);
  for (size_t t = 0; t < tris.size(); ++t) m.tri.row(t) << tris[t][0], tris[t][1], tris[t][2];
  finalize_boundary(m);
  return m;
}

// quad whose diagonal (0,2) badly violates the Delaunay criterion
SurfaceMesh bad_diagonal_quad() {
  SurfaceMesh m;
  m.X.resize(4, 3);
  m.X << 0, 0, 0, 0.5, -0.1, 0, 1, 0, 0, 0.5, 0.1, 0;
  m.tri.resize(2, 3);
  m.tri << 0, 1, 2, 0, 2, 3;
  finalize_boundary(m);
  return m;
}

double edge_len_std(const SurfaceMesh& m) {
  auto inc = edge_incidence(m);
  double s = 0, s2 = 0;
  int n = 0;
  for (auto& [key, ts] : inc) {
    double l = (m.X.row(static_cast<int>(key >> 32)) -
                m.X.row(static_cast<int>(key & 0xffffffff)))
                   .norm();
    s += l;
    s2 += l * l;
    ++n;
  }
  s /= n;
  return std::sqrt(std::max(s2 / n - s * s, 0.0));
}

}  // namespace

TEST_CASE("already-Delaunay equilateral grid unchanged") {
  auto m = triangle_grid(5, 5);
  auto r = retriangulate(m);
  CHECK(tri_set(r) == tri_set(m));
}

TEST_CASE("retriangulate is idempotent") {
  auto m = disk_mesh(5);
  auto r1 = retriangulate(m);
  auto r2 = retriangulate(r1);
  CHECK(tri_set(r1) == tri_set(r2));
  validate_mesh(r1);
}

TEST_CASE("bad diagonal of a kite is flipped") {
  auto m = bad_diagonal_quad();
  auto r = retriangulate(m);
  REQUIRE(r.nt() == 2);
  auto s = tri_set(r);
  CHECK(s.count({0, 1, 3}) == 1);
  CHECK(s.count({1, 2, 3}) == 1);
  CHECK((r.X - m.X).cwiseAbs().maxCoeff() == 0.0);  // positions untouched
  validate_mesh(r);
}

TEST_CASE("retriangulate repairs valence after long refinement") {
  auto m = triangle_grid(4, 4);
  for (int pass = 0; pass < 3; ++pass) {
    std::vector<int> all(m.nt());
    for (int t = 0; t < m.nt(); ++t) all[t] = t;
    m = refine(m, all, RefineStrategy::LongestEdge).mesh;
  }
  auto count_val = [](const SurfaceMesh& mm) {
    std::vector<int> val(mm.np(), 0);
    auto inc = edge_incidence(mm);
    for (auto& [key, ts] : inc) {
      val[static_cast<int>(key >> 32)]++;
      val[static_cast<int>(key & 0xffffffff)]++;
    }
    int worst = 0;
    for (int v = 0; v < mm.np(); ++v)
      if (!mm.is_boundary_vertex(v)) worst = std::max(worst, val[v]);
    return worst;
  };
  CHECK(count_val(m) >= 8);  // long refinement creates high-valence nodes
  auto r = retriangulate(m);
  CHECK(count_val(r) < 9);
  validate_mesh(r);
}

TEST_CASE("degcoarsen leaves a good mesh alone") {
  auto m = disk_mesh(4);
  auto before = tri_set(m);
  auto r = degcoarsen(m, 0.0, 3);
  CHECK(tri_set(r) == before);
}

TEST_CASE("degcoarsen collapses an interior needle, removing two triangles") {
  SurfaceMesh m;
  m.X.resize(6, 3);
  // a, b far apart; p, q a tiny interior edge between them; t, s above/below
  m.X << -1, 0, 0, 1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0.005, 0, 0, -0.005, 0;
  const int a = 0, b = 1, t = 2, s = 3, p = 4, q = 5;
  m.tri.resize(6, 3);
  m.tri << a, q, p, q, b, p, a, p, t, p, b, t, a, s, q, q, s, b;
  finalize_boundary(m);
  validate_mesh(m);
  auto r = degcoarsen(m, 0.4, 1);
  CHECK(r.nt() == 4);
  CHECK(r.np() == 5);
  validate_mesh(r);
}

TEST_CASE("degcoarsen keepbd skips boundary triangles") {
  SurfaceMesh m;
  m.X.resize(6, 3);
  m.X << -1, 0, 0, 1, 0, 0, 0, 1, 0, 0, -1, 0, 0, 0.005, 0, 0, -0.005, 0;
  m.tri.resize(6, 3);
  m.tri << 0, 5, 4, 5, 1, 4, 0, 4, 2, 4, 1, 2, 0, 3, 5, 5, 3, 1;
  finalize_boundary(m);
  // every triangle touches the boundary, so nothing may collapse
  auto r = degcoarsen(m, 1.0, 3, true);
  CHECK(tri_set(r) == tri_set(m));
}

TEST_CASE("move_points: uniform equilateral grid with pinned boundary is at equilibrium") {
  auto m = triangle_grid(6, 6, 0.5);
  auto r = move_points(m, 0.1, 1);
  double maxdisp = 0;
  for (int i = 0; i < m.np(); ++i)
    if (!m.is_boundary_vertex(i))
      maxdisp = std::max(maxdisp, (r.X.row(i) - m.X.row(i)).norm());
  CHECK(maxdisp < 1e-8);
}

TEST_CASE("move_points evens out a jittered grid") {
  auto m = disk_mesh(6);
  std::mt19937 rng(7);
  std::uniform_real_distribution<double> d(-0.3, 0.3);
  double h = 1.0 / 6.0;
  for (int i = 0; i < m.np(); ++i) {
    if (m.is_boundary_vertex(i)) continue;
    m.X(i, 0) += h * d(rng);
    m.X(i, 1) += h * d(rng);
  }
  const double before = edge_len_std(m);
  auto r = move_points(m, 0.15, 10);
  CHECK(edge_len_std(r) < before);
  // boundary stayed on the unit circle
  for (int v : r.idx)
    CHECK(r.X.row(v).head<2>().norm() == doctest::Approx(1.0).epsilon(1e-12));
  validate_mesh(r);
}
