#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "geomcont/mesh.hpp"
#include "geomcont/shapes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <set>

using namespace geomcont;

namespace {

SurfaceMesh single_triangle(double s = 1.0) {
  SurfaceMesh m;
  m.X.resize(3, 3);
  m.X << 0, 0, 0, s, 0, 0, s * 0.5, s * std::sqrt(3.0) / 2.0, 0;
  m.tri.resize(1, 3);
  m.tri << 0, 1, 2;
  finalize_boundary(m);
  return m;
}

SurfaceMesh tetrahedron() {
  SurfaceMesh m;
  m.X.resize(4, 3);
  m.X << 1, 1, 1, 1, -1, -1, -1, 1, -1, -1, -1, 1;
  m.tri.resize(4, 3);
  m.tri << 0, 1, 2, 0, 3, 1, 0, 2, 3, 1, 3, 2;
  m.rebuild_boundary_vertex_lists();
  return m;
}

}  // namespace

TEST_CASE("equilateral distortion is 6/sqrt(3)") {
  auto m = single_triangle();
  auto q = mesh_quality(m);
  CHECK(q.delta_mesh == doctest::Approx(6.0 / std::sqrt(3.0)).epsilon(1e-12));
  CHECK(q.a_max == doctest::Approx(std::sqrt(3.0) / 4.0));
  CHECK(q.h_max == doctest::Approx(1.0));
}

TEST_CASE("right isoceles distortion") {
  SurfaceMesh m;
  m.X.resize(3, 3);
  m.X << 0, 0, 0, 1, 0, 0, 0, 1, 0;
  m.tri.resize(1, 3);
  m.tri << 0, 1, 2;
  finalize_boundary(m);
  // r = (a+b-c)/2 for a right triangle; delta = sqrt(2)/((2-sqrt(2))/2)
  const double expect = std::sqrt(2.0) / ((2.0 - std::sqrt(2.0)) / 2.0);
  CHECK(mesh_quality(m).delta_mesh == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("distortion is scale invariant, areas and edges scale") {
  auto m = icosphere(2);
  auto q0 = mesh_quality(m);
  SurfaceMesh ms = m;
  const double s = 3.7;
  ms.X *= s;
  auto q1 = mesh_quality(ms);
  CHECK(q1.delta_mesh == doctest::Approx(q0.delta_mesh).epsilon(1e-12));
  CHECK(q1.a_max == doctest::Approx(q0.a_max * s * s).epsilon(1e-12));
  CHECK(q1.h_min == doctest::Approx(q0.h_min * s).epsilon(1e-12));
}

TEST_CASE("serial and parallel quality agree") {
  auto m = icosphere(3);
  auto qs = mesh_quality(m, Exec::Serial);
  auto qp = mesh_quality(m, Exec::Parallel);
  CHECK(qs.delta_mesh == doctest::Approx(qp.delta_mesh).epsilon(1e-14));
  CHECK(qs.a_min == doctest::Approx(qp.a_min).epsilon(1e-14));
  CHECK(qs.h_max == doctest::Approx(qp.h_max).epsilon(1e-14));
}

TEST_CASE("closed tetrahedron has no boundary") {
  auto m = tetrahedron();
  finalize_boundary(m);
  CHECK(m.idx.empty());
  CHECK(m.dbc_edges.empty());
  validate_mesh(m);
}

TEST_CASE("single triangle boundary bookkeeping") {
  auto m = single_triangle();
  CHECK(m.idx.size() == 3);
  CHECK(m.dbc_edges.size() == 3);
  validate_mesh(m);
}

TEST_CASE("save/load roundtrip") {
  auto m = disk_mesh(4);
  const char* path = "roundtrip.smesh";
  save_mesh(m, path);
  auto m2 = load_mesh(path);
  std::remove(path);
  REQUIRE(m2.np() == m.np());
  REQUIRE(m2.nt() == m.nt());
  CHECK((m2.X - m.X).cwiseAbs().maxCoeff() == 0.0);
  CHECK((m2.tri - m.tri).cwiseAbs().maxCoeff() == 0);
  CHECK(m2.idx == m.idx);
  CHECK(m2.dbc_edges.size() == m.dbc_edges.size());
}

TEST_CASE("selectors") {
  // four triangles of areas 1,2,3,4 in a strip
  SurfaceMesh m;
  m.X.resize(6, 3);
  m.X << 0, 0, 0, 2, 0, 0, 0, 1, 0, 2, 2, 0, 0, 4, 0, 2, 6, 0;
  m.tri.resize(4, 3);
  m.tri << 0, 1, 2, 1, 3, 2, 2, 3, 4, 3, 5, 4;
  finalize_boundary(m);
  Vec a = triangle_areas(m);
  std::vector<double> av(a.data(), a.data() + 4);
  std::sort(av.begin(), av.end());
  CHECK(av[0] == doctest::Approx(1.0));
  CHECK(av[3] == doctest::Approx(4.0));

  SUBCASE("largest-area fraction 0.5 returns the two largest") {
    auto sel = select_elements(m, {ElementSelector::Kind::LargestArea, 0.5});
    REQUIRE(sel.size() == 2);
    std::set<int> got(sel.begin(), sel.end());
    CHECK(got.count(3) == 1);
    CHECK(got.count(2) == 1);
  }
  SUBCASE("area threshold picks area > (1-sigma)*maxA") {
    auto sel = select_elements(m, {ElementSelector::Kind::AreaThreshold, 0.2});
    // maxA = 4 -> threshold 3.2 -> only the area-4 triangle
    REQUIRE(sel.size() == 1);
    CHECK(sel[0] == 3);
  }
  SUBCASE("boundary-adjacent on a closed mesh is empty") {
    auto t = tetrahedron();
    finalize_boundary(t);
    CHECK(select_elements(t, {ElementSelector::Kind::BoundaryAdjacent, 1.0}).empty());
  }
  SUBCASE("boundary-adjacent finds strip triangles") {
    auto sel = select_elements(m, {ElementSelector::Kind::BoundaryAdjacent, 1.0});
    CHECK(sel.size() == 4);
  }
}

TEST_CASE("weld closes a seam") {
  // two triangles sharing a duplicated edge
  SurfaceMesh m;
  m.X.resize(6, 3);
  m.X << 0, 0, 0, 1, 0, 0, 0, 1, 0, 1e-14, 2e-14, 0, 1, 1e-14, 0, 1, 1, 0;
  m.tri.resize(2, 3);
  m.tri << 0, 1, 2, 4, 5, 3;  // (3,4) duplicates (0,1)
  auto w = weld_duplicates(m, 1e-10);
  CHECK(w.np() == 4);
  CHECK(w.nt() == 2);
  validate_mesh(w);
  CHECK(w.dbc_edges.size() == 4);
}

TEST_CASE("non-manifold edge detected") {
  SurfaceMesh m;
  m.X.resize(5, 3);
  m.X << 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 1, 0, -1, 0.3;
  m.tri.resize(3, 3);
  m.tri << 0, 1, 2, 0, 1, 3, 0, 1, 4;
  m.rebuild_boundary_vertex_lists();
  CHECK_THROWS(validate_mesh(m));
}

TEST_CASE("primitive meshes are valid") {
  validate_mesh(icosphere(2));
  validate_mesh(disk_mesh(6));
  validate_mesh(cylinder_mesh(1.0, -0.5, 0.5, 8, 24));
  validate_mesh(hemisphere_mesh(8));
}
