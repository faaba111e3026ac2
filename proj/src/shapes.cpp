#include "geomcont/shapes.hpp"

#include <cmath>
#include <map>
#include <stdexcept>
#include <vector>

namespace geomcont {

SurfaceMesh icosphere(int level) {
  const double t = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Eigen::Vector3d> verts = {
      {-1, t, 0}, {1, t, 0}, {-1, -t, 0}, {1, -t, 0}, {0, -1, t}, {0, 1, t},
      {0, -1, -t}, {0, 1, -t}, {t, 0, -1}, {t, 0, 1}, {-t, 0, -1}, {-t, 0, 1}};
  std::vector<std::array<int, 3>> faces = {
      {0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11}, {1, 5, 9},
      {5, 11, 4}, {11, 10, 2}, {10, 7, 6},  {7, 1, 8},  {3, 9, 4},   {3, 4, 2},
      {3, 2, 6},  {3, 6, 8},  {3, 8, 9},   {4, 9, 5},  {2, 4, 11},  {6, 2, 10},
      {8, 6, 7},  {9, 8, 1}};
  for (auto& v : verts) v.normalize();

  for (int l = 0; l < level; ++l) {
    std::map<std::int64_t, int> mid;
    auto midpoint = [&](int a, int b) {
      auto key = edge_key(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      Eigen::Vector3d p = (verts[a] + verts[b]).normalized();
      verts.push_back(p);
      int id = static_cast<int>(verts.size()) - 1;
      mid[key] = id;
      return id;
    };
    std::vector<std::array<int, 3>> next;
    next.reserve(4 * faces.size());
    for (auto& f : faces) {
      int m0 = midpoint(f[0], f[1]), m1 = midpoint(f[1], f[2]), m2 = midpoint(f[2], f[0]);
      next.push_back({f[0], m0, m2});
      next.push_back({m0, f[1], m1});
      next.push_back({m2, m1, f[2]});
      next.push_back({m0, m1, m2});
    }
    faces = std::move(next);
  }

  SurfaceMesh m;
  m.X.resize(verts.size(), 3);
  for (size_t i = 0; i < verts.size(); ++i) m.X.row(i) = verts[i].transpose();
  m.tri.resize(faces.size(), 3);
  for (size_t f = 0; f < faces.size(); ++f)
    m.tri.row(f) << faces[f][0], faces[f][1], faces[f][2];
  m.rebuild_boundary_vertex_lists();
  return m;
}

namespace {

// zipper triangulation of the annulus between two concentric vertex rings
void zip_rings(std::vector<std::array<int, 3>>& tris, const std::vector<int>& inner,
               const std::vector<int>& outer) {
  const int ni = static_cast<int>(inner.size()), no = static_cast<int>(outer.size());
  int i = 0, o = 0;
  auto ang = [](int k, int n) { return 2.0 * M_PI * k / n; };
  while (i < ni || o < no) {
    const double ai = ang(i + 1, ni), ao = ang(o + 1, no);
    if (o < no && (i >= ni || ao <= ai)) {
      tris.push_back({inner[i % ni], outer[o % no], outer[(o + 1) % no]});
      ++o;
    } else {
      tris.push_back({inner[i % ni], outer[o % no], inner[(i + 1) % ni]});
      ++i;
    }
  }
}

}  // namespace

SurfaceMesh disk_mesh(int nrings, double radius, double grading) {
  if (nrings < 1) throw std::runtime_error("disk_mesh: nrings must be >= 1");
  std::vector<Eigen::Vector3d> verts{{0, 0, 0}};
  std::vector<std::vector<int>> rings(nrings + 1);
  rings[0] = {0};
  for (int k = 1; k <= nrings; ++k) {
    const double r = radius * std::pow(static_cast<double>(k) / nrings, grading);
    const int n = 6 * k;
    for (int j = 0; j < n; ++j) {
      const double phi = 2.0 * M_PI * j / n;
      rings[k].push_back(static_cast<int>(verts.size()));
      verts.push_back({r * std::cos(phi), r * std::sin(phi), 0.0});
    }
  }
  std::vector<std::array<int, 3>> tris;
  for (int j = 0; j < 6; ++j) tris.push_back({0, rings[1][j], rings[1][(j + 1) % 6]});
  for (int k = 1; k < nrings; ++k) zip_rings(tris, rings[k], rings[k + 1]);

  SurfaceMesh m;
  m.X.resize(verts.size(), 3);
  for (size_t i = 0; i < verts.size(); ++i) m.X.row(i) = verts[i].transpose();
  m.tri.resize(tris.size(), 3);
  for (size_t t = 0; t < tris.size(); ++t) m.tri.row(t) << tris[t][0], tris[t][1], tris[t][2];
  const auto& rim = rings[nrings];
  for (size_t j = 0; j < rim.size(); ++j)
    m.dbc_edges.push_back({rim[j], rim[(j + 1) % rim.size()]});
  m.rebuild_boundary_vertex_lists();
  return m;
}

SurfaceMesh cylinder_mesh(double radius, double c0, double c1, int nax, int nphi, char axis) {
  if (nax < 1 || nphi < 3) throw std::runtime_error("cylinder_mesh: bad resolution");
  SurfaceMesh m;
  m.X.resize((nax + 1) * nphi, 3);
  auto vid = [&](int i, int j) { return i * nphi + (j % nphi); };
  for (int i = 0; i <= nax; ++i) {
    const double c = c0 + (c1 - c0) * i / nax;
    for (int j = 0; j < nphi; ++j) {
      const double phi = 2.0 * M_PI * j / nphi;
      Eigen::Vector3d p;
      if (axis == 'z')
        p = {radius * std::cos(phi), radius * std::sin(phi), c};
      else
        p = {c, radius * std::cos(phi), radius * std::sin(phi)};
      m.X.row(vid(i, j)) = p.transpose();
    }
  }
  std::vector<std::array<int, 3>> tris;
  for (int i = 0; i < nax; ++i)
    for (int j = 0; j < nphi; ++j) {
      // outward orientation
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

SurfaceMesh hemisphere_mesh(int nrings, double grading) {
  SurfaceMesh m = disk_mesh(nrings, 1.0, grading);
  for (int i = 0; i < m.np(); ++i) {
    const double r2 = m.X(i, 0) * m.X(i, 0) + m.X(i, 1) * m.X(i, 1);
    m.X(i, 2) = std::sqrt(std::max(1.0 - r2, 0.0));
  }
  return m;
}

}  // namespace geomcont
