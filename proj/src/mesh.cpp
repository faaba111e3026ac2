#include "geomcont/mesh.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace geomcont {

bool SurfaceMesh::has_ancestry() const {
  for (const auto& a : ancestry)
    if (a.group >= 0) return true;
  return false;
}

SurfaceMesh::Parent SurfaceMesh::parent_of(int t) const {
  if (t < 0 || t >= nt() || ancestry.empty()) return {};
  return ancestry[t];
}

void SurfaceMesh::rebuild_boundary_vertex_lists() {
  std::set<int> d, n;
  for (const auto& e : dbc_edges) {
    d.insert(e[0]);
    d.insert(e[1]);
  }
  for (const auto& e : nbc_edges) {
    n.insert(e[0]);
    n.insert(e[1]);
  }
  idx.assign(d.begin(), d.end());
  idN.assign(n.begin(), n.end());
}

bool SurfaceMesh::is_boundary_vertex(int v) const {
  return std::binary_search(idx.begin(), idx.end(), v) ||
         std::binary_search(idN.begin(), idN.end(), v);
}

std::unordered_map<std::int64_t, std::vector<int>> edge_incidence(const SurfaceMesh& m) {
  std::unordered_map<std::int64_t, std::vector<int>> inc;
  inc.reserve(3 * m.nt());
  for (int t = 0; t < m.nt(); ++t) {
    for (int k = 0; k < 3; ++k) {
      inc[edge_key(m.tri(t, k), m.tri(t, (k + 1) % 3))].push_back(t);
    }
  }
  return inc;
}

double triangle_area(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                     const Eigen::Vector3d& c) {
  return 0.5 * (b - a).cross(c - a).norm();
}

double triangle_distortion(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                           const Eigen::Vector3d& c) {
  const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
  const double h = std::max({la, lb, lc});
  const double area = triangle_area(a, b, c);
  const double s = 0.5 * (la + lb + lc);
  if (area <= 0 || s <= 0) return std::numeric_limits<double>::infinity();
  return h * s / area;  // r = area/s
}

Vec triangle_areas(const SurfaceMesh& m) {
  Vec a(m.nt());
  for (int t = 0; t < m.nt(); ++t)
    a[t] = triangle_area(m.X.row(m.tri(t, 0)), m.X.row(m.tri(t, 1)), m.X.row(m.tri(t, 2)));
  return a;
}

namespace {

MeshQuality quality_serial(const SurfaceMesh& m) {
  MeshQuality q;
  q.a_min = q.h_min = std::numeric_limits<double>::max();
  for (int t = 0; t < m.nt(); ++t) {
    Eigen::Vector3d a = m.X.row(m.tri(t, 0)), b = m.X.row(m.tri(t, 1)), c = m.X.row(m.tri(t, 2));
    const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
    const double area = triangle_area(a, b, c);
    const double h = std::max({la, lb, lc});
    const double s = 0.5 * (la + lb + lc);
    double del;
    if (area <= 0 || s <= 0) {
      del = std::numeric_limits<double>::infinity();
      q.degenerate = true;
    } else {
      del = h * s / area;
    }
    if (del > q.delta_mesh) {
      q.delta_mesh = del;
      q.worst_tri = t;
    }
    q.a_max = std::max(q.a_max, area);
    q.a_min = std::min(q.a_min, area);
    q.h_max = std::max(q.h_max, h);
    q.h_min = std::min(q.h_min, std::min({la, lb, lc}));
  }
  return q;
}

MeshQuality quality_parallel(const SurfaceMesh& m) {
  MeshQuality q;
  q.a_min = q.h_min = std::numeric_limits<double>::max();
#ifdef _OPENMP
#pragma omp parallel
  {
    MeshQuality loc;
    loc.a_min = loc.h_min = std::numeric_limits<double>::max();
#pragma omp for nowait
    for (int t = 0; t < m.nt(); ++t) {
      Eigen::Vector3d a = m.X.row(m.tri(t, 0)), b = m.X.row(m.tri(t, 1)),
                      c = m.X.row(m.tri(t, 2));
      const double la = (b - c).norm(), lb = (c - a).norm(), lc = (a - b).norm();
      const double area = triangle_area(a, b, c);
      const double h = std::max({la, lb, lc});
      const double s = 0.5 * (la + lb + lc);
      double del;
      if (area <= 0 || s <= 0) {
        del = std::numeric_limits<double>::infinity();
        loc.degenerate = true;
      } else {
        del = h * s / area;
      }
      if (del > loc.delta_mesh) {
        loc.delta_mesh = del;
        loc.worst_tri = t;
      }
      loc.a_max = std::max(loc.a_max, area);
      loc.a_min = std::min(loc.a_min, area);
      loc.h_max = std::max(loc.h_max, h);
      loc.h_min = std::min(loc.h_min, std::min({la, lb, lc}));
    }
#pragma omp critical
    {
      if (loc.delta_mesh > q.delta_mesh) {
        q.delta_mesh = loc.delta_mesh;
        q.worst_tri = loc.worst_tri;
      }
      q.a_max = std::max(q.a_max, loc.a_max);
      q.a_min = std::min(q.a_min, loc.a_min);
      q.h_max = std::max(q.h_max, loc.h_max);
      q.h_min = std::min(q.h_min, loc.h_min);
      q.degenerate = q.degenerate || loc.degenerate;
    }
  }
  return q;
#else
  return quality_serial(m);
#endif
}

}  // namespace

MeshQuality mesh_quality(const SurfaceMesh& m, Exec ex) {
  if (m.nt() == 0) return {};
  if (ex == Exec::Serial) return quality_serial(m);
  if (ex == Exec::Parallel) return quality_parallel(m);
#ifdef _OPENMP
  if (m.nt() > 4096 && omp_get_max_threads() > 1) return quality_parallel(m);
#endif
  return quality_serial(m);
}

std::vector<int> select_elements(const SurfaceMesh& m, const ElementSelector& sel) {
  using Kind = ElementSelector::Kind;
  const int nt = m.nt();
  std::vector<int> out;
  if (nt == 0) return out;

  switch (sel.kind) {
    case Kind::LargestArea: {
      Vec a = triangle_areas(m);
      const int k = static_cast<int>(std::floor(sel.sigma * nt));
      std::vector<int> order(nt);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int i, int j) { return a[i] > a[j]; });
      out.assign(order.begin(), order.begin() + std::min(k, nt));
      break;
    }
    case Kind::SmallestAreaRefined: {
      Vec a = triangle_areas(m);
      std::vector<int> cand;
      for (int t = 0; t < nt; ++t)
        if (!m.ancestry.empty() && m.ancestry[t].group >= 0) cand.push_back(t);
      std::stable_sort(cand.begin(), cand.end(), [&](int i, int j) { return a[i] < a[j]; });
      const int k = static_cast<int>(std::floor(sel.sigma * nt));
      if (static_cast<int>(cand.size()) > k) cand.resize(k);
      out = cand;
      break;
    }
    case Kind::ShapeDistortion: {
      Vec d(nt);
      for (int t = 0; t < nt; ++t)
        d[t] = triangle_distortion(m.X.row(m.tri(t, 0)), m.X.row(m.tri(t, 1)),
                                   m.X.row(m.tri(t, 2)));
      std::vector<int> order(nt);
      std::iota(order.begin(), order.end(), 0);
      std::stable_sort(order.begin(), order.end(),
                       [&](int i, int j) { return d[i] > d[j]; });
      const int k = static_cast<int>(std::floor(sel.sigma * nt));
      out.assign(order.begin(), order.begin() + std::min(k, nt));
      break;
    }
    case Kind::BoundaryAdjacent: {
      std::set<std::int64_t> bd;
      for (const auto& e : m.dbc_edges) bd.insert(edge_key(e[0], e[1]));
      for (const auto& e : m.nbc_edges) bd.insert(edge_key(e[0], e[1]));
      for (int t = 0; t < nt; ++t) {
        for (int k = 0; k < 3; ++k) {
          if (bd.count(edge_key(m.tri(t, k), m.tri(t, (k + 1) % 3)))) {
            out.push_back(t);
            break;
          }
        }
      }
      break;
    }
    case Kind::AreaThreshold: {
      Vec a = triangle_areas(m);
      const double thr = (1.0 - sel.sigma) * a.maxCoeff();
      for (int t = 0; t < nt; ++t)
        if (a[t] > thr) out.push_back(t);
      break;
    }
  }
  return out;
}

void validate_mesh(const SurfaceMesh& m) {
  if (m.tri.size() > 0 && (m.tri.minCoeff() < 0 || m.tri.maxCoeff() >= m.np()))
    throw std::runtime_error("mesh: triangle index out of range");
  auto inc = edge_incidence(m);
  std::set<std::int64_t> bd;
  for (const auto& e : m.dbc_edges) bd.insert(edge_key(e[0], e[1]));
  for (const auto& e : m.nbc_edges) {
    auto k = edge_key(e[0], e[1]);
    if (bd.count(k)) throw std::runtime_error("mesh: edge classified both Dirichlet and Neumann");
    bd.insert(k);
  }
  for (const auto& [k, ts] : inc) {
    if (ts.size() > 2)
      throw std::runtime_error("mesh: non-manifold edge with " + std::to_string(ts.size()) +
                               " incident triangles");
    if (ts.size() == 1 && !bd.count(k))
      throw std::runtime_error("mesh: boundary edge missing from boundary lists");
    if (ts.size() == 2 && bd.count(k))
      throw std::runtime_error("mesh: interior edge listed as boundary");
  }
  for (const auto& e : m.dbc_edges)
    if (!inc.count(edge_key(e[0], e[1])))
      throw std::runtime_error("mesh: listed boundary edge does not exist");
  for (const auto& e : m.nbc_edges)
    if (!inc.count(edge_key(e[0], e[1])))
      throw std::runtime_error("mesh: listed boundary edge does not exist");
  for (int t = 0; t < m.nt(); ++t) {
    if (triangle_area(m.X.row(m.tri(t, 0)), m.X.row(m.tri(t, 1)), m.X.row(m.tri(t, 2))) <= 0)
      throw std::runtime_error("mesh: degenerate triangle " + std::to_string(t));
  }
}

double bbox_diagonal(const SurfaceMesh& m) {
  if (m.np() == 0) return 0;
  Eigen::Vector3d lo = m.X.colwise().minCoeff();
  Eigen::Vector3d hi = m.X.colwise().maxCoeff();
  return (hi - lo).norm();
}

SurfaceMesh weld_duplicates(const SurfaceMesh& m, double tol) {
  const int np = m.np();
  std::vector<int> remap(np, -1);
  // spatial hash on a grid of size tol
  std::unordered_map<std::int64_t, std::vector<int>> grid;
  auto cell = [&](double x) { return static_cast<std::int64_t>(std::floor(x / std::max(tol, 1e-300))); };
  auto hash3 = [](std::int64_t i, std::int64_t j, std::int64_t k) {
    return (i * 73856093) ^ (j * 19349663) ^ (k * 83492791);
  };
  std::vector<int> keep;
  for (int i = 0; i < np; ++i) {
    Eigen::Vector3d p = m.X.row(i);
    int found = -1;
    for (std::int64_t dx = -1; dx <= 1 && found < 0; ++dx)
      for (std::int64_t dy = -1; dy <= 1 && found < 0; ++dy)
        for (std::int64_t dz = -1; dz <= 1 && found < 0; ++dz) {
          auto it = grid.find(hash3(cell(p.x()) + dx, cell(p.y()) + dy, cell(p.z()) + dz));
          if (it == grid.end()) continue;
          for (int j : it->second) {
            if ((m.X.row(keep[j]).transpose() - p).norm() <= tol) {
              found = j;
              break;
            }
          }
        }
    if (found >= 0) {
      remap[i] = found;
    } else {
      remap[i] = static_cast<int>(keep.size());
      grid[hash3(cell(p.x()), cell(p.y()), cell(p.z()))].push_back(remap[i]);
      keep.push_back(i);
    }
  }
  SurfaceMesh out;
  out.X.resize(keep.size(), 3);
  for (size_t i = 0; i < keep.size(); ++i) out.X.row(i) = m.X.row(keep[i]);
  std::vector<std::array<int, 3>> tris;
  for (int t = 0; t < m.nt(); ++t) {
    std::array<int, 3> v{remap[m.tri(t, 0)], remap[m.tri(t, 1)], remap[m.tri(t, 2)]};
    if (v[0] == v[1] || v[1] == v[2] || v[0] == v[2]) continue;  // collapsed by welding
    tris.push_back(v);
  }
  out.tri.resize(tris.size(), 3);
  for (size_t t = 0; t < tris.size(); ++t)
    out.tri.row(t) << tris[t][0], tris[t][1], tris[t][2];
  finalize_boundary(out);
  return out;
}

void finalize_boundary(SurfaceMesh& m) {
  m.dbc_edges.clear();
  m.nbc_edges.clear();
  auto inc = edge_incidence(m);
  for (int t = 0; t < m.nt(); ++t) {
    for (int k = 0; k < 3; ++k) {
      int a = m.tri(t, k), b = m.tri(t, (k + 1) % 3);
      auto it = inc.find(edge_key(a, b));
      if (it->second.size() == 1) m.dbc_edges.push_back({a, b});
    }
  }
  m.rebuild_boundary_vertex_lists();
  m.ancestry.clear();
}

SurfaceMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("load_mesh: cannot open " + path);
  std::string header;
  std::getline(in, header);
  std::istringstream hs(header);
  std::string tag;
  int version = 0;
  hs >> tag >> version;
  if (tag != "SMESH" || version != 1)
    throw std::runtime_error("load_mesh: bad header in " + path);
  int np = 0, nt = 0, ndbc = 0, nnbc = 0;
  if (!(in >> np >> nt >> ndbc >> nnbc))
    throw std::runtime_error("load_mesh: bad counts line in " + path);
  SurfaceMesh m;
  m.X.resize(np, 3);
  for (int i = 0; i < np; ++i)
    if (!(in >> m.X(i, 0) >> m.X(i, 1) >> m.X(i, 2)))
      throw std::runtime_error("load_mesh: truncated vertex block");
  m.tri.resize(nt, 3);
  for (int t = 0; t < nt; ++t)
    if (!(in >> m.tri(t, 0) >> m.tri(t, 1) >> m.tri(t, 2)))
      throw std::runtime_error("load_mesh: truncated triangle block");
  for (int e = 0; e < ndbc + nnbc; ++e) {
    int a, b;
    std::string c;
    if (!(in >> a >> b >> c)) throw std::runtime_error("load_mesh: truncated boundary block");
    if (c == "D")
      m.dbc_edges.push_back({a, b});
    else if (c == "N")
      m.nbc_edges.push_back({a, b});
    else
      throw std::runtime_error("load_mesh: bad boundary class '" + c + "'");
  }
  m.rebuild_boundary_vertex_lists();

  // check duplicates within tolerance, and consistency of the boundary data
  const double tol = 1e-12;
  for (int i = 0; i < np; ++i)
    for (int j = i + 1; j < std::min(np, i + 40); ++j)  // neighbors in file order
      if ((m.X.row(i) - m.X.row(j)).norm() < tol)
        throw std::runtime_error("load_mesh: duplicate vertices " + std::to_string(i) + "," +
                                 std::to_string(j));
  if (m.dbc_edges.empty() && m.nbc_edges.empty()) finalize_boundary(m);
  validate_mesh(m);
  return m;
}

void save_mesh(const SurfaceMesh& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("save_mesh: cannot open " + path);
  out << "SMESH 1\n";
  out << m.np() << " " << m.nt() << " " << m.dbc_edges.size() << " " << m.nbc_edges.size()
      << "\n";
  out.precision(17);
  for (int i = 0; i < m.np(); ++i)
    out << m.X(i, 0) << " " << m.X(i, 1) << " " << m.X(i, 2) << "\n";
  for (int t = 0; t < m.nt(); ++t)
    out << m.tri(t, 0) << " " << m.tri(t, 1) << " " << m.tri(t, 2) << "\n";
  for (const auto& e : m.dbc_edges) out << e[0] << " " << e[1] << " D\n";
  for (const auto& e : m.nbc_edges) out << e[0] << " " << e[1] << " N\n";
}

}  // namespace geomcont
