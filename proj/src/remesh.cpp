#include "geomcont/remesh.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <set>
#include <stdexcept>

namespace geomcont {

namespace {

Eigen::Vector3d tri_normal(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                           const Eigen::Vector3d& c) {
  return (b - a).cross(c - a);
}

// angle at vertex opposite to edge (a,b) in triangle (a,b,c) -> angle at c
double opposite_angle(const Eigen::Vector3d& a, const Eigen::Vector3d& b,
                      const Eigen::Vector3d& c) {
  Eigen::Vector3d u = a - c, v = b - c;
  double cosv = u.dot(v) / (u.norm() * v.norm());
  cosv = std::clamp(cosv, -1.0, 1.0);
  return std::acos(cosv);
}

}  // namespace

SurfaceMesh retriangulate(const SurfaceMesh& m) {
  SurfaceMesh out = m;
  out.ancestry.clear();

  std::set<std::int64_t> bd;
  for (const auto& e : out.dbc_edges) bd.insert(edge_key(e[0], e[1]));
  for (const auto& e : out.nbc_edges) bd.insert(edge_key(e[0], e[1]));

  // valence bookkeeping for co-circular tie-breaking
  std::vector<int> val(out.np(), 0);
  {
    auto inc0 = edge_incidence(out);
    for (auto& [key, ts] : inc0) {
      val[static_cast<int>(key >> 32)]++;
      val[static_cast<int>(key & 0xffffffff)]++;
    }
  }
  auto target = [&](int v) { return out.is_boundary_vertex(v) ? 4 : 6; };

  const int max_sweeps = 100;
  for (int sweep = 0; sweep < max_sweeps; ++sweep) {
    auto inc = edge_incidence(out);
    std::vector<char> used(out.nt(), 0);
    int flips = 0;
    for (auto& [key, ts] : inc) {
      if (ts.size() != 2 || bd.count(key)) continue;
      int t1 = ts[0], t2 = ts[1];
      if (used[t1] || used[t2]) continue;
      const int a0 = static_cast<int>(key >> 32), b0 = static_cast<int>(key & 0xffffffff);
      // orient: t1 holds directed edge a->b, t2 holds b->a
      int a = -1, b = -1, c = -1, d = -1;
      for (int k = 0; k < 3; ++k) {
        int u = out.tri(t1, k), v = out.tri(t1, (k + 1) % 3);
        if ((u == a0 && v == b0) || (u == b0 && v == a0)) {
          a = u;
          b = v;
          c = out.tri(t1, (k + 2) % 3);
        }
      }
      for (int k = 0; k < 3; ++k) {
        int u = out.tri(t2, k), v = out.tri(t2, (k + 1) % 3);
        if (u == b && v == a) d = out.tri(t2, (k + 2) % 3);
      }
      if (d < 0) continue;  // inconsistent orientation across the edge
      Eigen::Vector3d A = out.X.row(a), B = out.X.row(b), C = out.X.row(c), D = out.X.row(d);
      const double ang = opposite_angle(A, B, C) + opposite_angle(B, A, D);
      bool want = ang > M_PI + 1e-10;
      if (!want && std::abs(ang - M_PI) <= 1e-10) {
        // co-circular tie: flip only when it evens out vertex valences
        auto dev = [&](int v, int delta) {
          int e = val[v] + delta - target(v);
          return e * e;
        };
        const int before = dev(a, 0) + dev(b, 0) + dev(c, 0) + dev(d, 0);
        const int after = dev(a, -1) + dev(b, -1) + dev(c, 1) + dev(d, 1);
        want = after < before;
      }
      if (!want) continue;
      // unfold the pair across (a,b) and require the new edge to cross it
      const double L = (B - A).norm();
      if (L < 1e-300) continue;
      auto unfold = [&](const Eigen::Vector3d& P, double sign) -> Eigen::Vector2d {
        double x = (P - A).dot(B - A) / L;
        double y2 = (P - A).squaredNorm() - x * x;
        return {x, sign * std::sqrt(std::max(y2, 0.0))};
      };
      Eigen::Vector2d Cu = unfold(C, 1.0), Du = unfold(D, -1.0);
      if (Cu.y() - Du.y() < 1e-14) continue;
      const double xcross = Cu.x() + (Du.x() - Cu.x()) * Cu.y() / (Cu.y() - Du.y());
      if (!(xcross > 1e-12 * L && xcross < L * (1 - 1e-12))) continue;
      if (triangle_area(A, D, C) <= 0 || triangle_area(D, B, C) <= 0) continue;
      out.tri.row(t1) << a, d, c;
      out.tri.row(t2) << d, b, c;
      val[a]--;
      val[b]--;
      val[c]++;
      val[d]++;
      used[t1] = used[t2] = 1;
      ++flips;
    }
    if (flips == 0) break;
  }
  return out;
}

SurfaceMesh degcoarsen(const SurfaceMesh& mesh, double sigma, int iters, bool keep_boundary) {
  SurfaceMesh cur = mesh;
  cur.ancestry.clear();

  for (int pass = 0; pass < iters; ++pass) {
    const int nt = cur.nt();
    if (nt == 0) break;
    Vec dist(nt);
    for (int t = 0; t < nt; ++t)
      dist[t] = triangle_distortion(cur.X.row(cur.tri(t, 0)), cur.X.row(cur.tri(t, 1)),
                                    cur.X.row(cur.tri(t, 2)));
    std::vector<int> order(nt);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return dist[i] > dist[j]; });
    const int nworst = static_cast<int>(std::ceil(sigma * nt));

    auto inc = edge_incidence(cur);
    std::map<std::int64_t, char> bd;
    for (const auto& e : cur.dbc_edges) bd[edge_key(e[0], e[1])] = 'D';
    for (const auto& e : cur.nbc_edges) bd[edge_key(e[0], e[1])] = 'N';

    // vertex -> triangles
    std::vector<std::vector<int>> v2t(cur.np());
    for (int t = 0; t < nt; ++t)
      for (int k = 0; k < 3; ++k) v2t[cur.tri(t, k)].push_back(t);

    std::vector<char> tri_dead(nt, 0), vert_dead(cur.np(), 0), touched(nt, 0);
    Eigen::MatrixX3d Xw = cur.X;
    int collapses = 0;

    for (int oi = 0; oi < nworst; ++oi) {
      const int t = order[oi];
      if (tri_dead[t] || touched[t]) continue;
      std::array<int, 3> v{cur.tri(t, 0), cur.tri(t, 1), cur.tri(t, 2)};
      if (vert_dead[v[0]] || vert_dead[v[1]] || vert_dead[v[2]]) continue;
      if (keep_boundary &&
          (cur.is_boundary_vertex(v[0]) || cur.is_boundary_vertex(v[1]) ||
           cur.is_boundary_vertex(v[2])))
        continue;
      // shortest edge
      int ka = 0;
      double best = std::numeric_limits<double>::max();
      for (int k = 0; k < 3; ++k) {
        double l = (Xw.row(v[k]) - Xw.row(v[(k + 1) % 3])).squaredNorm();
        if (l < best) {
          best = l;
          ka = k;
        }
      }
      int a = v[ka], b = v[(ka + 1) % 3];
      const bool abd = cur.is_boundary_vertex(a), bbd = cur.is_boundary_vertex(b);
      auto ekey = edge_key(a, b);
      const bool edge_bd = bd.count(ekey) > 0;
      if (abd && bbd && !edge_bd) continue;  // chord between boundary points: pinch
      Eigen::Vector3d target;
      if (abd && !bbd)
        target = Xw.row(a);
      else if (bbd && !abd)
        target = Xw.row(b);
      else
        target = 0.5 * (Xw.row(a) + Xw.row(b));

      // link condition: common neighbors of a,b must be opposite vertices of
      // the triangles sharing (a,b)
      auto nbrs = [&](int p) {
        std::set<int> s;
        for (int tt : v2t[p]) {
          if (tri_dead[tt]) continue;
          for (int k = 0; k < 3; ++k)
            if (cur.tri(tt, k) != p && !vert_dead[cur.tri(tt, k)]) s.insert(cur.tri(tt, k));
        }
        return s;
      };
      auto na = nbrs(a), nb = nbrs(b);
      std::vector<int> common;
      std::set_intersection(na.begin(), na.end(), nb.begin(), nb.end(),
                            std::back_inserter(common));
      std::set<int> opp;
      std::vector<int> shared_tris;
      for (int tt : v2t[a]) {
        if (tri_dead[tt]) continue;
        bool hasb = false;
        int o = -1;
        for (int k = 0; k < 3; ++k) {
          if (cur.tri(tt, k) == b) hasb = true;
          if (cur.tri(tt, k) != a && cur.tri(tt, k) != b) o = cur.tri(tt, k);
        }
        if (hasb) {
          shared_tris.push_back(tt);
          opp.insert(o);
        }
      }
      if (common.size() != opp.size()) continue;
      bool link_ok = true;
      for (int cv : common)
        if (!opp.count(cv)) link_ok = false;
      if (!link_ok) continue;

      // simulate: surviving triangles keep orientation and positive area
      bool geom_ok = true;
      std::vector<int> ring;
      for (int tt : v2t[a]) if (!tri_dead[tt]) ring.push_back(tt);
      for (int tt : v2t[b]) if (!tri_dead[tt]) ring.push_back(tt);
      for (int tt : ring) {
        bool is_shared = std::find(shared_tris.begin(), shared_tris.end(), tt) != shared_tris.end();
        if (is_shared) continue;
        Eigen::Vector3d p[3], q[3];
        for (int k = 0; k < 3; ++k) {
          int vv = cur.tri(tt, k);
          p[k] = Xw.row(vv);
          q[k] = (vv == a || vv == b) ? target : Eigen::Vector3d(Xw.row(vv));
        }
        Eigen::Vector3d n0 = tri_normal(p[0], p[1], p[2]), n1 = tri_normal(q[0], q[1], q[2]);
        if (n1.norm() < 1e-14 * n0.norm() || n0.dot(n1) <= 0) {
          geom_ok = false;
          break;
        }
      }
      if (!geom_ok) continue;

      // execute: b merges into a
      Xw.row(a) = target;
      vert_dead[b] = 1;
      for (int tt : shared_tris) tri_dead[tt] = 1;
      for (int tt : v2t[b]) {
        if (tri_dead[tt]) continue;
        for (int k = 0; k < 3; ++k)
          if (cur.tri(tt, k) == b) cur.tri(tt, k) = a;
        v2t[a].push_back(tt);
      }
      for (int tt : v2t[a])
        if (!tri_dead[tt]) touched[tt] = 1;
      // boundary edges through b now run through a
      if (edge_bd) bd.erase(ekey);
      std::map<std::int64_t, char> bd2;
      for (auto& [key, cls] : bd) {
        int ea = static_cast<int>(key >> 32), eb = static_cast<int>(key & 0xffffffff);
        if (ea == b) ea = a;
        if (eb == b) eb = a;
        if (ea != eb) bd2[edge_key(ea, eb)] = cls;
      }
      bd.swap(bd2);
      ++collapses;
    }

    // compact
    SurfaceMesh nxt;
    std::vector<int> remap(cur.np(), -1);
    int np_new = 0;
    for (int vtx = 0; vtx < cur.np(); ++vtx)
      if (!vert_dead[vtx]) remap[vtx] = np_new++;
    nxt.X.resize(np_new, 3);
    for (int vtx = 0; vtx < cur.np(); ++vtx)
      if (remap[vtx] >= 0) nxt.X.row(remap[vtx]) = Xw.row(vtx);
    std::vector<std::array<int, 3>> tris;
    for (int t = 0; t < nt; ++t) {
      if (tri_dead[t]) continue;
      tris.push_back({remap[cur.tri(t, 0)], remap[cur.tri(t, 1)], remap[cur.tri(t, 2)]});
    }
    nxt.tri.resize(tris.size(), 3);
    for (size_t t = 0; t < tris.size(); ++t)
      nxt.tri.row(t) << tris[t][0], tris[t][1], tris[t][2];
    for (auto& [key, cls] : bd) {
      std::array<int, 2> e{remap[static_cast<int>(key >> 32)],
                           remap[static_cast<int>(key & 0xffffffff)]};
      if (cls == 'D')
        nxt.dbc_edges.push_back(e);
      else
        nxt.nbc_edges.push_back(e);
    }
    nxt.rebuild_boundary_vertex_lists();
    cur = std::move(nxt);
    if (collapses == 0) break;
  }
  return cur;
}

SurfaceMesh move_points(const SurfaceMesh& mesh, double dt, int iters,
                        const BoundaryProject& project) {
  SurfaceMesh cur = mesh;
  cur.ancestry.clear();
  const bool pin_boundary = !project;

  for (int it = 0; it < iters; ++it) {
    const int np = cur.np(), nt = cur.nt();
    // edges and mean length
    std::set<std::int64_t> eset;
    for (int t = 0; t < nt; ++t)
      for (int k = 0; k < 3; ++k) eset.insert(edge_key(cur.tri(t, k), cur.tri(t, (k + 1) % 3)));
    double mean = 0;
    for (auto key : eset)
      mean += (cur.X.row(static_cast<int>(key >> 32)) -
               cur.X.row(static_cast<int>(key & 0xffffffff)))
                  .norm();
    mean /= static_cast<double>(eset.size());
    const double d0 = 1.2 * mean;

    // angle-weighted vertex normals for the tangent projection
    Eigen::MatrixX3d N = Eigen::MatrixX3d::Zero(np, 3);
    for (int t = 0; t < nt; ++t) {
      Eigen::Vector3d a = cur.X.row(cur.tri(t, 0)), b = cur.X.row(cur.tri(t, 1)),
                      c = cur.X.row(cur.tri(t, 2));
      Eigen::Vector3d n = tri_normal(a, b, c).normalized();
      const Eigen::Vector3d* p[3] = {&a, &b, &c};
      for (int k = 0; k < 3; ++k) {
        Eigen::Vector3d u = *p[(k + 1) % 3] - *p[k], v = *p[(k + 2) % 3] - *p[k];
        double w = std::acos(std::clamp(u.dot(v) / (u.norm() * v.norm()), -1.0, 1.0));
        N.row(cur.tri(t, k)) += w * n;
      }
    }
    for (int i = 0; i < np; ++i) {
      double nn = N.row(i).norm();
      if (nn > 0) N.row(i) /= nn;
    }

    Eigen::MatrixX3d F = Eigen::MatrixX3d::Zero(np, 3);
    for (auto key : eset) {
      int i = static_cast<int>(key >> 32), j = static_cast<int>(key & 0xffffffff);
      Eigen::Vector3d d = cur.X.row(i) - cur.X.row(j);
      double L = d.norm();
      double f = std::max(d0 - L, 0.0);  // repulsive only
      if (f <= 0 || L < 1e-300) continue;
      Eigen::Vector3d dir = d / L;
      F.row(i) += f * dir;
      F.row(j) -= f * dir;
    }

    double step = dt;
    bool ok = false;
    for (int attempt = 0; attempt < 6; ++attempt) {
      Eigen::MatrixX3d Xn = cur.X;
      for (int i = 0; i < np; ++i) {
        Eigen::Vector3d disp = step * F.row(i).transpose();
        if (cur.is_boundary_vertex(i)) {
          if (!pin_boundary)
            Xn.row(i) = project(i, cur.X.row(i).transpose() + disp).transpose();
        } else {
          disp -= disp.dot(N.row(i)) * N.row(i).transpose();  // stay on the surface
          Xn.row(i) = cur.X.row(i) + disp.transpose();
        }
      }
      bool inverted = false;
      for (int t = 0; t < nt && !inverted; ++t) {
        Eigen::Vector3d n0 = tri_normal(cur.X.row(cur.tri(t, 0)), cur.X.row(cur.tri(t, 1)),
                                        cur.X.row(cur.tri(t, 2)));
        Eigen::Vector3d n1 = tri_normal(Xn.row(cur.tri(t, 0)), Xn.row(cur.tri(t, 1)),
                                        Xn.row(cur.tri(t, 2)));
        if (n1.norm() <= 0 || n0.dot(n1) <= 0) inverted = true;
      }
      if (!inverted) {
        cur.X = Xn;
        ok = true;
        break;
      }
      step *= 0.5;
    }
    if (!ok)
      throw std::runtime_error("move_points: triangle inversion persists after 5 halvings at iteration " +
                               std::to_string(it));
    cur = retriangulate(cur);
  }
  return cur;
}

}  // namespace geomcont
