#include "geomcont/refine.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <map>
#include <set>
#include <stdexcept>

namespace geomcont {

namespace {

struct Tri {
  std::array<int, 3> v;
  SurfaceMesh::Parent anc;
};

// local edge k of (v0,v1,v2) is (v[k], v[(k+1)%3])
int local_edge(const std::array<int, 3>& v, std::int64_t key) {
  for (int k = 0; k < 3; ++k)
    if (edge_key(v[k], v[(k + 1) % 3]) == key) return k;
  return -1;
}

double edge_len2(const SurfaceMesh& m, int a, int b) {
  return (m.X.row(a) - m.X.row(b)).squaredNorm();
}

// Bisect (P,Q,R) through the midpoint M of edge (P,Q); children stay CCW.
std::array<std::array<int, 3>, 2> bisect(const std::array<int, 3>& t, int k, int mid) {
  const int P = t[k], Q = t[(k + 1) % 3], R = t[(k + 2) % 3];
  return {{{P, mid, R}, {mid, Q, R}}};
}

}  // namespace

Vec apply_map(const SpMat& P, const Vec& f) { return P * f; }

RefineResult refine(const SurfaceMesh& m, const std::vector<int>& elems,
                    RefineStrategy strategy, bool keep_boundary) {
  const int nt = m.nt();
  for (int e : elems)
    if (e < 0 || e >= nt) throw std::runtime_error("refine: element index out of range");

  std::set<std::int64_t> boundary;
  std::map<std::int64_t, char> bd_class;  // 'D' or 'N'
  for (const auto& e : m.dbc_edges) {
    boundary.insert(edge_key(e[0], e[1]));
    bd_class[edge_key(e[0], e[1])] = 'D';
  }
  for (const auto& e : m.nbc_edges) {
    boundary.insert(edge_key(e[0], e[1]));
    bd_class[edge_key(e[0], e[1])] = 'N';
  }

  auto markable = [&](int a, int b) {
    return !(keep_boundary && boundary.count(edge_key(a, b)));
  };

  // reference edge: longest markable edge of the triangle
  auto ref_edge = [&](int t) -> int {
    int best = -1;
    double l2 = -1;
    for (int k = 0; k < 3; ++k) {
      int a = m.tri(t, k), b = m.tri(t, (k + 1) % 3);
      if (!markable(a, b)) continue;
      double l = edge_len2(m, a, b);
      if (l > l2) {
        l2 = l;
        best = k;
      }
    }
    return best;
  };

  std::set<std::int64_t> marked;
  if (strategy == RefineStrategy::RGB) {
    for (int t : elems)
      for (int k = 0; k < 3; ++k) {
        int a = m.tri(t, k), b = m.tri(t, (k + 1) % 3);
        if (markable(a, b)) marked.insert(edge_key(a, b));
      }
    // closure: a triangle with any marked edge must have its reference edge
    // marked; iterate to a fixed point
    bool changed = true;
    while (changed) {
      changed = false;
      for (int t = 0; t < nt; ++t) {
        bool any = false;
        for (int k = 0; k < 3; ++k)
          if (marked.count(edge_key(m.tri(t, k), m.tri(t, (k + 1) % 3)))) any = true;
        if (!any) continue;
        int r = ref_edge(t);
        if (r < 0) continue;  // all edges kept; bisect what is marked
        auto key = edge_key(m.tri(t, r), m.tri(t, (r + 1) % 3));
        if (!marked.count(key)) {
          marked.insert(key);
          changed = true;
        }
      }
    }
  } else {
    for (int t : elems) {
      int r = ref_edge(t);
      if (r >= 0) marked.insert(edge_key(m.tri(t, r), m.tri(t, (r + 1) % 3)));
    }
  }

  // create midpoints
  SurfaceMesh out;
  std::map<std::int64_t, int> mid;
  int np_new = m.np();
  for (auto key : marked) mid[key] = np_new++;
  out.X.resize(np_new, 3);
  out.X.topRows(m.np()) = m.X;
  std::vector<Eigen::Triplet<double>> pt;
  pt.reserve(m.np() + 2 * marked.size());
  for (int i = 0; i < m.np(); ++i) pt.emplace_back(i, i, 1.0);
  for (auto [key, id] : mid) {
    int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffff);
    out.X.row(id) = 0.5 * (m.X.row(a) + m.X.row(b));
    pt.emplace_back(id, a, 0.5);
    pt.emplace_back(id, b, 0.5);
  }

  int next_group = 0;
  for (const auto& a : m.ancestry) next_group = std::max(next_group, a.group + 1);

  std::vector<Tri> tris;
  tris.reserve(nt + 3 * marked.size());
  for (int t = 0; t < nt; ++t) {
    std::array<int, 3> v{m.tri(t, 0), m.tri(t, 1), m.tri(t, 2)};
    std::vector<int> mk;  // local marked edges
    for (int k = 0; k < 3; ++k)
      if (marked.count(edge_key(v[k], v[(k + 1) % 3]))) mk.push_back(k);
    SurfaceMesh::Parent old = m.ancestry.empty() ? SurfaceMesh::Parent{} : m.ancestry[t];
    if (mk.empty()) {
      tris.push_back({v, old});
      continue;
    }
    const int group = next_group++;
    auto emit = [&](const std::array<int, 3>& c, int nsib) {
      tris.push_back({c, SurfaceMesh::Parent{group, v, nsib}});
    };
    if (mk.size() == 3) {  // red
      const int m0 = mid[edge_key(v[0], v[1])], m1 = mid[edge_key(v[1], v[2])],
                m2 = mid[edge_key(v[2], v[0])];
      emit({v[0], m0, m2}, 4);
      emit({m0, v[1], m1}, 4);
      emit({m2, m1, v[2]}, 4);
      emit({m0, m1, m2}, 4);
    } else {
      // green (1 marked) or blue (2 marked): successive bisections, first
      // through the longest marked edge
      std::vector<std::array<int, 3>> work{v};
      std::vector<std::array<int, 3>> done;
      // collect marked edge keys of this triangle
      std::vector<std::int64_t> keys;
      for (int k : mk) keys.push_back(edge_key(v[k], v[(k + 1) % 3]));
      std::sort(keys.begin(), keys.end(), [&](std::int64_t x, std::int64_t y) {
        auto len = [&](std::int64_t key) {
          return edge_len2(m, static_cast<int>(key >> 32), static_cast<int>(key & 0xffffffff));
        };
        return len(x) > len(y);
      });
      for (auto key : keys) {
        std::vector<std::array<int, 3>> next;
        for (auto& w : work) {
          int k = local_edge(w, key);
          if (k < 0) {
            next.push_back(w);
            continue;
          }
          auto ch = bisect(w, k, mid[key]);
          next.push_back(ch[0]);
          next.push_back(ch[1]);
        }
        work = next;
      }
      for (auto& w : work) done.push_back(w);
      for (auto& c : done) emit(c, static_cast<int>(done.size()));
    }
  }

  out.tri.resize(tris.size(), 3);
  out.ancestry.resize(tris.size());
  for (size_t t = 0; t < tris.size(); ++t) {
    out.tri.row(t) << tris[t].v[0], tris[t].v[1], tris[t].v[2];
    out.ancestry[t] = tris[t].anc;
  }

  // split boundary edges
  auto push_bd = [&](std::vector<std::array<int, 2>>& list, const std::array<int, 2>& e) {
    auto key = edge_key(e[0], e[1]);
    auto it = mid.find(key);
    if (it == mid.end()) {
      list.push_back(e);
    } else {
      list.push_back({e[0], it->second});
      list.push_back({it->second, e[1]});
    }
  };
  for (const auto& e : m.dbc_edges) push_bd(out.dbc_edges, e);
  for (const auto& e : m.nbc_edges) push_bd(out.nbc_edges, e);
  out.rebuild_boundary_vertex_lists();

  RefineResult res;
  res.mesh = std::move(out);
  res.P.resize(np_new, m.np());
  res.P.setFromTriplets(pt.begin(), pt.end());
  return res;
}

CoarsenResult coarsen(const SurfaceMesh& m, const std::vector<int>& elems) {
  CoarsenResult res;
  const int nt = m.nt();
  if (m.ancestry.empty() || !m.has_ancestry()) {
    res.mesh = m;
    res.R.resize(m.np(), m.np());
    res.R.setIdentity();
    return res;
  }

  std::map<int, std::vector<int>> groups;  // group id -> member triangles
  for (int t = 0; t < nt; ++t)
    if (m.ancestry[t].group >= 0) groups[m.ancestry[t].group].push_back(t);

  std::set<int> req;
  for (int t : elems) {
    if (t < 0 || t >= nt) throw std::runtime_error("coarsen: element index out of range");
    int g = m.ancestry[t].group;
    if (g < 0) {
      std::cerr << "coarsen: ignoring root triangle " << t << "\n";
      continue;
    }
    req.insert(g);
  }

  // complete partial sets; drop incomplete groups (siblings refined further)
  std::set<int> active;
  for (int g : req) {
    const auto& mem = groups[g];
    if (static_cast<int>(mem.size()) == m.ancestry[mem[0]].nsib) active.insert(g);
  }

  // removal set per group: child vertices not in the parent triple
  auto removal = [&](int g) {
    std::set<int> rem;
    const auto& par = m.ancestry[groups[g][0]].verts;
    for (int t : groups[g])
      for (int k = 0; k < 3; ++k) {
        int v = m.tri(t, k);
        if (v != par[0] && v != par[1] && v != par[2]) rem.insert(v);
      }
    return rem;
  };

  // drop groups whose removed vertices are still referenced by surviving
  // triangles, until stable
  bool changed = true;
  while (changed) {
    changed = false;
    std::set<int> coarsened_tris;
    for (int g : active)
      for (int t : groups[g]) coarsened_tris.insert(t);
    std::vector<char> vertex_used(m.np(), 0);
    for (int t = 0; t < nt; ++t) {
      if (coarsened_tris.count(t)) continue;
      for (int k = 0; k < 3; ++k) vertex_used[m.tri(t, k)] = 1;
    }
    for (auto it = active.begin(); it != active.end();) {
      bool ok = true;
      for (int v : removal(*it))
        if (vertex_used[v]) ok = false;
      if (!ok) {
        it = active.erase(it);
        changed = true;
      } else {
        ++it;
      }
    }
  }

  if (active.empty()) {
    res.mesh = m;
    res.R.resize(m.np(), m.np());
    res.R.setIdentity();
    return res;
  }

  std::set<int> dead_tris, dead_verts;
  for (int g : active) {
    for (int t : groups[g]) dead_tris.insert(t);
    for (int v : removal(g)) dead_verts.insert(v);
  }

  // boundary-edge merge bookkeeping: removed boundary midpoints join their two
  // boundary neighbors into the parent edge
  std::map<std::int64_t, char> bd_class;
  for (const auto& e : m.dbc_edges) bd_class[edge_key(e[0], e[1])] = 'D';
  for (const auto& e : m.nbc_edges) bd_class[edge_key(e[0], e[1])] = 'N';
  std::map<std::int64_t, char> new_bd;
  std::map<int, std::vector<std::pair<int, char>>> bd_nbr;  // removed vert -> neighbors
  for (const auto& [key, cls] : bd_class) {
    int a = static_cast<int>(key >> 32), b = static_cast<int>(key & 0xffffffff);
    bool da = dead_verts.count(a), db = dead_verts.count(b);
    if (!da && !db) {
      new_bd[key] = cls;
    } else if (da != db) {
      int dv = da ? a : b, kv = da ? b : a;
      bd_nbr[dv].push_back({kv, cls});
    }
    // both endpoints removed cannot happen for one-level refinement
  }
  for (const auto& [dv, nbrs] : bd_nbr) {
    if (nbrs.size() == 2) new_bd[edge_key(nbrs[0].first, nbrs[1].first)] = nbrs[0].second;
  }

  // vertex remap
  std::vector<int> remap(m.np(), -1);
  int np_new = 0;
  std::vector<Eigen::Triplet<double>> rt;
  for (int v = 0; v < m.np(); ++v) {
    if (dead_verts.count(v)) continue;
    remap[v] = np_new;
    rt.emplace_back(np_new, v, 1.0);
    np_new++;
  }

  SurfaceMesh out;
  out.X.resize(np_new, 3);
  for (int v = 0; v < m.np(); ++v)
    if (remap[v] >= 0) out.X.row(remap[v]) = m.X.row(v);

  std::vector<Tri> tris;
  for (int t = 0; t < nt; ++t) {
    if (dead_tris.count(t)) continue;
    Tri tr;
    tr.v = {remap[m.tri(t, 0)], remap[m.tri(t, 1)], remap[m.tri(t, 2)]};
    tr.anc = m.ancestry[t];
    tris.push_back(tr);
  }
  for (int g : active) {
    const auto& par = m.ancestry[groups[g][0]].verts;
    Tri tr;
    tr.v = {remap[par[0]], remap[par[1]], remap[par[2]]};
    tr.anc = SurfaceMesh::Parent{};  // parent links beyond one level are not kept
    tris.push_back(tr);
  }
  out.tri.resize(tris.size(), 3);
  out.ancestry.resize(tris.size());
  for (size_t t = 0; t < tris.size(); ++t) {
    out.tri.row(t) << tris[t].v[0], tris[t].v[1], tris[t].v[2];
    out.ancestry[t] = tris[t].anc;
  }

  for (const auto& [key, cls] : new_bd) {
    std::array<int, 2> e{remap[static_cast<int>(key >> 32)],
                         remap[static_cast<int>(key & 0xffffffff)]};
    if (cls == 'D')
      out.dbc_edges.push_back(e);
    else
      out.nbc_edges.push_back(e);
  }
  out.rebuild_boundary_vertex_lists();

  res.mesh = std::move(out);
  res.R.resize(np_new, m.np());
  res.R.setFromTriplets(rt.begin(), rt.end());
  res.merged_groups = static_cast<int>(active.size());
  return res;
}

}  // namespace geomcont
