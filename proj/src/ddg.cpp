#include "geomcont/ddg.hpp"

#include <Eigen/SparseCholesky>

#include <cmath>
#include <set>
#include <stdexcept>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace geomcont {

namespace {

inline bool run_parallel(Exec ex, int n) {
#ifdef _OPENMP
  if (ex == Exec::Parallel) return true;
  if (ex == Exec::Serial) return false;
  return n > 8192 && omp_get_max_threads() > 1;
#else
  (void)ex;
  (void)n;
  return false;
#endif
}

struct TriGeom {
  std::array<double, 3> cot;    // cotangent at corner k (opposite edge k+1,k+2)
  std::array<double, 3> angle;  // interior angle at corner k
  double area;
};

TriGeom tri_geom(const SurfaceMesh& m, int t) {
  Eigen::Vector3d p[3] = {m.X.row(m.tri(t, 0)), m.X.row(m.tri(t, 1)), m.X.row(m.tri(t, 2))};
  TriGeom g;
  g.area = 0.5 * (p[1] - p[0]).cross(p[2] - p[0]).norm();
  for (int k = 0; k < 3; ++k) {
    Eigen::Vector3d u = p[(k + 1) % 3] - p[k], v = p[(k + 2) % 3] - p[k];
    const double dot = u.dot(v);
    const double crs = u.cross(v).norm();
    g.cot[k] = (crs > 0) ? dot / crs : std::numeric_limits<double>::infinity();
    g.angle[k] = std::atan2(crs, dot);
  }
  return g;
}

std::vector<std::vector<std::pair<int, int>>> vertex_corners(const SurfaceMesh& m) {
  std::vector<std::vector<std::pair<int, int>>> v2c(m.np());
  for (int t = 0; t < m.nt(); ++t)
    for (int k = 0; k < 3; ++k) v2c[m.tri(t, k)].push_back({t, k});
  return v2c;
}

}  // namespace

Eigen::MatrixX3d corner_angles(const SurfaceMesh& m) {
  Eigen::MatrixX3d a(m.nt(), 3);
  for (int t = 0; t < m.nt(); ++t) {
    auto g = tri_geom(m, t);
    a.row(t) << g.angle[0], g.angle[1], g.angle[2];
  }
  return a;
}

Eigen::MatrixX3d corner_mixed_areas(const SurfaceMesh& m) {
  Eigen::MatrixX3d am(m.nt(), 3);
#ifdef _OPENMP
#pragma omp parallel for if (m.nt() > 8192)
#endif
  for (int t = 0; t < m.nt(); ++t) {
    auto g = tri_geom(m, t);
    int obtuse = -1;
    for (int k = 0; k < 3; ++k)
      if (g.cot[k] < 0) obtuse = k;
    if (obtuse >= 0) {
      for (int k = 0; k < 3; ++k) am(t, k) = (k == obtuse) ? g.area / 2 : g.area / 4;
    } else {
      // rhomb through edge midpoints and circumcenter:
      // A_i = (|e_ij|^2 cot(angle_k) + |e_ik|^2 cot(angle_j)) / 8
      Eigen::Vector3d p[3] = {m.X.row(m.tri(t, 0)), m.X.row(m.tri(t, 1)),
                              m.X.row(m.tri(t, 2))};
      double l2[3];  // squared length of the edge opposite corner k
      for (int k = 0; k < 3; ++k) l2[k] = (p[(k + 1) % 3] - p[(k + 2) % 3]).squaredNorm();
      for (int k = 0; k < 3; ++k) {
        const int j = (k + 1) % 3, i = (k + 2) % 3;
        am(t, k) = (l2[j] * g.cot[j] + l2[i] * g.cot[i]) / 8.0;
      }
    }
  }
  return am;
}

SpMat cotan_laplacian(const SurfaceMesh& m, Exec ex) {
  const int nt = m.nt(), np = m.np();
  std::vector<Eigen::Triplet<double>> trip(12 * static_cast<size_t>(nt));
  const bool par = run_parallel(ex, nt);
#ifdef _OPENMP
#pragma omp parallel for if (par)
#endif
  for (int t = 0; t < nt; ++t) {
    auto g = tri_geom(m, t);
    if (!(g.area > 0))
      throw std::runtime_error("cotan_laplacian: degenerate triangle " + std::to_string(t));
    for (int k = 0; k < 3; ++k) {
      const int i = m.tri(t, (k + 1) % 3), j = m.tri(t, (k + 2) % 3);
      const double w = 0.5 * g.cot[k];
      const size_t base = 12 * static_cast<size_t>(t) + 4 * static_cast<size_t>(k);
      trip[base + 0] = {i, j, -w};
      trip[base + 1] = {j, i, -w};
      trip[base + 2] = {i, i, w};
      trip[base + 3] = {j, j, w};
    }
  }
  SpMat L(np, np);
  L.setFromTriplets(trip.begin(), trip.end());
  return L;
}

Vec lumped_mass(const SurfaceMesh& m, MassKind kind, Exec ex) {
  const int np = m.np();
  Vec d = Vec::Zero(np);
  if (kind == MassKind::Voronoi) {
    auto am = corner_mixed_areas(m);
    auto v2c = vertex_corners(m);
    const bool par = run_parallel(ex, np);
#ifdef _OPENMP
#pragma omp parallel for if (par)
#endif
    for (int v = 0; v < np; ++v)
      for (auto [t, k] : v2c[v]) d[v] += am(t, k);
  } else if (kind == MassKind::Barycentric) {
    Vec a = triangle_areas(m);
    auto v2c = vertex_corners(m);
    for (int v = 0; v < np; ++v)
      for (auto [t, k] : v2c[v]) d[v] += a[t] / 3.0;
  } else {
    throw std::runtime_error("lumped_mass: full mass matrix is not diagonal");
  }
  return d;
}

SpMat mass_matrix(const SurfaceMesh& m, MassKind kind, Exec ex) {
  const int np = m.np();
  if (kind == MassKind::Full) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(9 * static_cast<size_t>(m.nt()));
    Vec a = triangle_areas(m);
    for (int t = 0; t < m.nt(); ++t) {
      for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
          trip.emplace_back(m.tri(t, r), m.tri(t, c), a[t] * ((r == c) ? 1.0 / 6.0 : 1.0 / 12.0));
    }
    SpMat M(np, np);
    M.setFromTriplets(trip.begin(), trip.end());
    return M;
  }
  Vec d = lumped_mass(m, kind, ex);
  SpMat M(np, np);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(np);
  for (int i = 0; i < np; ++i) trip.emplace_back(i, i, d[i]);
  M.setFromTriplets(trip.begin(), trip.end());
  return M;
}

Eigen::MatrixX3d vertex_normals(const SurfaceMesh& m, double orientation,
                                const std::vector<NormalCorrection>& corrections, Exec ex) {
  const int np = m.np(), nt = m.nt();
  Eigen::MatrixX3d fn(nt, 3);
  Eigen::MatrixX3d ang = Eigen::MatrixX3d::Zero(nt, 3);
  const bool par = run_parallel(ex, nt);
#ifdef _OPENMP
#pragma omp parallel for if (par)
#endif
  for (int t = 0; t < nt; ++t) {
    Eigen::Vector3d a = m.X.row(m.tri(t, 0)), b = m.X.row(m.tri(t, 1)), c = m.X.row(m.tri(t, 2));
    Eigen::Vector3d n = (b - a).cross(c - a);
    const double nn = n.norm();
    if (nn > 0)
      fn.row(t) = (n / nn).transpose();
    else
      fn.row(t).setZero();
    auto g = tri_geom(m, t);
    ang.row(t) << g.angle[0], g.angle[1], g.angle[2];
  }
  auto v2c = vertex_corners(m);
  Eigen::MatrixX3d N = Eigen::MatrixX3d::Zero(np, 3);
#ifdef _OPENMP
#pragma omp parallel for if (par)
#endif
  for (int v = 0; v < np; ++v) {
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (auto [t, k] : v2c[v]) acc += ang(t, k) * fn.row(t).transpose();
    N.row(v) = orientation * acc.transpose();
  }
  for (const auto& cor : corrections) {
    if (cor.component < 0 || cor.component > 2)
      throw std::runtime_error("vertex_normals: bad correction component");
    for (int v : cor.verts) N(v, cor.component) = 0.0;
  }
  for (int v = 0; v < np; ++v) {
    const double nn = N.row(v).norm();
    if (nn <= 0)
      throw std::runtime_error("vertex_normals: zero normal at vertex " + std::to_string(v));
    N.row(v) /= nn;
  }
  return N;
}

MeanCurvature mean_curvature(const SurfaceMesh& m, const Eigen::MatrixX3d& N, const Vec& mass) {
  SpMat L = cotan_laplacian(m);
  Eigen::MatrixX3d LX = L * m.X;
  MeanCurvature mc;
  mc.weak = -0.5 * (LX.array() * N.array()).rowwise().sum();
  mc.H = mc.weak.array() / mass.array();
  return mc;
}

MeanCurvature mean_curvature_full(const SurfaceMesh& m, const Eigen::MatrixX3d& N,
                                  const SpMat& mass_full) {
  SpMat L = cotan_laplacian(m);
  Eigen::MatrixX3d LX = L * m.X;
  MeanCurvature mc;
  mc.weak = -0.5 * (LX.array() * N.array()).rowwise().sum();
  Eigen::SimplicialLDLT<SpMat> solver(mass_full);
  if (solver.info() != Eigen::Success)
    throw std::runtime_error("mean_curvature_full: mass factorization failed");
  mc.H = solver.solve(mc.weak);
  return mc;
}

CurvatureBundle discrete_curvatures(const SurfaceMesh& m, const Vec& H, const Vec& mass) {
  const int np = m.np();
  auto ang = corner_angles(m);
  auto v2c = vertex_corners(m);
  CurvatureBundle cb;
  cb.K_weak.resize(np);
  for (int v = 0; v < np; ++v) {
    double s = 0;
    for (auto [t, k] : v2c[v]) s += ang(t, k);
    cb.K_weak[v] = (m.is_boundary_vertex(v) ? M_PI : 2.0 * M_PI) - s;
  }
  cb.K = cb.K_weak.array() / mass.array();
  cb.k1.resize(np);
  cb.k2.resize(np);
  for (int v = 0; v < np; ++v) {
    const double D = std::max(H[v] * H[v] - cb.K[v], 0.0);
    const double s = std::sqrt(D);
    cb.k1[v] = H[v] + s;
    cb.k2[v] = H[v] - s;
  }
  return cb;
}

double area(const SurfaceMesh& m) { return triangle_areas(m).sum(); }

double volume(const SurfaceMesh& m, const Eigen::MatrixX3d& N, const Vec& mass) {
  double v = 0;
  for (int i = 0; i < m.np(); ++i) v += mass[i] * m.X.row(i).dot(N.row(i));
  return v / 3.0;
}

double boundary_cap_volume(const SurfaceMesh& m) {
  // directed boundary edges follow the winding of their unique triangle
  auto inc = edge_incidence(m);
  std::unordered_map<int, int> next;  // directed boundary chain a -> b
  for (int t = 0; t < m.nt(); ++t) {
    for (int k = 0; k < 3; ++k) {
      int a = m.tri(t, k), b = m.tri(t, (k + 1) % 3);
      if (inc[edge_key(a, b)].size() == 1) next[a] = b;
    }
  }
  double vol = 0;
  std::set<int> seen;
  for (const auto& [start, _] : next) {
    if (seen.count(start)) continue;
    std::vector<int> loop;
    int v = start;
    do {
      loop.push_back(v);
      seen.insert(v);
      auto it = next.find(v);
      if (it == next.end()) break;  // open chain; ignore
      v = it->second;
    } while (v != start && loop.size() <= next.size());
    if (loop.size() < 3 || v != start) continue;
    Eigen::Vector3d cen = Eigen::Vector3d::Zero();
    for (int p : loop) cen += m.X.row(p).transpose();
    cen /= static_cast<double>(loop.size());
    // cap fan traverses the reversed loop to close the surface consistently
    for (size_t i = 0; i < loop.size(); ++i) {
      Eigen::Vector3d a = m.X.row(loop[i]), b = m.X.row(loop[(i + 1) % loop.size()]);
      vol += b.dot(a.cross(cen)) / 6.0;
    }
  }
  return vol;
}

Eigen::MatrixX3d face_gradient(const SurfaceMesh& m, const Vec& f) {
  const int nt = m.nt();
  Eigen::MatrixX3d g(nt, 3);
  for (int t = 0; t < nt; ++t) {
    Eigen::Vector3d p[3] = {m.X.row(m.tri(t, 0)), m.X.row(m.tri(t, 1)), m.X.row(m.tri(t, 2))};
    Eigen::Vector3d n = (p[1] - p[0]).cross(p[2] - p[0]);
    const double a2 = n.norm();  // 2*area
    if (a2 <= 0) throw std::runtime_error("face_gradient: degenerate triangle");
    n /= a2;
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (int k = 0; k < 3; ++k) {
      // hat gradient of corner k: n x (opposite edge) / (2A)
      acc += f[m.tri(t, k)] * n.cross(p[(k + 2) % 3] - p[(k + 1) % 3]);
    }
    g.row(t) = acc.transpose() / a2;
  }
  return g;
}

Eigen::MatrixX3d surface_gradient(const SurfaceMesh& m, const Vec& f) {
  auto g = face_gradient(m, f);
  auto am = corner_mixed_areas(m);
  auto v2c = vertex_corners(m);
  Eigen::MatrixX3d out = Eigen::MatrixX3d::Zero(m.np(), 3);
  for (int v = 0; v < m.np(); ++v) {
    double w = 0;
    Eigen::Vector3d acc = Eigen::Vector3d::Zero();
    for (auto [t, k] : v2c[v]) {
      acc += am(t, k) * g.row(t).transpose();
      w += am(t, k);
    }
    if (w > 0) out.row(v) = acc.transpose() / w;
  }
  return out;
}

std::array<SpMat, 3> gradient_operators(const SurfaceMesh& m) {
  const int np = m.np(), nt = m.nt();
  auto am = corner_mixed_areas(m);
  auto v2c = vertex_corners(m);
  std::array<std::vector<Eigen::Triplet<double>>, 3> trip;
  for (int v = 0; v < np; ++v) {
    double w = 0;
    for (auto [t, k] : v2c[v]) w += am(t, k);
    if (w <= 0) continue;
    for (auto [t, k] : v2c[v]) {
      Eigen::Vector3d p[3] = {m.X.row(m.tri(t, 0)), m.X.row(m.tri(t, 1)), m.X.row(m.tri(t, 2))};
      Eigen::Vector3d n = (p[1] - p[0]).cross(p[2] - p[0]);
      const double a2 = n.norm();
      if (a2 <= 0) continue;
      n /= a2;
      for (int j = 0; j < 3; ++j) {
        Eigen::Vector3d hat = n.cross(p[(j + 2) % 3] - p[(j + 1) % 3]) / a2;
        const double s = am(t, k) / w;
        for (int axis = 0; axis < 3; ++axis)
          trip[axis].emplace_back(v, m.tri(t, j), s * hat[axis]);
      }
    }
  }
  std::array<SpMat, 3> ops;
  for (int axis = 0; axis < 3; ++axis) {
    ops[axis].resize(np, np);
    ops[axis].setFromTriplets(trip[axis].begin(), trip[axis].end());
  }
  return ops;
}

// ---------------------------------------------------------------------------
// exact shape derivatives along a normal field

namespace {

inline Eigen::Matrix3d crossmat(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0, -v.z(), v.y(), v.z(), 0, -v.x(), -v.y(), v.x(), 0;
  return m;
}

// gradients of cot(angle at corner k) w.r.t. the three vertex positions
struct CotGrad {
  Eigen::Vector3d d[3];  // w.r.t. corner 0, 1, 2 of the triangle
  double cot = 0;
  double angle = 0;
};

// corner k has adjacent vertices k+1, k+2
CotGrad cot_gradients(const Eigen::Vector3d* p, int k) {
  const Eigen::Vector3d P = p[(k + 1) % 3] - p[k];
  const Eigen::Vector3d Q = p[(k + 2) % 3] - p[k];
  Eigen::Vector3d n = P.cross(Q);
  const double nn = n.norm();
  CotGrad g;
  if (nn <= 0) return g;
  const Eigen::Vector3d nh = n / nn;
  g.cot = P.dot(Q) / nn;
  g.angle = std::atan2(nn, P.dot(Q));
  const Eigen::Vector3d dP = Q / nn - g.cot * Q.cross(nh) / nn;
  const Eigen::Vector3d dQ = P / nn - g.cot * nh.cross(P) / nn;
  g.d[(k + 1) % 3] = dP;
  g.d[(k + 2) % 3] = dQ;
  g.d[k] = -dP - dQ;
  return g;
}

}  // namespace

SpMat area_hessian_normal(const SurfaceMesh& m, const Eigen::MatrixX3d& N0) {
  const int np = m.np();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * static_cast<size_t>(m.nt()));
  for (int t = 0; t < m.nt(); ++t) {
    const int v[3] = {m.tri(t, 0), m.tri(t, 1), m.tri(t, 2)};
    Eigen::Vector3d p[3] = {m.X.row(v[0]), m.X.row(v[1]), m.X.row(v[2])};
    Eigen::Vector3d n = (p[1] - p[0]).cross(p[2] - p[0]);
    const double nn = n.norm();
    if (nn <= 0) continue;
    const Eigen::Vector3d nh = n / nn;
    // dn/dx_k = -[opp_k]_x with opp_k the opposite edge vector
    Eigen::Matrix3d P[3];
    for (int k = 0; k < 3; ++k)
      P[k] = -crossmat(p[(k + 2) % 3] - p[(k + 1) % 3]);
    const Eigen::Matrix3d W = (Eigen::Matrix3d::Identity() - nh * nh.transpose()) / (2 * nn);
    const Eigen::Matrix3d C = 0.5 * crossmat(nh);
    for (int a = 0; a < 3; ++a)
      for (int b = 0; b < 3; ++b) {
        Eigen::Matrix3d blk = P[a].transpose() * W * P[b];
        // bilinear term of n = (p1-p0)x(p2-p0): pairs (0,1),(1,2) get -C,
        // the pair (0,2) gets +C, diagonal none; transposes flip the sign
        if (a != b) {
          const bool plus = (a == 0 && b == 2) || (a == 1 && b == 0) || (a == 2 && b == 1);
          blk += plus ? C : (-C).eval();
        }
        const double val =
            Eigen::Vector3d(N0.row(v[a])).dot(blk * Eigen::Vector3d(N0.row(v[b])));
        if (val != 0) trip.emplace_back(v[a], v[b], val);
      }
  }
  SpMat H(np, np);
  H.setFromTriplets(trip.begin(), trip.end());
  return H;
}

SpMat stiffness_action_gradient_normal(const SurfaceMesh& m, const Vec& w,
                                       const Eigen::MatrixX3d& N0) {
  const int np = m.np();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(27 * static_cast<size_t>(m.nt()));
  for (int t = 0; t < m.nt(); ++t) {
    const int v[3] = {m.tri(t, 0), m.tri(t, 1), m.tri(t, 2)};
    Eigen::Vector3d p[3] = {m.X.row(v[0]), m.X.row(v[1]), m.X.row(v[2])};
    CotGrad cg[3];
    for (int k = 0; k < 3; ++k) cg[k] = cot_gradients(p, k);
    // E_T = 1/4 sum_k cot_k (w_i - w_j)^2 over the edge (i,j) opposite k;
    // rows are d(dE/dw_row)/dX_col
    for (int row = 0; row < 3; ++row) {
      const int kprev = (row + 1) % 3;  // angle opposite edge (row, row+2)
      const int knext = (row + 2) % 3;  // angle opposite edge (row, row+1)
      const double dw_prev = w[v[row]] - w[v[(row + 2) % 3]];
      const double dw_next = w[v[row]] - w[v[(row + 1) % 3]];
      for (int col = 0; col < 3; ++col) {
        Eigen::Vector3d gvec = 0.5 * (dw_prev * cg[kprev].d[col] + dw_next * cg[knext].d[col]);
        const double val = gvec.dot(N0.row(v[col]));
        if (val != 0) trip.emplace_back(v[row], v[col], val);
      }
    }
  }
  SpMat G(np, np);
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

SpMat angle_deficit_gradient_normal(const SurfaceMesh& m, const Eigen::MatrixX3d& N0) {
  const int np = m.np();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(9 * static_cast<size_t>(m.nt()));
  for (int t = 0; t < m.nt(); ++t) {
    const int v[3] = {m.tri(t, 0), m.tri(t, 1), m.tri(t, 2)};
    Eigen::Vector3d p[3] = {m.X.row(v[0]), m.X.row(v[1]), m.X.row(v[2])};
    for (int k = 0; k < 3; ++k) {
      CotGrad cg = cot_gradients(p, k);
      const double s = std::sin(cg.angle);
      // deficit loses this angle: d(deficit)/dX = -dtheta = sin^2(theta) dcot
      for (int col = 0; col < 3; ++col) {
        const double val = s * s * cg.d[col].dot(N0.row(v[col]));
        if (val != 0) trip.emplace_back(v[k], v[col], val);
      }
    }
  }
  SpMat G(np, np);
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

SpMat mass_gradient_normal(const SurfaceMesh& m, const Eigen::MatrixX3d& N0) {
  const int np = m.np();
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(27 * static_cast<size_t>(m.nt()));
  for (int t = 0; t < m.nt(); ++t) {
    const int v[3] = {m.tri(t, 0), m.tri(t, 1), m.tri(t, 2)};
    Eigen::Vector3d p[3] = {m.X.row(v[0]), m.X.row(v[1]), m.X.row(v[2])};
    Eigen::Vector3d n = (p[1] - p[0]).cross(p[2] - p[0]);
    const double nn = n.norm();
    if (nn <= 0) continue;
    const Eigen::Vector3d nh = n / nn;
    CotGrad cg[3];
    int obtuse = -1;
    for (int k = 0; k < 3; ++k) {
      cg[k] = cot_gradients(p, k);
      if (cg[k].cot < 0) obtuse = k;
    }
    // area gradient: dA/dx_k = (opp_k x nh) / 2 with opp_k = p_{k+1} - p_{k+2}
    Eigen::Vector3d dA[3];
    for (int k = 0; k < 3; ++k) {
      const Eigen::Vector3d opp = p[(k + 1) % 3] - p[(k + 2) % 3];
      dA[k] = 0.5 * opp.cross(nh);
    }
    if (obtuse >= 0) {
      for (int corner = 0; corner < 3; ++corner) {
        const double share = (corner == obtuse) ? 0.5 : 0.25;
        for (int col = 0; col < 3; ++col) {
          const double val = share * dA[col].dot(N0.row(v[col]));
          if (val != 0) trip.emplace_back(v[corner], v[col], val);
        }
      }
    } else {
      // A_m(corner) = (l2_next cot_next + l2_prev cot_prev) / 8, where
      // l2_k / cot_k belong to the edge opposite corner k
      double l2[3];
      for (int k = 0; k < 3; ++k) l2[k] = (p[(k + 1) % 3] - p[(k + 2) % 3]).squaredNorm();
      // dl2_k / dx: edge (k+1, k+2)
      for (int corner = 0; corner < 3; ++corner) {
        const int i = (corner + 1) % 3, j = (corner + 2) % 3;
        for (int col = 0; col < 3; ++col) {
          Eigen::Vector3d g = Eigen::Vector3d::Zero();
          // term l2[j] cot[j] / 8, edge opposite j is (corner, i)
          g += l2[j] / 8.0 * cg[j].d[col];
          if (col == corner) g += cg[j].cot / 4.0 * (p[corner] - p[i]);
          if (col == i) g += cg[j].cot / 4.0 * (p[i] - p[corner]);
          // term l2[i] cot[i] / 8, edge opposite i is (corner, j)
          g += l2[i] / 8.0 * cg[i].d[col];
          if (col == corner) g += cg[i].cot / 4.0 * (p[corner] - p[j]);
          if (col == j) g += cg[i].cot / 4.0 * (p[j] - p[corner]);
          const double val = g.dot(N0.row(v[col]));
          if (val != 0) trip.emplace_back(v[corner], v[col], val);
        }
      }
    }
  }
  SpMat G(np, np);
  G.setFromTriplets(trip.begin(), trip.end());
  return G;
}

SpMat jacobi_operator(const SpMat& L, const Vec& mass, const Vec& H, const Vec& K) {
  SpMat J = L;
  const int n = static_cast<int>(mass.size());
  SpMat D(n, n);
  std::vector<Eigen::Triplet<double>> trip;
  trip.reserve(n);
  for (int i = 0; i < n; ++i)
    trip.emplace_back(i, i, mass[i] * (4.0 * H[i] * H[i] - 2.0 * K[i]));
  D.setFromTriplets(trip.begin(), trip.end());
  return J - D;
}

}  // namespace geomcont
