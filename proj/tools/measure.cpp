// scratch diagnostics for discrete-gradient identities
#include "geomcont/ddg.hpp"
#include "geomcont/shapes.hpp"

#include <cstdio>
#include <random>

using namespace geomcont;

namespace {

struct Residual {
  SurfaceMesh m0;
  Eigen::MatrixX3d N0;
  double H0;
  bool refresh_normals;

  Vec eval(const Vec& u) const {
    SurfaceMesh m = m0;
    for (int i = 0; i < m.np(); ++i) m.X.row(i) += u[i] * N0.row(i);
    Eigen::MatrixX3d N = refresh_normals ? vertex_normals(m) : N0;
    SpMat L = cotan_laplacian(m);
    Eigen::MatrixX3d LX = L * m.X;
    Vec mass = lumped_mass(m, MassKind::Voronoi);
    Vec G = -(LX.array() * N.array()).rowwise().sum() - 2.0 * H0 * mass.array();
    return G;
  }
};

double vol_of(const SurfaceMesh& m0, const Eigen::MatrixX3d& N0, const Vec& u) {
  SurfaceMesh m = m0;
  for (int i = 0; i < m.np(); ++i) m.X.row(i) += u[i] * N0.row(i);
  auto N = vertex_normals(m);
  Vec mass = lumped_mass(m, MassKind::Voronoi);
  return volume(m, N, mass);
}

double area_of(const SurfaceMesh& m0, const Eigen::MatrixX3d& N0, const Vec& u) {
  SurfaceMesh m = m0;
  for (int i = 0; i < m.np(); ++i) m.X.row(i) += u[i] * N0.row(i);
  return area(m);
}

}  // namespace

int main() {
  std::mt19937 rng(11);
  std::normal_distribution<double> g;

  for (int level : {2, 3}) {
    auto m = icosphere(level);
    auto N0 = vertex_normals(m);
    Vec mass = lumped_mass(m, MassKind::Voronoi);
    auto mc = mean_curvature(m, N0, mass);
    auto cb = discrete_curvatures(m, mc.H, mass);
    const int np = m.np();

    Vec phi(np);
    for (int i = 0; i < np; ++i) phi[i] = g(rng);

    // volume gradient identity: dV[phi] vs sum(M phi)
    {
      const double eps = 1e-6;
      Vec up = eps * phi, um = -eps * phi;
      double fd = (vol_of(m, N0, up) - vol_of(m, N0, um)) / (2 * eps);
      double an = mass.dot(phi);
      std::printf("level %d: V' fd=%.8f  Mphi=%.8f  rel=%.3e\n", level, fd, an,
                  std::abs(fd - an) / std::abs(an));
    }
    // area gradient identity: dA[phi] vs -2 (MH)'phi
    {
      const double eps = 1e-6;
      double fd = (area_of(m, N0, eps * phi) - area_of(m, N0, -eps * phi)) / (2 * eps);
      double an = -2.0 * mc.weak.dot(phi);
      std::printf("level %d: A' fd=%.8f  -2MHphi=%.8f  rel=%.3e\n", level, fd, an,
                  std::abs(fd - an) / std::abs(an));
    }

    // Jacobian of G vs candidates
    for (bool refresh : {true, false}) {
      Residual R{m, N0, -1.0, refresh};
      Eigen::MatrixXd Jfd(np, np);
      const double eps = 1e-6;
      for (int j = 0; j < np; ++j) {
        Vec e = Vec::Zero(np);
        e[j] = eps;
        Jfd.col(j) = (R.eval(e) - R.eval(-e)) / (2 * eps);
      }
      SpMat L = cotan_laplacian(m);
      Eigen::MatrixXd J1 = -Eigen::MatrixXd(jacobi_operator(L, mass, mc.H, cb.K));
      // variant with the H0 mass-derivative term: -(L + 2 M K) + 4 H0 M H
      Eigen::MatrixXd J2 = -Eigen::MatrixXd(L);
      for (int i = 0; i < np; ++i) {
        J2(i, i) -= 2.0 * mass[i] * cb.K[i];
        J2(i, i) += 4.0 * (-1.0) * mass[i] * mc.H[i];
      }
      double n = Jfd.norm();
      std::printf("level %d refreshN=%d: |Jfd|=%.3e  rel(-J_jacobi)=%.3e  rel(-L-2MK+4H0MH)=%.3e\n",
                  level, refresh ? 1 : 0, n, (Jfd - J1).norm() / n, (Jfd - J2).norm() / n);
    }
  }
  return 0;
}
