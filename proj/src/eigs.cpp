#include "geomcont/eigs.hpp"

#include <Eigen/Dense>
#include <Eigen/SparseLU>

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace geomcont {

namespace {

// deterministic start vector
Vec pseudo_random(int n) {
  Vec v(n);
  std::uint64_t s = 0x243f6a8885a308d3ull;
  for (int i = 0; i < n; ++i) {
    s = s * 6364136223846793005ull + 1442695040888963407ull;
    v[i] = static_cast<double>((s >> 11) & 0xfffffffffffull) / double(1ull << 44) - 0.5;
  }
  return v;
}

}  // namespace

PencilEigs pencil_eigs_dense(const Eigen::MatrixXd& A, const Vec& mass, double sigma,
                             int neig) {
  // shift-invert to a standard eigenproblem: C = (A - sigma B)^{-1} B has
  // eigenvalues 1/(mu - sigma); infinite pencil eigenvalues map to zero
  const int n = static_cast<int>(A.rows());
  Eigen::MatrixXd B = Eigen::MatrixXd::Zero(n, n);
  for (int i = 0; i < n; ++i) B(i, i) = mass[i];
  double s = sigma;
  Eigen::MatrixXd C;
  bool ok = false;
  for (int attempt = 0; attempt < 3 && !ok; ++attempt) {
    Eigen::FullPivLU<Eigen::MatrixXd> lu(A - s * B);
    if (lu.isInvertible()) {
      C = lu.solve(B);
      ok = true;
    } else {
      s -= 1e-6 * (1.0 + std::abs(s)) * (attempt + 1);
    }
  }
  PencilEigs out;
  if (!ok) {
    out.converged = false;
    return out;
  }
  Eigen::EigenSolver<Eigen::MatrixXd> es(C, true);
  if (es.info() != Eigen::Success) {
    out.converged = false;
    return out;
  }
  std::vector<std::pair<double, int>> order;  // by |mu - sigma| = 1/|nu|
  for (int i = 0; i < n; ++i) {
    const std::complex<double> nu = es.eigenvalues()[i];
    if (std::abs(nu) < 1e-13) continue;  // infinite pencil eigenvalue
    order.push_back({1.0 / std::abs(nu), i});
  }
  std::sort(order.begin(), order.end());
  const int k = std::min<int>(neig, static_cast<int>(order.size()));
  out.vectors.resize(n, k);
  for (int j = 0; j < k; ++j) {
    const int i = order[j].second;
    out.values.push_back(s + 1.0 / es.eigenvalues()[i]);
    out.vectors.col(j) = es.eigenvectors().col(i).real();
  }
  out.converged = true;
  return out;
}

PencilEigs pencil_eigs(const SpMat& A, const Vec& mass, double sigma, int neig, int subspace) {
  const int n = static_cast<int>(A.rows());
  if (n <= 260) return pencil_eigs_dense(Eigen::MatrixXd(A), mass, sigma, neig);

  SpMat B(n, n);
  {
    std::vector<Eigen::Triplet<double>> trip;
    for (int i = 0; i < n; ++i)
      if (mass[i] != 0.0) trip.emplace_back(i, i, mass[i]);
    B.setFromTriplets(trip.begin(), trip.end());
  }
  SpMat K = A - sigma * B;
  Eigen::SparseLU<SpMat> lu;
  lu.analyzePattern(K);
  lu.factorize(K);
  if (lu.info() != Eigen::Success) {
    // shift sits on an eigenvalue; nudge it
    K = A - (sigma - 1e-8 * (1.0 + std::abs(sigma))) * B;
    lu.factorize(K);
    if (lu.info() != Eigen::Success) {
      PencilEigs bad;
      bad.converged = false;
      return bad;
    }
  }

  int m = subspace > 0 ? subspace : std::max(3 * neig + 20, 60);
  m = std::min(m, n);

  Eigen::MatrixXd V(n, m + 1);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m + 1, m);
  Vec v0 = pseudo_random(n);
  v0 = lu.solve(B * v0);  // bias the start into range(K^{-1} B)
  double nrm = v0.norm();
  if (nrm == 0) {
    PencilEigs bad;
    bad.converged = false;
    return bad;
  }
  V.col(0) = v0 / nrm;
  int built = 0;
  for (int j = 0; j < m; ++j) {
    Vec w = lu.solve(B * V.col(j));
    // modified Gram-Schmidt, twice
    for (int pass = 0; pass < 2; ++pass)
      for (int i = 0; i <= j; ++i) {
        double h = V.col(i).dot(w);
        if (pass == 0)
          H(i, j) += h;
        else
          H(i, j) += h;
        w -= h * V.col(i);
      }
    double hw = w.norm();
    H(j + 1, j) = hw;
    built = j + 1;
    if (hw < 1e-13) break;  // invariant subspace
    V.col(j + 1) = w / hw;
  }

  Eigen::MatrixXd Hm = H.topLeftCorner(built, built);
  Eigen::EigenSolver<Eigen::MatrixXd> es(Hm, true);
  const double hlast = (built < m) ? 0.0 : H(built, built - 1);

  struct Ritz {
    std::complex<double> nu;
    double resid;
    int idx;
  };
  std::vector<Ritz> ritz;
  for (int i = 0; i < built; ++i) {
    std::complex<double> nu = es.eigenvalues()[i];
    if (std::abs(nu) < 1e-13) continue;  // infinite pencil eigenvalue
    double resid = hlast * std::abs(es.eigenvectors()(built - 1, i)) / std::abs(nu);
    ritz.push_back({nu, resid, i});
  }
  // mu = sigma + 1/nu; nearest-to-sigma come first (largest |nu|)
  std::sort(ritz.begin(), ritz.end(),
            [](const Ritz& a, const Ritz& b) { return std::abs(a.nu) > std::abs(b.nu); });

  PencilEigs out;
  const int k = std::min<int>(neig, static_cast<int>(ritz.size()));
  out.vectors.resize(n, k);
  out.converged = true;
  for (int j = 0; j < k; ++j) {
    out.values.push_back(sigma + 1.0 / ritz[j].nu);
    Eigen::VectorXcd y = es.eigenvectors().col(ritz[j].idx);
    out.vectors.col(j) = (V.leftCols(built) * y).real();
    if (ritz[j].resid > 1e-6) out.converged = false;
  }
  return out;
}

int count_negative(const PencilEigs& e, double tol) {
  int c = 0;
  for (const auto& mu : e.values)
    if (mu.real() < -tol) ++c;
  return c;
}

}  // namespace geomcont
