#pragma once

#include "geomcont/mesh.hpp"

#include <complex>
#include <vector>

namespace geomcont {

struct PencilEigs {
  std::vector<std::complex<double>> values;  // pencil eigenvalues nearest the shift
  Eigen::MatrixXd vectors;                   // matching real Ritz vectors, column-wise
  bool converged = false;
};

/// Eigenvalues of A v = mu B v nearest sigma, B = diag(mass) possibly
/// singular (zero rows act as constraints; their infinite eigenvalues are
/// filtered out). Shift-invert Arnoldi with full reorthogonalization; falls
/// back to a dense QZ solve for small systems.
PencilEigs pencil_eigs(const SpMat& A, const Vec& mass, double sigma, int neig,
                       int subspace = 0);

/// Dense QZ reference, for tests and small systems.
PencilEigs pencil_eigs_dense(const Eigen::MatrixXd& A, const Vec& mass, double sigma, int neig);

int count_negative(const PencilEigs& e, double tol);

}  // namespace geomcont
