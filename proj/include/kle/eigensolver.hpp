#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "kle/operator.hpp"

namespace kle {

/// Configuration of the restarted Lanczos iteration.
struct LanczosConfig {
  int num_modes = 10;
  /// Krylov basis dimension; 0 selects max(2*num_modes+1, 20), clamped to N.
  int krylov_dim = 0;
  /// Ritz residual tolerance, relative to the largest eigenvalue.
  double tol = 1e-10;
  int max_restarts = 300;
  /// Seed of the deterministic start vector.
  std::uint64_t seed = 42;
};

/// Truncated KLE spectrum: eigenvalues (descending, nonnegative) and
/// B-orthonormal trial-space coefficient vectors of the eigenfunctions.
struct KleSpectrum {
  Eigen::VectorXd eigenvalues;  // M entries
  Eigen::MatrixXd coefficients; // N x M, v_i^T B v_j = delta_ij
  Eigen::VectorXd residuals;    // Ritz residual norms in the standard form
  int iterations = 0;           // operator applications
  int restarts = 0;
  int clipped_count = 0;   // eigenvalues in (-tol*lambda_1, 0) set to zero
  bool psd_violation = false; // an eigenvalue below -tol*lambda_1 appeared
};

/// Raised when the iteration does not converge within max_restarts; carries
/// the best spectrum found so far.
class NotConvergedError : public Error {
public:
  NotConvergedError(const std::string& what, KleSpectrum best)
      : Error(what), best_(std::move(best)) {}
  const KleSpectrum& best() const { return best_; }

private:
  KleSpectrum best_;
};

/// Computes the num_modes largest eigenpairs of the matrix-free operator by
/// a thick-restarted Lanczos iteration with full reorthogonalization.
/// Eigenvectors are recovered as trial coefficients via the Kronecker
/// Cholesky factors, B-normalized, with the largest-magnitude coefficient
/// made positive.
KleSpectrum solve_spectrum(const KleOperator& op, const LanczosConfig& config);

/// phi_i(x(xi)) = sum_j v_i[j] B_j(xi) / sqrt(det DF(xi)). Determinants
/// below jac_floor are clamped; `floored` (when given) counts occurrences.
double eval_eigenfunction(const KleSpectrum& spectrum, const TensorPatch& patch,
                          std::span<const BSplineBasis> trial_bases, int mode,
                          std::span<const double> xi, double jac_floor = 1e-14,
                          int* floored = nullptr);

/// Eigenfunction values on a tensor grid of parametric coordinates, one
/// column per mode, rows in vectorization order.
Eigen::MatrixXd eval_modes_on_grid(const KleSpectrum& spectrum,
                                   const TensorPatch& patch,
                                   std::span<const BSplineBasis> trial_bases,
                                   std::span<const std::vector<double>> coords,
                                   double jac_floor = 1e-14,
                                   int* floored = nullptr);

/// Truncated pointwise variance sum_i lambda_i phi_i(x)^2 on a tensor grid.
Eigen::VectorXd variance_field(const KleSpectrum& spectrum,
                               const TensorPatch& patch,
                               std::span<const BSplineBasis> trial_bases,
                               std::span<const std::vector<double>> coords);

/// Draws `count` realizations of the truncated expansion as trial-space
/// coefficient fields: column_j = mu + sum_i sqrt(lambda_i) xi_ij v_i with
/// xi_ij i.i.d. standard normal (deterministic for a fixed seed). `mu` may
/// be empty (zero mean field).
Eigen::MatrixXd sample_realizations(const KleSpectrum& spectrum,
                                    const Eigen::VectorXd& mu, int count,
                                    std::uint64_t seed);

} // namespace kle
