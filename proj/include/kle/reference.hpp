#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <utility>
#include <vector>

#include "kle/geometry.hpp"
#include "kle/kernels.hpp"

namespace kle {

/// Dense generalized eigenvalue problem A v = lambda B v assembled with full
/// tensor Gauss quadrature over element pairs (the oracle counterpart of the
/// interpolation-based operator). Clarity over speed; single-threaded.
struct DenseGalerkinProblem {
  Eigen::MatrixXd A; // Galerkin matrix of the scaled kernel, N x N
  Eigen::MatrixXd B; // Kronecker-assembled Gramian, N x N
  int quad_order = 0;
};

/// Assembles A(i,j) = integral over D^ x D^ of Gamma(x(xi), x(xi')) B_i B_j
/// sqrt(det det') with `quad_order` Gauss points per knot span and direction.
/// quad_order must be at least p+1; the quadrature is itself an
/// approximation for non-polynomial kernels.
DenseGalerkinProblem assemble_dense_galerkin(
    const TensorPatch& patch, std::span<const BSplineBasis> trial_bases,
    const CovarianceKernel& kernel, int quad_order, std::int64_t cap = 4096);

struct DenseSpectrum {
  Eigen::VectorXd eigenvalues;  // descending
  Eigen::MatrixXd coefficients; // B-orthonormal, sign-fixed
};

/// Largest M generalized eigenpairs via reduction with the dense Cholesky
/// factor of B.
DenseSpectrum solve_dense(const DenseGalerkinProblem& problem, int M);

/// Analytic spectrum of the exponential kernel sigma2 * exp(-r / corr_len)
/// on an interval of the given length: lambda_n = 2 c sigma2 / (w_n^2 + c^2),
/// c = 1/corr_len, with w_n the ordered positive roots of the classical
/// transcendental equations on the half interval. Roots are bracketed one
/// per half period and bisected to machine accuracy.
std::vector<double> analytic_exponential_spectrum_1d(double corr_len,
                                                     double domain_length,
                                                     int count,
                                                     double sigma2 = 1.0);

/// Relative L2(D^ x D^) error of the Greville interpolant G~ of the scaled
/// kernel G, measured on a tensor Gauss grid with quad_order points per
/// interpolation knot span.
double kernel_interpolation_error(const TensorPatch& patch,
                                  std::span<const BSplineBasis> interp_bases,
                                  const CovarianceKernel& kernel,
                                  int quad_order);

/// (relative 2-norm, relative Frobenius norm) of A - A_tilde. The 2-norms
/// come from power iteration on the symmetric difference (tolerance 1e-6).
std::pair<double, double> operator_error_norms(const Eigen::MatrixXd& A,
                                               const Eigen::MatrixXd& A_tilde);

/// Fully dense route to the standard-form IBQ operator
/// L^-1 M^T B~^-1 J Gamma J B~^-T M L^-T, built from explicitly formed
/// Kronecker products and dense Eigen factorizations only. Oracle for the
/// matrix-free apply path.
Eigen::MatrixXd assemble_standard_form_oracle(
    const TensorPatch& patch, std::span<const BSplineBasis> trial_bases,
    std::span<const BSplineBasis> interp_bases, const CovarianceKernel& kernel,
    std::int64_t cap = 4096);

/// Explicit Kronecker product D_d x ... x D_1 of dense factors listed by
/// direction (first factor acts on the fastest index).
Eigen::MatrixXd dense_kron(const std::vector<Eigen::MatrixXd>& by_direction);

} // namespace kle
