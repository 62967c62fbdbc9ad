#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <span>
#include <vector>

#include "kle/quadrature.hpp"

namespace kle {

/// Multi-index <-> flat index map for d-variate coefficient arrays. The
/// first index varies fastest: flat = i1 + i2*n1 + i3*n1*n2 + ... (0-based).
class TensorIndexMap {
public:
  explicit TensorIndexMap(std::vector<int> extents);

  int dim() const { return static_cast<int>(extents_.size()); }
  int extent(int k) const { return extents_[k]; }
  const std::vector<int>& extents() const { return extents_; }
  std::int64_t size() const;

  std::int64_t flatten(std::span<const int> idx) const;
  void unflatten(std::int64_t flat, std::span<int> idx) const;

private:
  std::vector<int> extents_;
};

/// An ordered list of small matrices standing for their Kronecker product
/// D_d x ... x D_1. Factors are stored by direction: factor(0) acts on the
/// fastest-varying index, i.e. it is the last factor of the product in the
/// conventional notation.
class KroneckerFactors {
public:
  explicit KroneckerFactors(std::vector<const UnivariateMatrix*> by_direction);

  int dim() const { return static_cast<int>(factors_.size()); }
  const UnivariateMatrix& factor(int k) const { return *factors_[k]; }
  std::int64_t product_rows() const;
  std::int64_t product_cols() const;

private:
  std::vector<const UnivariateMatrix*> factors_;
};

/// y = (D_d x ... x D_1) x, computed as d successive mode contractions in
/// O(sum_k m_k * prod(...)) time instead of O(M*N). With `transpose` the
/// transposed product is applied.
Eigen::VectorXd kron_matvec(const KroneckerFactors& factors,
                            const Eigen::VectorXd& x, bool transpose = false);

enum class TriangularSolve { Forward, Backward };

/// Solves (L_d x ... x L_1) y = x (Forward) or its transpose (Backward) in
/// place, one triangular factor per direction.
void kron_solve_cholesky(std::span<const CholeskyFactor* const> by_direction,
                         Eigen::VectorXd& x, TriangularSolve side);

/// Applies (B_d x ... x B_1)^{-1} (or the inverse transpose) in place via
/// factor-wise LU solves along each mode.
void kron_solve_lu(std::span<const LuFactor* const> by_direction,
                   Eigen::VectorXd& x, bool transpose = false);

namespace detail {
/// Applies A (or A^T) along mode k of the flattened array x with the given
/// extents; returns the new array (the extent of mode k becomes the result
/// dimension of the applied matrix). Deterministic summation order.
Eigen::VectorXd apply_mode(const UnivariateMatrix& A, bool transpose, int mode,
                           std::vector<int>& extents, const Eigen::VectorXd& x);
} // namespace detail

} // namespace kle
