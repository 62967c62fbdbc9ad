#pragma once

#include <Eigen/Dense>
#include <vector>

#include "kle/splines.hpp"

namespace kle {

/// Gauss-Legendre rule on the reference interval [-1,1].
struct GaussRule {
  Eigen::VectorXd nodes;
  Eigen::VectorXd weights;
  int count() const { return static_cast<int>(nodes.size()); }
};

/// Nodes and weights accurate to ~1e-15, computed by Newton iteration on the
/// Legendre recurrence. q must be >= 1.
GaussRule gauss_rule(int q);

/// Univariate matrix with contiguous nonzero column ranges per row. Covers
/// the three roles appearing in the pipeline: trial mass Z (symmetric
/// positive definite, bandwidth <= p), mixed mass M (interp rows x trial
/// cols, rectangular) and Greville collocation B (totally positive, banded).
class UnivariateMatrix {
public:
  enum class Role { TrialMass, MixedMass, Collocation };

  UnivariateMatrix(int rows, int cols, Role role);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  Role role() const { return role_; }

  /// First nonzero column of row i.
  int row_begin(int i) const { return first_[i]; }
  /// Number of stored entries in row i.
  int row_width(int i) const { return offset_[i + 1] - offset_[i]; }
  const double* row_values(int i) const { return vals_.data() + offset_[i]; }
  double* row_values(int i) { return vals_.data() + offset_[i]; }

  double coeff(int i, int j) const;
  Eigen::MatrixXd dense() const;

  /// max_i (i - first nonzero col) and max_i (last nonzero col - i).
  int band_lower() const;
  int band_upper() const;

  /// y = A x (or A^T x). y is assigned, not accumulated; deterministic
  /// fixed-order summation.
  void multiply(const double* x, double* y, bool transpose) const;

  /// Reserves rows with the given column ranges (inclusive bounds), zeroed.
  void allocate_rows(const std::vector<int>& first_col,
                     const std::vector<int>& last_col);

private:
  int rows_, cols_;
  Role role_;
  std::vector<int> first_;
  std::vector<int> offset_;
  std::vector<double> vals_;
};

/// Z_k: exact Gramian of the basis, per-span Gauss with p+1 points.
UnivariateMatrix trial_mass_matrix(const BSplineBasis& basis);

/// M_k: integrals of interp x trial products over the merged breakpoint
/// spans with ceil((pt+p)/2)+1 Gauss points, hence exact.
UnivariateMatrix mixed_mass_matrix(const BSplineBasis& interp,
                                   const BSplineBasis& trial);

/// B_k: interp basis collocated at its Greville abscissae. Coincident pairs
/// at C^-1 knots take the left limit first, then the right limit, which
/// keeps the matrix block diagonal across the discontinuity.
UnivariateMatrix collocation_matrix(const BSplineBasis& interp);

/// Basis values collocated at arbitrary points, one row per point.
UnivariateMatrix evaluation_matrix(const BSplineBasis& basis,
                                   std::span<const double> points,
                                   std::span<const Side> sides = {});

/// Storage selection for factorizations; Auto picks dense for n <= 64 and
/// banded above.
enum class StorageHint { Auto, Dense, Banded };

/// Cholesky factorization of a symmetric positive definite UnivariateMatrix.
/// Throws FactorizationError carrying the leading-minor index on failure.
class CholeskyFactor {
public:
  static CholeskyFactor compute(const UnivariateMatrix& m,
                                StorageHint hint = StorageHint::Auto);
  int dim() const { return n_; }
  bool banded() const { return banded_; }

  /// Solves L Y = X (forward) in place; X is (n x nrhs) column-major.
  void solve_forward(double* x, int nrhs) const;
  /// Solves L^T Y = X (backward) in place.
  void solve_backward(double* x, int nrhs) const;

  /// The lower-triangular factor as a dense matrix (testing / oracles).
  Eigen::MatrixXd dense_factor() const;

private:
  int n_ = 0, kd_ = 0;
  bool banded_ = false;
  std::vector<double> band_; // LAPACK 'L' band storage, ld = kd+1
  Eigen::MatrixXd dense_;
};

/// LU factorization with partial pivoting. Throws FactorizationError with
/// the zero-pivot index when singular.
class LuFactor {
public:
  static LuFactor compute(const UnivariateMatrix& m,
                          StorageHint hint = StorageHint::Auto);
  int dim() const { return n_; }
  bool banded() const { return banded_; }

  /// Solves A Y = X (or A^T Y = X) in place; X is (n x nrhs) column-major.
  void solve(double* x, int nrhs, bool transpose) const;

private:
  int n_ = 0, kl_ = 0, ku_ = 0;
  bool banded_ = false;
  std::vector<double> ab_; // dgbtrf layout, ld = 2*kl+ku+1
  Eigen::MatrixXd lu_;     // dgetrf output when dense
  std::vector<int> ipiv_;
};

inline CholeskyFactor cholesky_factor(const UnivariateMatrix& m,
                                      StorageHint hint = StorageHint::Auto) {
  return CholeskyFactor::compute(m, hint);
}
inline LuFactor lu_factor(const UnivariateMatrix& m,
                          StorageHint hint = StorageHint::Auto) {
  return LuFactor::compute(m, hint);
}

} // namespace kle
