#pragma once

#include <Eigen/Dense>
#include <array>
#include <cstdint>
#include <memory>
#include <vector>

#include "kle/geometry.hpp"
#include "kle/kernels.hpp"
#include "kle/tensor.hpp"

namespace kle {

/// Peak-allocation bookkeeping for the matrix-free path. Buffers allocated
/// by operator setup and apply report their sizes here; the audit asserts
/// that no dense N x N or N~ x N~ array is ever created on that path.
namespace audit {
void note(std::size_t bytes);
std::size_t peak_bytes();
void reset();
} // namespace audit

/// Per-direction construction recipe for a trial or interpolation space,
/// derived from the patch geometry: degree, uniform subdivisions per knot
/// span, smoothness at the newly inserted breakpoints, and an optional cap
/// on the smoothness at the pre-existing interior breakpoints of the
/// geometry (e.g. -1 to make the space discontinuous at a patch interface).
/// Scalar entries broadcast across directions.
struct SpaceSpec {
  std::vector<int> degree;
  std::vector<int> subdivisions;
  std::vector<int> continuity;
  std::vector<int> interface_continuity; // empty: keep geometry continuity

  static SpaceSpec uniform(int dim, int degree, int subdivisions,
                           int continuity);
};

/// Expands a SpaceSpec against a patch into per-direction bases.
std::vector<BSplineBasis> build_spaces(const TensorPatch& patch,
                                       const SpaceSpec& spec);

/// Wall-clock seconds per stage of the matrix-free product, accumulated
/// over the applies that were passed a StageTimes sink.
struct StageTimes {
  std::array<double, 9> seconds{};
  int applies = 0;
  double total() const;
};

/// The standard-form operator
///   A~' = L^-1 M^T B~^-1 J Gamma J B~^-T M L^-T
/// evaluated matrix-free. All univariate matrices are formed and factored at
/// build time; kernel values are computed on the fly row by row, so no
/// N x N or N~ x N~ array is ever allocated on the apply path.
class KleOperator {
public:
  static KleOperator build(const TensorPatch& patch,
                           std::vector<BSplineBasis> trial_bases,
                           std::vector<BSplineBasis> interp_bases,
                           std::shared_ptr<const CovarianceKernel> kernel,
                           int threads = 1, double jac_floor = 1e-14);

  static KleOperator build(const TensorPatch& patch, const SpaceSpec& trial,
                           const SpaceSpec& interp,
                           std::shared_ptr<const CovarianceKernel> kernel,
                           int threads = 1, double jac_floor = 1e-14);

  int dim() const { return static_cast<int>(trial_bases_.size()); }
  std::int64_t trial_dim() const { return trial_dim_; }
  std::int64_t interp_dim() const { return interp_dim_; }
  const std::vector<BSplineBasis>& trial_bases() const { return trial_bases_; }
  const std::vector<BSplineBasis>& interp_bases() const { return interp_bases_; }
  const TensorPatch& patch() const { return *patch_; }
  const GrevilleGrid& grid() const { return grid_; }
  const CovarianceKernel& kernel() const { return *kernel_; }
  int threads() const { return threads_; }
  int jacobian_floored_count() const { return grid_.floored_count; }

  const UnivariateMatrix& trial_mass(int k) const { return trial_mass_[k]; }
  const UnivariateMatrix& mixed_mass(int k) const { return mixed_mass_[k]; }
  const UnivariateMatrix& collocation(int k) const { return collocation_[k]; }
  const CholeskyFactor& trial_cholesky(int k) const { return trial_chol_[k]; }

  /// v |-> A~' v; length must equal trial_dim(). Bit-identical results for
  /// any thread count (row sums run in a fixed order).
  Eigen::VectorXd apply(const Eigen::VectorXd& v) const;
  Eigen::VectorXd apply(const Eigen::VectorXd& v, StageTimes* times,
                        int threads) const;

  /// Explicit A~' for testing and diagnostics; refuses when trial_dim()
  /// exceeds the cap. Assembled through a dense route (Gamma materialized)
  /// independent of apply().
  Eigen::MatrixXd assemble_dense(std::int64_t cap = 4096) const;

  /// v = L^-T v' per direction (standard-form eigenvector recovery).
  void recover_coefficients(Eigen::VectorXd& v) const;
  /// y = B v with the Kronecker trial Gramian B.
  Eigen::VectorXd apply_gramian(const Eigen::VectorXd& v) const;

private:
  std::shared_ptr<const TensorPatch> patch_;
  std::vector<BSplineBasis> trial_bases_;
  std::vector<BSplineBasis> interp_bases_;
  std::shared_ptr<const CovarianceKernel> kernel_;
  int threads_ = 1;
  std::int64_t trial_dim_ = 0, interp_dim_ = 0;

  std::vector<UnivariateMatrix> trial_mass_;
  std::vector<UnivariateMatrix> mixed_mass_;
  std::vector<UnivariateMatrix> collocation_;
  std::vector<CholeskyFactor> trial_chol_;
  std::vector<LuFactor> collocation_lu_;
  GrevilleGrid grid_;
  std::vector<double> points_flat_; // (N~ * d), point-major, for stage 5

  // fast-path kernel parameters (set when the kernel is isotropic)
  enum class FastKernel { None, Exponential, Gaussian };
  FastKernel fast_ = FastKernel::None;
  double fast_sigma2_ = 0.0, fast_scale_ = 0.0;

  void kernel_contraction(const double* y, double* z, int threads) const;
};

} // namespace kle
