#include "kle/tensor.hpp"

#include <algorithm>
#include <sstream>

#include "kle/errors.hpp"

namespace kle {

TensorIndexMap::TensorIndexMap(std::vector<int> extents)
    : extents_(std::move(extents)) {
  if (extents_.empty()) throw InvalidArgument("tensor index map: empty extents");
  for (int n : extents_)
    if (n < 1) throw InvalidArgument("tensor index map: extents must be >= 1");
}

std::int64_t TensorIndexMap::size() const {
  std::int64_t s = 1;
  for (int n : extents_) s *= n;
  return s;
}

std::int64_t TensorIndexMap::flatten(std::span<const int> idx) const {
  std::int64_t flat = 0, stride = 1;
  for (int k = 0; k < dim(); ++k) {
    flat += stride * idx[k];
    stride *= extents_[k];
  }
  return flat;
}

void TensorIndexMap::unflatten(std::int64_t flat, std::span<int> idx) const {
  for (int k = 0; k < dim(); ++k) {
    idx[k] = static_cast<int>(flat % extents_[k]);
    flat /= extents_[k];
  }
}

KroneckerFactors::KroneckerFactors(
    std::vector<const UnivariateMatrix*> by_direction)
    : factors_(std::move(by_direction)) {
  if (factors_.empty())
    throw InvalidArgument("kronecker factors: need at least one factor");
}

std::int64_t KroneckerFactors::product_rows() const {
  std::int64_t r = 1;
  for (const auto* f : factors_) r *= f->rows();
  return r;
}

std::int64_t KroneckerFactors::product_cols() const {
  std::int64_t c = 1;
  for (const auto* f : factors_) c *= f->cols();
  return c;
}

namespace detail {

Eigen::VectorXd apply_mode(const UnivariateMatrix& A, bool transpose, int mode,
                           std::vector<int>& extents, const Eigen::VectorXd& x) {
  const int d = static_cast<int>(extents.size());
  const int nin = transpose ? A.rows() : A.cols();
  const int nout = transpose ? A.cols() : A.rows();
  if (extents[mode] != nin) {
    std::ostringstream os;
    os << "apply_mode: extent " << extents[mode] << " of mode " << mode
       << " does not match matrix dimension " << nin;
    throw DimensionError(os.str());
  }
  std::int64_t left = 1, right = 1;
  for (int k = 0; k < mode; ++k) left *= extents[k];
  for (int k = mode + 1; k < d; ++k) right *= extents[k];

  Eigen::VectorXd y(left * nout * right);
  const std::int64_t in_block = left * nin;
  const std::int64_t out_block = left * nout;

  if (left == 1) {
    // fibers are contiguous
    std::vector<double> fiber(nout);
    for (std::int64_t b = 0; b < right; ++b) {
      A.multiply(x.data() + b * in_block, fiber.data(), transpose);
      std::copy(fiber.begin(), fiber.end(), y.data() + b * out_block);
    }
  } else {
    for (std::int64_t b = 0; b < right; ++b) {
      const double* xb = x.data() + b * in_block;
      double* yb = y.data() + b * out_block;
      std::fill(yb, yb + out_block, 0.0);
      if (!transpose) {
        for (int i = 0; i < A.rows(); ++i) {
          const double* v = A.row_values(i);
          const int w = A.row_width(i);
          const int j0 = A.row_begin(i);
          double* ycol = yb + static_cast<std::int64_t>(i) * left;
          for (int k = 0; k < w; ++k) {
            const double a = v[k];
            const double* xcol = xb + static_cast<std::int64_t>(j0 + k) * left;
            for (std::int64_t r = 0; r < left; ++r) ycol[r] += a * xcol[r];
          }
        }
      } else {
        for (int i = 0; i < A.rows(); ++i) {
          const double* v = A.row_values(i);
          const int w = A.row_width(i);
          const int j0 = A.row_begin(i);
          const double* xcol = xb + static_cast<std::int64_t>(i) * left;
          for (int k = 0; k < w; ++k) {
            const double a = v[k];
            double* ycol = yb + static_cast<std::int64_t>(j0 + k) * left;
            for (std::int64_t r = 0; r < left; ++r) ycol[r] += a * xcol[r];
          }
        }
      }
    }
  }
  extents[mode] = nout;
  return y;
}

// In-place factor solve along one mode. `solve` must solve in place on a
// column-major (n x nrhs) block.
template <typename SolveFn>
void solve_mode(int n, SolveFn&& solve, int mode, std::span<const int> extents,
                Eigen::VectorXd& x) {
  const int d = static_cast<int>(extents.size());
  if (extents[mode] != n) {
    std::ostringstream os;
    os << "kron solve: extent " << extents[mode] << " of mode " << mode
       << " does not match factor dimension " << n;
    throw DimensionError(os.str());
  }
  std::int64_t left = 1, right = 1;
  for (int k = 0; k < mode; ++k) left *= extents[k];
  for (int k = mode + 1; k < d; ++k) right *= extents[k];

  if (left == 1) {
    solve(x.data(), static_cast<int>(right));
    return;
  }
  std::vector<double> buf(static_cast<size_t>(n) * left);
  const std::int64_t block = left * n;
  for (std::int64_t b = 0; b < right; ++b) {
    double* xb = x.data() + b * block;
    // gather mode fibers into contiguous columns
    for (std::int64_t a = 0; a < left; ++a)
      for (int j = 0; j < n; ++j)
        buf[j + static_cast<size_t>(a) * n] = xb[a + static_cast<std::int64_t>(j) * left];
    solve(buf.data(), static_cast<int>(left));
    for (std::int64_t a = 0; a < left; ++a)
      for (int j = 0; j < n; ++j)
        xb[a + static_cast<std::int64_t>(j) * left] = buf[j + static_cast<size_t>(a) * n];
  }
}

} // namespace detail

Eigen::VectorXd kron_matvec(const KroneckerFactors& factors,
                            const Eigen::VectorXd& x, bool transpose) {
  const std::int64_t expect = transpose ? factors.product_rows()
                                        : factors.product_cols();
  if (x.size() != expect) {
    std::ostringstream os;
    os << "kron_matvec: vector length " << x.size() << ", expected " << expect;
    throw DimensionError(os.str());
  }
  std::vector<int> extents(factors.dim());
  for (int k = 0; k < factors.dim(); ++k)
    extents[k] = transpose ? factors.factor(k).rows() : factors.factor(k).cols();
  Eigen::VectorXd y = x;
  for (int k = 0; k < factors.dim(); ++k)
    y = detail::apply_mode(factors.factor(k), transpose, k, extents, y);
  return y;
}

void kron_solve_cholesky(std::span<const CholeskyFactor* const> by_direction,
                         Eigen::VectorXd& x, TriangularSolve side) {
  std::vector<int> extents(by_direction.size());
  std::int64_t total = 1;
  for (size_t k = 0; k < by_direction.size(); ++k) {
    extents[k] = by_direction[k]->dim();
    total *= extents[k];
  }
  if (x.size() != total) {
    std::ostringstream os;
    os << "kron_solve_cholesky: vector length " << x.size() << ", expected "
       << total;
    throw DimensionError(os.str());
  }
  for (size_t k = 0; k < by_direction.size(); ++k) {
    const CholeskyFactor* f = by_direction[k];
    detail::solve_mode(
        f->dim(),
        [&](double* blk, int nrhs) {
          if (side == TriangularSolve::Forward) f->solve_forward(blk, nrhs);
          else f->solve_backward(blk, nrhs);
        },
        static_cast<int>(k), extents, x);
  }
}

void kron_solve_lu(std::span<const LuFactor* const> by_direction,
                   Eigen::VectorXd& x, bool transpose) {
  std::vector<int> extents(by_direction.size());
  std::int64_t total = 1;
  for (size_t k = 0; k < by_direction.size(); ++k) {
    extents[k] = by_direction[k]->dim();
    total *= extents[k];
  }
  if (x.size() != total) {
    std::ostringstream os;
    os << "kron_solve_lu: vector length " << x.size() << ", expected " << total;
    throw DimensionError(os.str());
  }
  for (size_t k = 0; k < by_direction.size(); ++k) {
    const LuFactor* f = by_direction[k];
    detail::solve_mode(
        f->dim(),
        [&](double* blk, int nrhs) { f->solve(blk, nrhs, transpose); },
        static_cast<int>(k), extents, x);
  }
}

} // namespace kle
