#include "kle/quadrature.hpp"

#include <lapacke.h>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "kle/errors.hpp"

namespace kle {

GaussRule gauss_rule(int q) {
  if (q < 1) throw InvalidArgument("gauss_rule: need at least one point");
  GaussRule rule;
  rule.nodes.resize(q);
  rule.weights.resize(q);
  const int half = (q + 1) / 2;
  for (int k = 0; k < half; ++k) {
    double x = std::cos(M_PI * (k + 0.75) / (q + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence for P_q(x) and P'_q(x)
      double p0 = 1.0, p1 = x;
      for (int j = 2; j <= q; ++j) {
        const double p2 = ((2 * j - 1) * x * p1 - (j - 1) * p0) / j;
        p0 = p1;
        p1 = p2;
      }
      dp = q * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    rule.nodes[k] = -x; // ascending order
    rule.nodes[q - 1 - k] = x;
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.weights[k] = w;
    rule.weights[q - 1 - k] = w;
  }
  if (q % 2 == 1) rule.nodes[q / 2] = 0.0;
  return rule;
}

UnivariateMatrix::UnivariateMatrix(int rows, int cols, Role role)
    : rows_(rows), cols_(cols), role_(role), first_(rows, 0),
      offset_(rows + 1, 0) {}

void UnivariateMatrix::allocate_rows(const std::vector<int>& first_col,
                                     const std::vector<int>& last_col) {
  first_ = first_col;
  offset_.assign(rows_ + 1, 0);
  for (int i = 0; i < rows_; ++i)
    offset_[i + 1] = offset_[i] + (last_col[i] - first_col[i] + 1);
  vals_.assign(offset_[rows_], 0.0);
}

double UnivariateMatrix::coeff(int i, int j) const {
  const int k = j - first_[i];
  if (k < 0 || k >= row_width(i)) return 0.0;
  return vals_[offset_[i] + k];
}

Eigen::MatrixXd UnivariateMatrix::dense() const {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(rows_, cols_);
  for (int i = 0; i < rows_; ++i)
    for (int k = 0; k < row_width(i); ++k)
      out(i, first_[i] + k) = vals_[offset_[i] + k];
  return out;
}

int UnivariateMatrix::band_lower() const {
  int kl = 0;
  for (int i = 0; i < rows_; ++i) kl = std::max(kl, i - first_[i]);
  return kl;
}

int UnivariateMatrix::band_upper() const {
  int ku = 0;
  for (int i = 0; i < rows_; ++i)
    ku = std::max(ku, first_[i] + row_width(i) - 1 - i);
  return ku;
}

void UnivariateMatrix::multiply(const double* x, double* y,
                                bool transpose) const {
  if (!transpose) {
    for (int i = 0; i < rows_; ++i) {
      const double* v = row_values(i);
      const int w = row_width(i);
      const double* xs = x + first_[i];
      double acc = 0.0;
      for (int k = 0; k < w; ++k) acc += v[k] * xs[k];
      y[i] = acc;
    }
  } else {
    std::fill(y, y + cols_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      const double* v = row_values(i);
      const int w = row_width(i);
      double* ys = y + first_[i];
      const double xi = x[i];
      for (int k = 0; k < w; ++k) ys[k] += v[k] * xi;
    }
  }
}

namespace {

// Merged ascending breakpoints of one or two knot vectors.
std::vector<double> merged_breakpoints(const BSplineBasis& a,
                                       const BSplineBasis* b) {
  std::vector<double> bp = a.knot_vector().breakpoints();
  if (b) {
    for (double t : b->knot_vector().breakpoints()) bp.push_back(t);
    std::sort(bp.begin(), bp.end());
    bp.erase(std::unique(bp.begin(), bp.end()), bp.end());
  }
  return bp;
}

} // namespace

UnivariateMatrix trial_mass_matrix(const BSplineBasis& basis) {
  const int p = basis.degree();
  const int n = basis.size();
  UnivariateMatrix Z(n, n, UnivariateMatrix::Role::TrialMass);
  std::vector<int> first(n), last(n);
  for (int i = 0; i < n; ++i) {
    first[i] = std::max(0, i - p);
    last[i] = std::min(n - 1, i + p);
  }
  Z.allocate_rows(first, last);

  const GaussRule rule = gauss_rule(p + 1);
  std::vector<double> B(p + 1);
  const std::vector<double> bp = merged_breakpoints(basis, nullptr);
  for (size_t e = 0; e + 1 < bp.size(); ++e) {
    const double a = bp[e], b = bp[e + 1];
    const double mid = 0.5 * (a + b), halfw = 0.5 * (b - a);
    for (int g = 0; g < rule.count(); ++g) {
      const double xi = mid + halfw * rule.nodes[g];
      const double w = halfw * rule.weights[g];
      const int i0 = basis.evaluate(xi, B);
      for (int ia = 0; ia <= p; ++ia)
        for (int ib = 0; ib <= p; ++ib)
          Z.row_values(i0 + ia)[i0 + ib - Z.row_begin(i0 + ia)] +=
              w * B[ia] * B[ib];
    }
  }
  return Z;
}

UnivariateMatrix mixed_mass_matrix(const BSplineBasis& interp,
                                   const BSplineBasis& trial) {
  const int pt = interp.degree();
  const int p = trial.degree();
  const int nr = interp.size();
  const int nc = trial.size();
  const std::vector<double> bp = merged_breakpoints(interp, &trial);
  const GaussRule rule = gauss_rule((pt + p) / 2 + 1 + ((pt + p) % 2));

  // first pass: column ranges per row
  std::vector<int> first(nr, nc), last(nr, -1);
  std::vector<double> Bi(pt + 1), Bt(p + 1);
  for (size_t e = 0; e + 1 < bp.size(); ++e) {
    const double mid = 0.5 * (bp[e] + bp[e + 1]);
    const int i0 = interp.evaluate(mid, Bi);
    const int j0 = trial.evaluate(mid, Bt);
    for (int ia = 0; ia <= pt; ++ia) {
      first[i0 + ia] = std::min(first[i0 + ia], j0);
      last[i0 + ia] = std::max(last[i0 + ia], j0 + p);
    }
  }
  for (int i = 0; i < nr; ++i)
    if (last[i] < first[i]) { first[i] = 0; last[i] = 0; }

  UnivariateMatrix M(nr, nc, UnivariateMatrix::Role::MixedMass);
  M.allocate_rows(first, last);
  for (size_t e = 0; e + 1 < bp.size(); ++e) {
    const double a = bp[e], b = bp[e + 1];
    const double mid = 0.5 * (a + b), halfw = 0.5 * (b - a);
    for (int g = 0; g < rule.count(); ++g) {
      const double xi = mid + halfw * rule.nodes[g];
      const double w = halfw * rule.weights[g];
      const int i0 = interp.evaluate(xi, Bi);
      const int j0 = trial.evaluate(xi, Bt);
      for (int ia = 0; ia <= pt; ++ia) {
        double* rowv = M.row_values(i0 + ia);
        const int shift = j0 - M.row_begin(i0 + ia);
        for (int jb = 0; jb <= p; ++jb)
          rowv[shift + jb] += w * Bi[ia] * Bt[jb];
      }
    }
  }
  return M;
}

UnivariateMatrix collocation_matrix(const BSplineBasis& interp) {
  const int p = interp.degree();
  const int n = interp.size();
  const GrevillePoints g = interp.greville_points();
  UnivariateMatrix B(n, n, UnivariateMatrix::Role::Collocation);
  std::vector<int> first(n), last(n);
  std::vector<std::vector<double>> rows(n, std::vector<double>(p + 1));
  for (int i = 0; i < n; ++i) {
    first[i] = interp.evaluate(g.abscissae[i], rows[i], g.sides[i]);
    last[i] = first[i] + p;
  }
  B.allocate_rows(first, last);
  for (int i = 0; i < n; ++i)
    std::copy(rows[i].begin(), rows[i].end(), B.row_values(i));
  return B;
}

UnivariateMatrix evaluation_matrix(const BSplineBasis& basis,
                                   std::span<const double> points,
                                   std::span<const Side> sides) {
  const int p = basis.degree();
  const int npts = static_cast<int>(points.size());
  UnivariateMatrix E(npts, basis.size(), UnivariateMatrix::Role::Collocation);
  std::vector<int> first(npts), last(npts);
  std::vector<std::vector<double>> rows(npts, std::vector<double>(p + 1));
  for (int i = 0; i < npts; ++i) {
    const Side s = sides.empty() ? Side::Right : sides[i];
    first[i] = basis.evaluate(points[i], rows[i], s);
    last[i] = first[i] + p;
  }
  E.allocate_rows(first, last);
  for (int i = 0; i < npts; ++i)
    std::copy(rows[i].begin(), rows[i].end(), E.row_values(i));
  return E;
}

// ---------------------------------------------------------------------------
// Factorizations
// ---------------------------------------------------------------------------

namespace {
constexpr int kDenseThreshold = 64;

bool pick_banded(int n, StorageHint hint) {
  switch (hint) {
    case StorageHint::Dense: return false;
    case StorageHint::Banded: return true;
    default: return n > kDenseThreshold;
  }
}
} // namespace

CholeskyFactor CholeskyFactor::compute(const UnivariateMatrix& m,
                                       StorageHint hint) {
  if (m.rows() != m.cols())
    throw DimensionError("cholesky: matrix must be square");
  CholeskyFactor f;
  f.n_ = m.rows();
  f.banded_ = pick_banded(f.n_, hint);
  const int kd = std::max(m.band_lower(), m.band_upper());
  if (f.banded_) {
    f.kd_ = kd;
    const int ld = kd + 1;
    f.band_.assign(static_cast<size_t>(ld) * f.n_, 0.0);
    for (int j = 0; j < f.n_; ++j)
      for (int i = j; i <= std::min(f.n_ - 1, j + kd); ++i)
        f.band_[(i - j) + static_cast<size_t>(j) * ld] = m.coeff(i, j);
    const int info = LAPACKE_dpbtrf(LAPACK_COL_MAJOR, 'L', f.n_, kd,
                                    f.band_.data(), ld);
    if (info != 0) {
      std::ostringstream os;
      os << "cholesky: leading minor of order " << info
         << " is not positive definite";
      throw FactorizationError(os.str(), info);
    }
  } else {
    f.dense_ = m.dense();
    const int info = LAPACKE_dpotrf(LAPACK_COL_MAJOR, 'L', f.n_,
                                    f.dense_.data(), f.n_);
    if (info != 0) {
      std::ostringstream os;
      os << "cholesky: leading minor of order " << info
         << " is not positive definite";
      throw FactorizationError(os.str(), info);
    }
    f.dense_.triangularView<Eigen::StrictlyUpper>().setZero();
  }
  return f;
}

void CholeskyFactor::solve_forward(double* x, int nrhs) const {
  if (banded_) {
    const int ld = kd_ + 1;
    for (int r = 0; r < nrhs; ++r) {
      double* b = x + static_cast<size_t>(r) * n_;
      for (int j = 0; j < n_; ++j) {
        const double yj = b[j] / band_[static_cast<size_t>(j) * ld];
        b[j] = yj;
        const int iend = std::min(n_ - 1, j + kd_);
        for (int i = j + 1; i <= iend; ++i)
          b[i] -= band_[(i - j) + static_cast<size_t>(j) * ld] * yj;
      }
    }
  } else {
    for (int r = 0; r < nrhs; ++r) {
      double* b = x + static_cast<size_t>(r) * n_;
      for (int j = 0; j < n_; ++j) {
        const double yj = b[j] / dense_(j, j);
        b[j] = yj;
        for (int i = j + 1; i < n_; ++i) b[i] -= dense_(i, j) * yj;
      }
    }
  }
}

void CholeskyFactor::solve_backward(double* x, int nrhs) const {
  if (banded_) {
    const int ld = kd_ + 1;
    for (int r = 0; r < nrhs; ++r) {
      double* b = x + static_cast<size_t>(r) * n_;
      for (int j = n_ - 1; j >= 0; --j) {
        double acc = b[j];
        const int iend = std::min(n_ - 1, j + kd_);
        for (int i = j + 1; i <= iend; ++i)
          acc -= band_[(i - j) + static_cast<size_t>(j) * ld] * b[i];
        b[j] = acc / band_[static_cast<size_t>(j) * ld];
      }
    }
  } else {
    for (int r = 0; r < nrhs; ++r) {
      double* b = x + static_cast<size_t>(r) * n_;
      for (int j = n_ - 1; j >= 0; --j) {
        double acc = b[j];
        for (int i = j + 1; i < n_; ++i) acc -= dense_(i, j) * b[i];
        b[j] = acc / dense_(j, j);
      }
    }
  }
}

Eigen::MatrixXd CholeskyFactor::dense_factor() const {
  if (!banded_) return dense_;
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(n_, n_);
  const int ld = kd_ + 1;
  for (int j = 0; j < n_; ++j)
    for (int i = j; i <= std::min(n_ - 1, j + kd_); ++i)
      L(i, j) = band_[(i - j) + static_cast<size_t>(j) * ld];
  return L;
}

LuFactor LuFactor::compute(const UnivariateMatrix& m, StorageHint hint) {
  if (m.rows() != m.cols()) throw DimensionError("lu: matrix must be square");
  LuFactor f;
  f.n_ = m.rows();
  f.banded_ = pick_banded(f.n_, hint);
  f.ipiv_.resize(f.n_);
  if (f.banded_) {
    f.kl_ = m.band_lower();
    f.ku_ = m.band_upper();
    const int ld = 2 * f.kl_ + f.ku_ + 1;
    f.ab_.assign(static_cast<size_t>(ld) * f.n_, 0.0);
    // dgbtrf layout: AB(kl+ku+i-j, j) = A(i,j)
    for (int i = 0; i < f.n_; ++i)
      for (int k = 0; k < m.row_width(i); ++k) {
        const int j = m.row_begin(i) + k;
        f.ab_[(f.kl_ + f.ku_ + i - j) + static_cast<size_t>(j) * ld] =
            m.row_values(i)[k];
      }
    const int info = LAPACKE_dgbtrf(LAPACK_COL_MAJOR, f.n_, f.n_, f.kl_, f.ku_,
                                    f.ab_.data(), ld, f.ipiv_.data());
    if (info != 0) {
      std::ostringstream os;
      os << "lu: zero pivot at index " << info;
      throw FactorizationError(os.str(), info);
    }
  } else {
    f.lu_ = m.dense();
    const int info = LAPACKE_dgetrf(LAPACK_COL_MAJOR, f.n_, f.n_,
                                    f.lu_.data(), f.n_, f.ipiv_.data());
    if (info != 0) {
      std::ostringstream os;
      os << "lu: zero pivot at index " << info;
      throw FactorizationError(os.str(), info);
    }
  }
  return f;
}

void LuFactor::solve(double* x, int nrhs, bool transpose) const {
  const char trans = transpose ? 'T' : 'N';
  int info = 0;
  if (banded_) {
    const int ld = 2 * kl_ + ku_ + 1;
    info = LAPACKE_dgbtrs(LAPACK_COL_MAJOR, trans, n_, kl_, ku_, nrhs,
                          ab_.data(), ld, ipiv_.data(), x, n_);
  } else {
    info = LAPACKE_dgetrs(LAPACK_COL_MAJOR, trans, n_, nrhs, lu_.data(), n_,
                          ipiv_.data(), x, n_);
  }
  if (info != 0) throw FactorizationError("lu solve failed", info);
}

} // namespace kle
