#include "kle/operator.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <sstream>
#include <thread>

#include "kle/errors.hpp"

namespace kle {

namespace audit {
namespace {
std::atomic<std::size_t> g_peak{0};
}
void note(std::size_t bytes) {
  std::size_t prev = g_peak.load(std::memory_order_relaxed);
  while (bytes > prev &&
         !g_peak.compare_exchange_weak(prev, bytes, std::memory_order_relaxed)) {
  }
}
std::size_t peak_bytes() { return g_peak.load(); }
void reset() { g_peak.store(0); }
} // namespace audit

SpaceSpec SpaceSpec::uniform(int dim, int degree, int subdivisions,
                             int continuity) {
  SpaceSpec s;
  s.degree.assign(dim, degree);
  s.subdivisions.assign(dim, subdivisions);
  s.continuity.assign(dim, continuity);
  return s;
}

namespace {

int spec_entry(const std::vector<int>& v, int k, const char* what) {
  if (v.empty()) throw InvalidArgument(std::string("space spec: missing ") + what);
  if (v.size() == 1) return v[0];
  if (k >= static_cast<int>(v.size()))
    throw InvalidArgument(std::string("space spec: too few entries for ") + what);
  return v[k];
}

BSplineBasis build_space_basis(const BSplineBasis& geo, int degree,
                               int subdivisions, int continuity,
                               const int* interface_continuity) {
  if (degree < 0) throw InvalidArgument("space spec: negative degree");
  if (continuity < -1 || continuity >= std::max(degree, 1))
    throw InvalidArgument("space spec: continuity must lie in [-1, degree-1]");
  const int p_geo = geo.degree();
  std::vector<double> knots;
  const auto bp = geo.knot_vector().breakpoints();
  for (size_t i = 0; i < bp.size(); ++i) {
    int mult;
    if (i == 0 || i + 1 == bp.size()) {
      mult = degree + 1;
    } else {
      int c = p_geo - geo.knot_vector().multiplicity(bp[i]);
      c = std::min(c, degree - 1);
      if (interface_continuity) c = std::min(c, *interface_continuity);
      mult = degree - c;
    }
    for (int r = 0; r < mult; ++r) knots.push_back(bp[i]);
  }
  BSplineBasis coarse(std::move(knots), degree);
  if (subdivisions <= 1) return coarse;
  return refine_uniform(coarse, subdivisions, continuity);
}

} // namespace

std::vector<BSplineBasis> build_spaces(const TensorPatch& patch,
                                       const SpaceSpec& spec) {
  std::vector<BSplineBasis> out;
  for (int k = 0; k < patch.dim(); ++k) {
    const int degree = spec_entry(spec.degree, k, "degree");
    const int sub = spec_entry(spec.subdivisions, k, "subdivisions");
    const int cont = spec_entry(spec.continuity, k, "continuity");
    const int* ic = nullptr;
    int ic_val = 0;
    if (!spec.interface_continuity.empty()) {
      ic_val = spec_entry(spec.interface_continuity, k, "interface continuity");
      ic = &ic_val;
    }
    out.push_back(build_space_basis(patch.basis(k), degree, sub, cont, ic));
  }
  return out;
}

double StageTimes::total() const {
  double t = 0.0;
  for (double s : seconds) t += s;
  return t;
}

KleOperator KleOperator::build(const TensorPatch& patch, const SpaceSpec& trial,
                               const SpaceSpec& interp,
                               std::shared_ptr<const CovarianceKernel> kernel,
                               int threads, double jac_floor) {
  return build(patch, build_spaces(patch, trial), build_spaces(patch, interp),
               std::move(kernel), threads, jac_floor);
}

KleOperator KleOperator::build(const TensorPatch& patch,
                               std::vector<BSplineBasis> trial_bases,
                               std::vector<BSplineBasis> interp_bases,
                               std::shared_ptr<const CovarianceKernel> kernel,
                               int threads, double jac_floor) {
  const int d = patch.dim();
  if (static_cast<int>(trial_bases.size()) != d ||
      static_cast<int>(interp_bases.size()) != d)
    throw DimensionError("operator: space dimension does not match patch");
  if (threads < 1) throw InvalidArgument("operator: thread count must be >= 1");

  KleOperator op;
  op.patch_ = std::make_shared<TensorPatch>(patch);
  op.trial_bases_ = std::move(trial_bases);
  op.interp_bases_ = std::move(interp_bases);
  op.kernel_ = std::move(kernel);
  op.threads_ = threads;

  op.trial_dim_ = 1;
  op.interp_dim_ = 1;
  for (int k = 0; k < d; ++k) {
    op.trial_dim_ *= op.trial_bases_[k].size();
    op.interp_dim_ *= op.interp_bases_[k].size();
  }

  for (int k = 0; k < d; ++k) {
    // Greville points must strictly increase apart from the disambiguated
    // C^-1 pairs, which the one-sided collocation resolves
    const auto g = op.interp_bases_[k].greville_points();
    for (size_t i = 0; i + 1 < g.abscissae.size(); ++i) {
      if (g.abscissae[i] == g.abscissae[i + 1] &&
          !(g.sides[i] == Side::Left && g.sides[i + 1] == Side::Right)) {
        std::ostringstream os;
        os << "operator: coincident Greville points in direction " << k + 1;
        throw InvalidArgument(os.str());
      }
    }
    op.trial_mass_.push_back(trial_mass_matrix(op.trial_bases_[k]));
    op.mixed_mass_.push_back(
        mixed_mass_matrix(op.interp_bases_[k], op.trial_bases_[k]));
    op.collocation_.push_back(collocation_matrix(op.interp_bases_[k]));
    op.trial_chol_.push_back(CholeskyFactor::compute(op.trial_mass_.back()));
    op.collocation_lu_.push_back(LuFactor::compute(op.collocation_.back()));
  }

  op.grid_ = build_greville_grid(*op.patch_, op.interp_bases_, jac_floor);
  op.points_flat_.resize(static_cast<size_t>(op.interp_dim_) * d);
  audit::note(op.points_flat_.size() * sizeof(double));
  for (std::int64_t i = 0; i < op.interp_dim_; ++i)
    for (int k = 0; k < d; ++k)
      op.points_flat_[static_cast<size_t>(i) * d + k] = op.grid_.points(i, k);

  if (const auto* iso = dynamic_cast<const IsotropicKernel*>(op.kernel_.get())) {
    op.fast_sigma2_ = iso->sigma2();
    if (iso->family() == IsotropicKernel::Family::Exponential) {
      op.fast_ = FastKernel::Exponential;
      op.fast_scale_ = 1.0 / iso->corr_len();
    } else {
      op.fast_ = FastKernel::Gaussian;
      op.fast_scale_ = 1.0 / (iso->gauss_denom() * iso->corr_len() * iso->corr_len());
    }
  }
  return op;
}

namespace {

template <typename EntryFn>
void contract_rows(std::int64_t n, const double* y, double* z, int threads,
                   const EntryFn& entry) {
  const std::int64_t chunk = (n + threads - 1) / threads;
  auto worker = [&](std::int64_t row0, std::int64_t row1) {
    for (std::int64_t k = row0; k < row1; ++k) {
      double acc = 0.0;
      for (std::int64_t l = 0; l < n; ++l) acc += entry(k, l) * y[l];
      z[k] = acc;
    }
  };
  if (threads == 1) {
    worker(0, n);
    return;
  }
  std::vector<std::thread> pool;
  for (int t = 1; t < threads; ++t) {
    const std::int64_t r0 = std::min<std::int64_t>(t * chunk, n);
    const std::int64_t r1 = std::min<std::int64_t>((t + 1) * chunk, n);
    if (r0 < r1) pool.emplace_back(worker, r0, r1);
  }
  worker(0, std::min<std::int64_t>(chunk, n));
  for (auto& th : pool) th.join();
}

} // namespace

void KleOperator::kernel_contraction(const double* y, double* z,
                                     int threads) const {
  const int d = dim();
  const std::int64_t n = interp_dim_;
  const double* pts = points_flat_.data();
  switch (fast_) {
    case FastKernel::Exponential: {
      const double s2 = fast_sigma2_, sc = fast_scale_;
      contract_rows(n, y, z, threads, [&](std::int64_t k, std::int64_t l) {
        const double* a = pts + static_cast<size_t>(k) * d;
        const double* b = pts + static_cast<size_t>(l) * d;
        double r2 = 0.0;
        for (int m = 0; m < d; ++m) {
          const double dm = a[m] - b[m];
          r2 += dm * dm;
        }
        return s2 * std::exp(-std::sqrt(r2) * sc);
      });
      break;
    }
    case FastKernel::Gaussian: {
      const double s2 = fast_sigma2_, sc = fast_scale_;
      contract_rows(n, y, z, threads, [&](std::int64_t k, std::int64_t l) {
        const double* a = pts + static_cast<size_t>(k) * d;
        const double* b = pts + static_cast<size_t>(l) * d;
        double r2 = 0.0;
        for (int m = 0; m < d; ++m) {
          const double dm = a[m] - b[m];
          r2 += dm * dm;
        }
        return s2 * std::exp(-r2 * sc);
      });
      break;
    }
    default: {
      const CovarianceKernel& ker = *kernel_;
      contract_rows(n, y, z, threads, [&](std::int64_t k, std::int64_t l) {
        return ker.eval(
            std::span<const double>(pts + static_cast<size_t>(k) * d, d),
            std::span<const double>(pts + static_cast<size_t>(l) * d, d));
      });
    }
  }
}

Eigen::VectorXd KleOperator::apply(const Eigen::VectorXd& v) const {
  return apply(v, nullptr, threads_);
}

Eigen::VectorXd KleOperator::apply(const Eigen::VectorXd& v, StageTimes* times,
                                   int threads) const {
  if (v.size() != trial_dim_) {
    std::ostringstream os;
    os << "operator apply: vector length " << v.size() << ", expected "
       << trial_dim_;
    throw DimensionError(os.str());
  }
  if (threads < 1) threads = 1;
  using clock = std::chrono::steady_clock;
  auto t0 = clock::now();
  auto tick = [&](int stage) {
    if (!times) return;
    const auto t1 = clock::now();
    times->seconds[stage] += std::chrono::duration<double>(t1 - t0).count();
    t0 = t1;
  };

  const int d = dim();
  std::vector<const CholeskyFactor*> chol(d);
  std::vector<const LuFactor*> coll(d);
  std::vector<const UnivariateMatrix*> mixed(d);
  for (int k = 0; k < d; ++k) {
    chol[k] = &trial_chol_[k];
    coll[k] = &collocation_lu_[k];
    mixed[k] = &mixed_mass_[k];
  }
  const KroneckerFactors M(mixed);

  // (1) backward Cholesky solve: x = L^-T v
  Eigen::VectorXd x = v;
  audit::note(static_cast<size_t>(x.size()) * sizeof(double));
  kron_solve_cholesky(chol, x, TriangularSolve::Backward);
  tick(0);
  // (2) mixed mass: y = M x
  Eigen::VectorXd y = kron_matvec(M, x);
  audit::note(static_cast<size_t>(y.size()) * sizeof(double));
  tick(1);
  // (3) collocation transpose solve: y = B~^-T y
  kron_solve_lu(coll, y, /*transpose=*/true);
  tick(2);
  // (4) scale by J
  y.array() *= grid_.jacobian_sqrt.array();
  tick(3);
  // (5) kernel contraction, rows on the fly
  Eigen::VectorXd z(interp_dim_);
  audit::note(static_cast<size_t>(z.size()) * sizeof(double));
  kernel_contraction(y.data(), z.data(), threads);
  tick(4);
  // (6) scale by J
  z.array() *= grid_.jacobian_sqrt.array();
  tick(5);
  // (7) collocation solve: z = B~^-1 z
  kron_solve_lu(coll, z, /*transpose=*/false);
  tick(6);
  // (8) mixed mass transpose: out = M^T z
  Eigen::VectorXd out = kron_matvec(M, z, /*transpose=*/true);
  tick(7);
  // (9) forward Cholesky solve: out = L^-1 out
  kron_solve_cholesky(chol, out, TriangularSolve::Forward);
  tick(8);
  if (times) ++times->applies;
  return out;
}

Eigen::MatrixXd KleOperator::assemble_dense(std::int64_t cap) const {
  if (trial_dim_ > cap) {
    std::ostringstream os;
    os << "assemble_dense: trial dimension " << trial_dim_
       << " exceeds the cap " << cap;
    throw InvalidArgument(os.str());
  }
  const int d = dim();
  const std::int64_t nt = interp_dim_;
  std::vector<const CholeskyFactor*> chol(d);
  std::vector<const LuFactor*> coll(d);
  std::vector<const UnivariateMatrix*> mixed(d);
  for (int k = 0; k < d; ++k) {
    chol[k] = &trial_chol_[k];
    coll[k] = &collocation_lu_[k];
    mixed[k] = &mixed_mass_[k];
  }
  const KroneckerFactors M(mixed);

  // scaled kernel matrix G = J Gamma J, materialized (diagnostic path)
  Eigen::MatrixXd G(nt, nt);
  const double* pts = points_flat_.data();
  for (std::int64_t k = 0; k < nt; ++k) {
    for (std::int64_t l = 0; l <= k; ++l) {
      const double val =
          kernel_->eval(
              std::span<const double>(pts + static_cast<size_t>(k) * d, d),
              std::span<const double>(pts + static_cast<size_t>(l) * d, d)) *
          grid_.jacobian_sqrt[k] * grid_.jacobian_sqrt[l];
      G(k, l) = val;
      G(l, k) = val;
    }
  }
  // G~ = B~^-1 G B~^-T, column solves on G then on the transpose
  Eigen::VectorXd col(nt);
  for (std::int64_t j = 0; j < nt; ++j) {
    col = G.col(j);
    kron_solve_lu(coll, col, false);
    G.col(j) = col;
  }
  Eigen::MatrixXd Gt = G.transpose();
  for (std::int64_t j = 0; j < nt; ++j) {
    col = Gt.col(j);
    kron_solve_lu(coll, col, false);
    Gt.col(j) = col;
  }
  // A~ = M^T G~ M
  Eigen::MatrixXd T1(trial_dim_, nt);
  for (std::int64_t j = 0; j < nt; ++j)
    T1.col(j) = kron_matvec(M, Gt.col(j), /*transpose=*/true);
  Eigen::MatrixXd T1t = T1.transpose();
  Eigen::MatrixXd A(trial_dim_, trial_dim_);
  for (std::int64_t j = 0; j < trial_dim_; ++j)
    A.col(j) = kron_matvec(M, T1t.col(j), /*transpose=*/true);
  // A~' = L^-1 A~ L^-T
  Eigen::VectorXd acol(trial_dim_);
  for (std::int64_t j = 0; j < trial_dim_; ++j) {
    acol = A.col(j);
    kron_solve_cholesky(chol, acol, TriangularSolve::Forward);
    A.col(j) = acol;
  }
  Eigen::MatrixXd At = A.transpose();
  for (std::int64_t j = 0; j < trial_dim_; ++j) {
    acol = At.col(j);
    kron_solve_cholesky(chol, acol, TriangularSolve::Forward);
    At.col(j) = acol;
  }
  return At;
}

void KleOperator::recover_coefficients(Eigen::VectorXd& v) const {
  const int d = dim();
  std::vector<const CholeskyFactor*> chol(d);
  for (int k = 0; k < d; ++k) chol[k] = &trial_chol_[k];
  kron_solve_cholesky(chol, v, TriangularSolve::Backward);
}

Eigen::VectorXd KleOperator::apply_gramian(const Eigen::VectorXd& v) const {
  const int d = dim();
  std::vector<const UnivariateMatrix*> z(d);
  for (int k = 0; k < d; ++k) z[k] = &trial_mass_[k];
  return kron_matvec(KroneckerFactors(z), v);
}

} // namespace kle
