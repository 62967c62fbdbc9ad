#include "kle/eigensolver.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

namespace kle {

namespace {

// Deterministic start vector with entries in (-1, 1).
Eigen::VectorXd start_vector(std::int64_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  Eigen::VectorXd v(n);
  for (std::int64_t i = 0; i < n; ++i) v[i] = dist(rng);
  v.normalize();
  return v;
}

// Orthogonalizes w against the first `cols` columns of V (classical
// Gram-Schmidt, applied twice) and records the projection coefficients.
void reorthogonalize(const Eigen::MatrixXd& V, int cols, Eigen::VectorXd& w,
                     Eigen::VectorXd& h) {
  h = V.leftCols(cols).transpose() * w;
  w.noalias() -= V.leftCols(cols) * h;
  Eigen::VectorXd h2 = V.leftCols(cols).transpose() * w;
  w.noalias() -= V.leftCols(cols) * h2;
  h += h2;
}

} // namespace

KleSpectrum solve_spectrum(const KleOperator& op, const LanczosConfig& config) {
  const std::int64_t n = op.trial_dim();
  const int want = config.num_modes;
  if (want < 1 || want >= n)
    throw InvalidArgument("lanczos: num_modes must satisfy 0 < M < N");
  int m = config.krylov_dim > 0 ? config.krylov_dim
                                : std::max(2 * want + 1, 20);
  m = static_cast<int>(std::min<std::int64_t>(m, n));
  if (m <= want)
    throw InvalidArgument("lanczos: krylov_dim must exceed num_modes");
  if (config.tol <= 0.0) throw InvalidArgument("lanczos: tol must be positive");

  Eigen::MatrixXd V(n, m);
  Eigen::MatrixXd H = Eigen::MatrixXd::Zero(m, m);
  Eigen::VectorXd vnext = start_vector(n, config.seed);
  int kept = 0;
  int applies = 0;
  int restart = 0;
  double beta = 0.0;
  std::mt19937_64 refill_rng(config.seed ^ 0x5bf03635u);

  Eigen::VectorXd theta;       // Ritz values, descending
  Eigen::MatrixXd ritz;        // Ritz vectors in the V basis
  Eigen::VectorXd edge;        // last-row components for residual estimates

  auto extract = [&](KleSpectrum& out, const Eigen::VectorXd& lam,
                     const Eigen::MatrixXd& y) {
    const int mm = want;
    out.eigenvalues.resize(mm);
    out.residuals.resize(mm);
    out.coefficients.resize(n, mm);
    const double scale = std::max(std::abs(lam[0]), 1e-300);
    for (int i = 0; i < mm; ++i) {
      Eigen::VectorXd vp = V.leftCols(y.rows()) * y.col(i);
      // explicit residual in the standard form
      Eigen::VectorXd r = op.apply(vp) - lam[i] * vp;
      ++applies;
      out.residuals[i] = r.norm();
      double ev = lam[i];
      if (ev < 0.0) {
        if (ev > -config.tol * scale) {
          ++out.clipped_count;
        } else {
          out.psd_violation = true;
        }
        ev = 0.0;
      }
      out.eigenvalues[i] = ev;
      // recover trial coefficients v = L^-T v' and B-normalize
      op.recover_coefficients(vp);
      const double bnorm = std::sqrt(vp.dot(op.apply_gramian(vp)));
      if (bnorm > 0.0) vp /= bnorm;
      int imax = 0;
      vp.cwiseAbs().maxCoeff(&imax);
      if (vp[imax] < 0.0) vp = -vp;
      out.coefficients.col(i) = vp;
    }
    out.iterations = applies;
    out.restarts = restart;
  };

  for (restart = 0; restart <= config.max_restarts; ++restart) {
    int j = kept;
    V.col(j) = vnext;
    Eigen::VectorXd h;
    for (; j < m; ++j) {
      Eigen::VectorXd w = op.apply(V.col(j));
      ++applies;
      reorthogonalize(V, j + 1, w, h);
      H.col(j).head(j + 1) = h;
      H.row(j).head(j + 1) = h.transpose();
      beta = w.norm();
      if (j + 1 < m) {
        if (beta > 1e-13) {
          V.col(j + 1) = w / beta;
        } else {
          // invariant subspace: continue with a fresh orthogonal direction
          std::uniform_real_distribution<double> dist(-1.0, 1.0);
          Eigen::VectorXd r(n);
          for (std::int64_t i = 0; i < n; ++i) r[i] = dist(refill_rng);
          Eigen::VectorXd tmp;
          reorthogonalize(V, j + 1, r, tmp);
          r.normalize();
          V.col(j + 1) = r;
          beta = 0.0;
        }
      } else {
        vnext = beta > 1e-13 ? Eigen::VectorXd(w / beta) : Eigen::VectorXd();
      }
    }

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(H);
    theta = es.eigenvalues().reverse();
    ritz = es.eigenvectors().rowwise().reverse();
    edge = ritz.row(m - 1).transpose();

    const double scale = std::max(std::abs(theta[0]), 1e-300);
    bool ok = true;
    for (int i = 0; i < want; ++i)
      if (beta * std::abs(edge[i]) > config.tol * scale) { ok = false; break; }

    if (ok) {
      KleSpectrum out;
      extract(out, theta, ritz);
      bool verified = true;
      for (int i = 0; i < want; ++i)
        if (out.residuals[i] > config.tol * scale) { verified = false; break; }
      if (verified) return out;
    }

    if (restart == config.max_restarts || vnext.size() == 0) break;

    // thick restart: keep the leading Ritz vectors plus the residual vector
    const int keep = std::min(m - 1, want + (m - want) / 2);
    Eigen::MatrixXd Vnew = V * ritz.leftCols(keep);
    V.leftCols(keep) = Vnew;
    H.setZero();
    H.topLeftCorner(keep, keep) = theta.head(keep).asDiagonal();
    // arrowhead couplings to the restart vector are rebuilt by the explicit
    // reorthogonalization dot products in the next expansion sweep
    kept = keep;
  }

  KleSpectrum best;
  extract(best, theta, ritz);
  std::ostringstream os;
  os << "lanczos: no convergence within " << config.max_restarts
     << " restarts (worst residual " << best.residuals.maxCoeff() << ")";
  throw NotConvergedError(os.str(), std::move(best));
}

namespace {

// sum_j c_j B_j(xi) for one tensor point (c in vectorization order).
double spline_value(const Eigen::VectorXd& c,
                    std::span<const BSplineBasis> bases,
                    std::span<const double> xi) {
  const int d = static_cast<int>(bases.size());
  int first[3];
  double vals[3][32];
  for (int k = 0; k < d; ++k) {
    const int p = bases[k].degree();
    first[k] = bases[k].evaluate(xi[k], std::span<double>(vals[k], p + 1));
  }
  std::int64_t stride[3] = {1, 1, 1};
  for (int k = 1; k < d; ++k) stride[k] = stride[k - 1] * bases[k - 1].size();
  const int n1 = bases[0].degree() + 1;
  const int n2 = d > 1 ? bases[1].degree() + 1 : 1;
  const int n3 = d > 2 ? bases[2].degree() + 1 : 1;
  double acc = 0.0;
  for (int i3 = 0; i3 < n3; ++i3)
    for (int i2 = 0; i2 < n2; ++i2)
      for (int i1 = 0; i1 < n1; ++i1) {
        std::int64_t flat = (first[0] + i1) * stride[0];
        double B = vals[0][i1];
        if (d > 1) { flat += (first[1] + i2) * stride[1]; B *= vals[1][i2]; }
        if (d > 2) { flat += (first[2] + i3) * stride[2]; B *= vals[2][i3]; }
        acc += c[flat] * B;
      }
  return acc;
}

} // namespace

double eval_eigenfunction(const KleSpectrum& spectrum, const TensorPatch& patch,
                          std::span<const BSplineBasis> trial_bases, int mode,
                          std::span<const double> xi, double jac_floor,
                          int* floored) {
  if (mode < 0 || mode >= spectrum.eigenvalues.size())
    throw InvalidArgument("eval_eigenfunction: mode index out of range");
  const double num =
      spline_value(spectrum.coefficients.col(mode), trial_bases, xi);
  double det = patch.jacobian_determinant(xi);
  if (det < jac_floor) {
    det = jac_floor;
    if (floored) ++(*floored);
  }
  return num / std::sqrt(det);
}

Eigen::MatrixXd eval_modes_on_grid(const KleSpectrum& spectrum,
                                   const TensorPatch& patch,
                                   std::span<const BSplineBasis> trial_bases,
                                   std::span<const std::vector<double>> coords,
                                   double jac_floor, int* floored) {
  const int d = static_cast<int>(trial_bases.size());
  std::vector<UnivariateMatrix> evals;
  std::vector<const UnivariateMatrix*> ptrs;
  for (int k = 0; k < d; ++k) {
    evals.push_back(evaluation_matrix(trial_bases[k], coords[k], {}));
  }
  for (const auto& e : evals) ptrs.push_back(&e);
  const KroneckerFactors E(ptrs);

  GeometryGrid grid = evaluate_geometry_grid(patch, coords);
  const std::int64_t npts = grid.det.size();
  Eigen::VectorXd scale(npts);
  for (std::int64_t i = 0; i < npts; ++i) {
    double det = grid.det[i];
    if (det < jac_floor) {
      det = jac_floor;
      if (floored) ++(*floored);
    }
    scale[i] = 1.0 / std::sqrt(det);
  }

  const int M = static_cast<int>(spectrum.eigenvalues.size());
  Eigen::MatrixXd out(npts, M);
  for (int i = 0; i < M; ++i)
    out.col(i) =
        kron_matvec(E, spectrum.coefficients.col(i)).cwiseProduct(scale);
  return out;
}

Eigen::VectorXd variance_field(const KleSpectrum& spectrum,
                               const TensorPatch& patch,
                               std::span<const BSplineBasis> trial_bases,
                               std::span<const std::vector<double>> coords) {
  if (spectrum.eigenvalues.size() == 0) {
    std::int64_t npts = 1;
    for (const auto& c : coords) npts *= static_cast<std::int64_t>(c.size());
    return Eigen::VectorXd::Zero(npts);
  }
  const Eigen::MatrixXd phi =
      eval_modes_on_grid(spectrum, patch, trial_bases, coords);
  Eigen::VectorXd out = Eigen::VectorXd::Zero(phi.rows());
  for (int i = 0; i < phi.cols(); ++i)
    out += spectrum.eigenvalues[i] * phi.col(i).cwiseAbs2();
  return out;
}

Eigen::MatrixXd sample_realizations(const KleSpectrum& spectrum,
                                    const Eigen::VectorXd& mu, int count,
                                    std::uint64_t seed) {
  if (count < 0) throw InvalidArgument("sample_realizations: negative count");
  const std::int64_t n = spectrum.coefficients.rows();
  const int M = static_cast<int>(spectrum.eigenvalues.size());
  if (mu.size() != 0 && mu.size() != n)
    throw DimensionError("sample_realizations: mean field length mismatch");
  Eigen::MatrixXd out(n, count);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int j = 0; j < count; ++j) {
    Eigen::VectorXd c =
        mu.size() ? Eigen::VectorXd(mu) : Eigen::VectorXd(Eigen::VectorXd::Zero(n));
    for (int i = 0; i < M; ++i)
      c += std::sqrt(spectrum.eigenvalues[i]) * normal(rng) *
           spectrum.coefficients.col(i);
    out.col(j) = c;
  }
  return out;
}

} // namespace kle
