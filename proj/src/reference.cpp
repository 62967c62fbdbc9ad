#include "kle/reference.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <sstream>

#include "kle/errors.hpp"
#include "kle/quadrature.hpp"
#include "kle/tensor.hpp"

namespace kle {

namespace {

// Tensor Gauss grid over all knot spans of the given bases: per-direction
// coordinates and weights, plus flattened total weights and geometry data.
struct QuadGrid {
  std::vector<std::vector<double>> coords; // per direction
  Eigen::VectorXd weights;                 // flattened, vectorization order
  Eigen::MatrixXd points;                  // physical points
  Eigen::VectorXd det;                     // Jacobian determinants
  std::int64_t size = 0;
};

QuadGrid make_quad_grid(const TensorPatch& patch,
                        std::span<const BSplineBasis> bases, int q) {
  const int d = patch.dim();
  QuadGrid grid;
  grid.coords.resize(d);
  std::vector<std::vector<double>> wts(d);
  const GaussRule rule = gauss_rule(q);
  for (int k = 0; k < d; ++k) {
    const auto bp = bases[k].knot_vector().breakpoints();
    for (size_t e = 0; e + 1 < bp.size(); ++e) {
      const double mid = 0.5 * (bp[e] + bp[e + 1]);
      const double halfw = 0.5 * (bp[e + 1] - bp[e]);
      for (int g = 0; g < q; ++g) {
        grid.coords[k].push_back(mid + halfw * rule.nodes[g]);
        wts[k].push_back(halfw * rule.weights[g]);
      }
    }
  }
  GeometryGrid geo = evaluate_geometry_grid(patch, grid.coords);
  grid.points = std::move(geo.points);
  grid.det = std::move(geo.det);
  grid.size = grid.det.size();
  grid.weights.resize(grid.size);
  const std::int64_t n1 = grid.coords[0].size();
  const std::int64_t n2 = d > 1 ? grid.coords[1].size() : 1;
  const std::int64_t n3 = d > 2 ? grid.coords[2].size() : 1;
  std::int64_t flat = 0;
  for (std::int64_t i3 = 0; i3 < n3; ++i3)
    for (std::int64_t i2 = 0; i2 < n2; ++i2)
      for (std::int64_t i1 = 0; i1 < n1; ++i1, ++flat) {
        double w = wts[0][i1];
        if (d > 1) w *= wts[1][i2];
        if (d > 2) w *= wts[2][i3];
        grid.weights[flat] = w;
      }
  return grid;
}

// Per-grid-point active trial functions: first flat index offsets and the
// (p+1)^d tensor-product values.
struct BasisTable {
  std::vector<std::vector<std::int64_t>> index; // per point
  std::vector<std::vector<double>> value;
};

BasisTable tabulate_basis(std::span<const BSplineBasis> bases,
                          const QuadGrid& grid) {
  const int d = static_cast<int>(bases.size());
  std::vector<UnivariateMatrix> evals;
  for (int k = 0; k < d; ++k)
    evals.push_back(evaluation_matrix(
        bases[k], std::span<const double>(grid.coords[k])));
  std::int64_t stride[3] = {1, 1, 1};
  for (int k = 1; k < d; ++k) stride[k] = stride[k - 1] * bases[k - 1].size();

  BasisTable table;
  table.index.resize(grid.size);
  table.value.resize(grid.size);
  const std::int64_t n1 = grid.coords[0].size();
  const std::int64_t n2 = d > 1 ? grid.coords[1].size() : 1;
  const std::int64_t n3 = d > 2 ? grid.coords[2].size() : 1;
  std::int64_t flat = 0;
  for (std::int64_t i3 = 0; i3 < n3; ++i3)
    for (std::int64_t i2 = 0; i2 < n2; ++i2)
      for (std::int64_t i1 = 0; i1 < n1; ++i1, ++flat) {
        const std::int64_t ig[3] = {i1, i2, i3};
        int width[3] = {1, 1, 1};
        for (int k = 0; k < d; ++k)
          width[k] = evals[k].row_width(static_cast<int>(ig[k]));
        auto& idx = table.index[flat];
        auto& val = table.value[flat];
        for (int a3 = 0; a3 < (d > 2 ? width[2] : 1); ++a3)
          for (int a2 = 0; a2 < (d > 1 ? width[1] : 1); ++a2)
            for (int a1 = 0; a1 < width[0]; ++a1) {
              std::int64_t fi =
                  (evals[0].row_begin(static_cast<int>(ig[0])) + a1) * stride[0];
              double B = evals[0].row_values(static_cast<int>(ig[0]))[a1];
              if (d > 1) {
                fi += (evals[1].row_begin(static_cast<int>(ig[1])) + a2) * stride[1];
                B *= evals[1].row_values(static_cast<int>(ig[1]))[a2];
              }
              if (d > 2) {
                fi += (evals[2].row_begin(static_cast<int>(ig[2])) + a3) * stride[2];
                B *= evals[2].row_values(static_cast<int>(ig[2]))[a3];
              }
              idx.push_back(fi);
              val.push_back(B);
            }
      }
  return table;
}

void fix_sign(Eigen::Ref<Eigen::VectorXd> v) {
  int imax = 0;
  v.cwiseAbs().maxCoeff(&imax);
  if (v[imax] < 0.0) v = -v;
}

} // namespace

Eigen::MatrixXd dense_kron(const std::vector<Eigen::MatrixXd>& by_direction) {
  // first factor acts on the fastest index: out = D_d x ... x D_1
  Eigen::MatrixXd out = Eigen::MatrixXd::Ones(1, 1);
  for (const auto& D : by_direction) {
    Eigen::MatrixXd next(D.rows() * out.rows(), D.cols() * out.cols());
    for (std::int64_t i = 0; i < D.rows(); ++i)
      for (std::int64_t j = 0; j < D.cols(); ++j)
        next.block(i * out.rows(), j * out.cols(), out.rows(), out.cols()) =
            D(i, j) * out;
    out = std::move(next);
  }
  return out;
}

DenseGalerkinProblem assemble_dense_galerkin(
    const TensorPatch& patch, std::span<const BSplineBasis> trial_bases,
    const CovarianceKernel& kernel, int quad_order, std::int64_t cap) {
  const int d = patch.dim();
  std::int64_t N = 1;
  int pmax = 0;
  for (const auto& b : trial_bases) {
    N *= b.size();
    pmax = std::max(pmax, b.degree());
  }
  if (N > cap) {
    std::ostringstream os;
    os << "dense galerkin: trial dimension " << N << " exceeds the cap " << cap;
    throw InvalidArgument(os.str());
  }
  if (quad_order < pmax + 1)
    throw InvalidArgument("dense galerkin: quadrature order below p+1");

  const QuadGrid grid = make_quad_grid(patch, trial_bases, quad_order);
  const BasisTable table = tabulate_basis(trial_bases, grid);

  // A = C^T Gamma C with C(g, i) = w_g sqrt(det_g) B_i(xi_g), kernel rows
  // formed one at a time
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(N, N);
  Eigen::VectorXd crow(grid.size);
  for (std::int64_t g = 0; g < grid.size; ++g)
    crow[g] = grid.weights[g] * std::sqrt(grid.det[g]);
  std::vector<double> pts(static_cast<size_t>(grid.size) * d);
  for (std::int64_t g = 0; g < grid.size; ++g)
    for (int k = 0; k < d; ++k)
      pts[static_cast<size_t>(g) * d + k] = grid.points(g, k);

  Eigen::VectorXd D(N);
  for (std::int64_t g = 0; g < grid.size; ++g) {
    D.setZero();
    const double* gx = pts.data() + static_cast<size_t>(g) * d;
    for (std::int64_t h = 0; h < grid.size; ++h) {
      const double gam =
          kernel.eval(std::span<const double>(gx, d),
                      std::span<const double>(
                          pts.data() + static_cast<size_t>(h) * d, d));
      const double c = gam * crow[h];
      const auto& idx = table.index[h];
      const auto& val = table.value[h];
      for (size_t t = 0; t < idx.size(); ++t) D[idx[t]] += c * val[t];
    }
    const auto& idx = table.index[g];
    const auto& val = table.value[g];
    for (size_t t = 0; t < idx.size(); ++t)
      A.row(idx[t]) += (crow[g] * val[t]) * D.transpose();
  }
  // enforce exact symmetry lost to accumulation order
  A = 0.5 * (A + A.transpose()).eval();

  std::vector<Eigen::MatrixXd> Z;
  for (const auto& b : trial_bases) Z.push_back(trial_mass_matrix(b).dense());
  DenseGalerkinProblem problem;
  problem.A = std::move(A);
  problem.B = dense_kron(Z);
  problem.quad_order = quad_order;
  return problem;
}

DenseSpectrum solve_dense(const DenseGalerkinProblem& problem, int M) {
  const std::int64_t N = problem.A.rows();
  M = static_cast<int>(std::min<std::int64_t>(M, N));
  Eigen::LLT<Eigen::MatrixXd> llt(problem.B);
  if (llt.info() != Eigen::Success)
    throw FactorizationError("solve_dense: Gramian not positive definite", 0);
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd C =
      L.triangularView<Eigen::Lower>().solve(problem.A.transpose());
  C = L.triangularView<Eigen::Lower>().solve(C.transpose()).eval();
  C = 0.5 * (C + C.transpose()).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(C);
  DenseSpectrum out;
  out.eigenvalues.resize(M);
  out.coefficients.resize(N, M);
  for (int i = 0; i < M; ++i) {
    out.eigenvalues[i] = es.eigenvalues()[N - 1 - i];
    Eigen::VectorXd v = es.eigenvectors().col(N - 1 - i);
    v = L.transpose().triangularView<Eigen::Upper>().solve(v);
    const double bnorm = std::sqrt(v.dot(problem.B * v));
    if (bnorm > 0.0) v /= bnorm;
    fix_sign(v);
    out.coefficients.col(i) = v;
  }
  return out;
}

std::vector<double> analytic_exponential_spectrum_1d(double corr_len,
                                                     double domain_length,
                                                     int count, double sigma2) {
  if (!(corr_len > 0.0) || !(domain_length > 0.0))
    throw InvalidArgument("analytic spectrum: lengths must be positive");
  if (count < 1) throw InvalidArgument("analytic spectrum: count must be >= 1");
  const double c = 1.0 / corr_len;
  const double a = 0.5 * domain_length;
  const double ca = c * a;

  // even family: c*a*cos(t) - t*sin(t) = 0 on (k*pi, k*pi + pi/2)
  // odd family:  t*cos(t) + c*a*sin(t) = 0 on (k*pi + pi/2, (k+1)*pi)
  auto bisect = [](auto f, double lo, double hi) {
    double flo = f(lo);
    for (int it = 0; it < 200; ++it) {
      const double mid = 0.5 * (lo + hi);
      const double fmid = f(mid);
      if ((flo < 0.0) == (fmid < 0.0)) {
        lo = mid;
        flo = fmid;
      } else {
        hi = mid;
      }
    }
    return 0.5 * (lo + hi);
  };

  std::vector<double> omegas;
  const double eps = 1e-12;
  for (int k = 0; static_cast<int>(omegas.size()) < count; ++k) {
    const double base = k * M_PI;
    const double t_even =
        bisect([&](double t) { return ca * std::cos(t) - t * std::sin(t); },
               base + eps, base + 0.5 * M_PI - eps);
    omegas.push_back(t_even / a);
    if (static_cast<int>(omegas.size()) == count) break;
    const double t_odd =
        bisect([&](double t) { return t * std::cos(t) + ca * std::sin(t); },
               base + 0.5 * M_PI + eps, base + M_PI);
    omegas.push_back(t_odd / a);
  }
  std::vector<double> lambda(count);
  for (int i = 0; i < count; ++i)
    lambda[i] = 2.0 * c * sigma2 / (omegas[i] * omegas[i] + c * c);
  return lambda;
}

double kernel_interpolation_error(const TensorPatch& patch,
                                  std::span<const BSplineBasis> interp_bases,
                                  const CovarianceKernel& kernel,
                                  int quad_order) {
  const int d = patch.dim();
  // Greville data of the scaled kernel G = pullback * sqrt(det det')
  const GrevilleGrid greville = build_greville_grid(patch, interp_bases);
  const std::int64_t nt = greville.points.rows();

  std::vector<double> gpts(static_cast<size_t>(nt) * d);
  for (std::int64_t i = 0; i < nt; ++i)
    for (int k = 0; k < d; ++k)
      gpts[static_cast<size_t>(i) * d + k] = greville.points(i, k);
  Eigen::MatrixXd G(nt, nt);
  for (std::int64_t i = 0; i < nt; ++i) {
    const double* xi = gpts.data() + static_cast<size_t>(i) * d;
    for (std::int64_t j = 0; j <= i; ++j) {
      const double val =
          kernel.eval(std::span<const double>(xi, d),
                      std::span<const double>(
                          gpts.data() + static_cast<size_t>(j) * d, d)) *
          greville.jacobian_sqrt[i] * greville.jacobian_sqrt[j];
      G(i, j) = val;
      G(j, i) = val;
    }
  }
  // interpolation coefficients: Gc = B~^-1 G B~^-T
  std::vector<UnivariateMatrix> colls;
  std::vector<LuFactor> lus;
  for (int k = 0; k < d; ++k) {
    colls.push_back(collocation_matrix(interp_bases[k]));
    lus.push_back(LuFactor::compute(colls.back()));
  }
  std::vector<const LuFactor*> luptr;
  for (const auto& f : lus) luptr.push_back(&f);
  Eigen::VectorXd col(nt);
  for (std::int64_t j = 0; j < nt; ++j) {
    col = G.col(j);
    kron_solve_lu(luptr, col, false);
    G.col(j) = col;
  }
  Eigen::MatrixXd Gc = G.transpose();
  for (std::int64_t j = 0; j < nt; ++j) {
    col = Gc.col(j);
    kron_solve_lu(luptr, col, false);
    Gc.col(j) = col;
  }

  // evaluate interpolant and exact kernel on the tensor Gauss grid
  const QuadGrid grid = make_quad_grid(patch, interp_bases, quad_order);
  std::vector<UnivariateMatrix> evals;
  std::vector<const UnivariateMatrix*> evptr;
  for (int k = 0; k < d; ++k)
    evals.push_back(evaluation_matrix(
        interp_bases[k], std::span<const double>(grid.coords[k])));
  for (const auto& e : evals) evptr.push_back(&e);
  const KroneckerFactors E(evptr);

  Eigen::MatrixXd T(grid.size, nt);
  for (std::int64_t j = 0; j < nt; ++j) T.col(j) = kron_matvec(E, Gc.col(j));
  Eigen::MatrixXd Tt = T.transpose();
  Eigen::MatrixXd Gtilde(grid.size, grid.size);
  for (std::int64_t j = 0; j < grid.size; ++j)
    Gtilde.col(j) = kron_matvec(E, Tt.col(j));

  double err2 = 0.0, norm2 = 0.0;
  std::vector<double> pts(static_cast<size_t>(grid.size) * d);
  for (std::int64_t g = 0; g < grid.size; ++g)
    for (int k = 0; k < d; ++k)
      pts[static_cast<size_t>(g) * d + k] = grid.points(g, k);
  for (std::int64_t g = 0; g < grid.size; ++g) {
    const double* gx = pts.data() + static_cast<size_t>(g) * d;
    const double sg = std::sqrt(grid.det[g]);
    for (std::int64_t h = 0; h < grid.size; ++h) {
      const double gexact =
          kernel.eval(std::span<const double>(gx, d),
                      std::span<const double>(
                          pts.data() + static_cast<size_t>(h) * d, d)) *
          sg * std::sqrt(grid.det[h]);
      const double w = grid.weights[g] * grid.weights[h];
      const double diff = gexact - Gtilde(g, h);
      err2 += w * diff * diff;
      norm2 += w * gexact * gexact;
    }
  }
  return std::sqrt(err2 / norm2);
}

std::pair<double, double> operator_error_norms(const Eigen::MatrixXd& A,
                                               const Eigen::MatrixXd& A_tilde) {
  if (A.rows() != A_tilde.rows() || A.cols() != A_tilde.cols())
    throw DimensionError("operator_error_norms: shape mismatch");
  auto two_norm = [](const Eigen::MatrixXd& S) {
    // power iteration on a symmetric matrix, relative tolerance 1e-6
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> dist(-1.0, 1.0);
    Eigen::VectorXd v(S.rows());
    for (std::int64_t i = 0; i < v.size(); ++i) v[i] = dist(rng);
    v.normalize();
    double prev = 0.0;
    for (int it = 0; it < 20000; ++it) {
      Eigen::VectorXd w = S * v;
      const double norm = w.norm();
      if (norm == 0.0) return 0.0;
      v = w / norm;
      if (std::abs(norm - prev) <= 1e-6 * norm && it > 2) return norm;
      prev = norm;
    }
    return prev;
  };
  const Eigen::MatrixXd D = A - A_tilde;
  const double n2 = two_norm(D) / two_norm(A);
  const double nf = D.norm() / A.norm();
  return {n2, nf};
}

Eigen::MatrixXd assemble_standard_form_oracle(
    const TensorPatch& patch, std::span<const BSplineBasis> trial_bases,
    std::span<const BSplineBasis> interp_bases, const CovarianceKernel& kernel,
    std::int64_t cap) {
  const int d = patch.dim();
  std::int64_t N = 1, Nt = 1;
  for (const auto& b : trial_bases) N *= b.size();
  for (const auto& b : interp_bases) Nt *= b.size();
  if (N > cap || Nt > cap)
    throw InvalidArgument("standard form oracle: dimension exceeds the cap");

  std::vector<Eigen::MatrixXd> Zs, Ms, Bs;
  for (int k = 0; k < d; ++k) {
    Zs.push_back(trial_mass_matrix(trial_bases[k]).dense());
    Ms.push_back(mixed_mass_matrix(interp_bases[k], trial_bases[k]).dense());
    Bs.push_back(collocation_matrix(interp_bases[k]).dense());
  }
  const Eigen::MatrixXd B = dense_kron(Zs);
  const Eigen::MatrixXd M = dense_kron(Ms);
  const Eigen::MatrixXd Bt = dense_kron(Bs);

  const GrevilleGrid grid = build_greville_grid(patch, interp_bases);
  std::vector<double> gpts(static_cast<size_t>(Nt) * d);
  for (std::int64_t i = 0; i < Nt; ++i)
    for (int k = 0; k < d; ++k)
      gpts[static_cast<size_t>(i) * d + k] = grid.points(i, k);
  Eigen::MatrixXd Gamma(Nt, Nt);
  for (std::int64_t i = 0; i < Nt; ++i) {
    const double* xi = gpts.data() + static_cast<size_t>(i) * d;
    for (std::int64_t j = 0; j <= i; ++j) {
      const double val =
          kernel.eval(std::span<const double>(xi, d),
                      std::span<const double>(
                          gpts.data() + static_cast<size_t>(j) * d, d));
      Gamma(i, j) = val;
      Gamma(j, i) = val;
    }
  }
  const Eigen::MatrixXd G =
      grid.jacobian_sqrt.asDiagonal() * Gamma * grid.jacobian_sqrt.asDiagonal();

  Eigen::PartialPivLU<Eigen::MatrixXd> blu(Bt);
  const Eigen::MatrixXd Gtilde = blu.solve(blu.solve(G).transpose()).transpose();
  const Eigen::MatrixXd At = M.transpose() * Gtilde * M;

  Eigen::LLT<Eigen::MatrixXd> llt(B);
  if (llt.info() != Eigen::Success)
    throw FactorizationError("standard form oracle: Gramian not SPD", 0);
  const Eigen::MatrixXd L = llt.matrixL();
  Eigen::MatrixXd out = L.triangularView<Eigen::Lower>().solve(At.transpose());
  out = L.triangularView<Eigen::Lower>().solve(out.transpose()).eval();
  return 0.5 * (out + out.transpose()).eval();
}

} // namespace kle
