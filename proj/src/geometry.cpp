#include "kle/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "kle/errors.hpp"
#include "kle/quadrature.hpp"

namespace kle {

namespace {

double det_small(const Eigen::MatrixXd& J) {
  switch (J.rows()) {
    case 1: return J(0, 0);
    case 2: return J(0, 0) * J(1, 1) - J(0, 1) * J(1, 0);
    default: return J.determinant();
  }
}

std::string point_string(std::span<const double> xi) {
  std::ostringstream os;
  os << "(";
  for (size_t k = 0; k < xi.size(); ++k) os << (k ? ", " : "") << xi[k];
  os << ")";
  return os.str();
}

} // namespace

TensorPatch::TensorPatch(std::vector<BSplineBasis> bases,
                         Eigen::MatrixXd control_points,
                         Eigen::VectorXd weights)
    : bases_(std::move(bases)), control_points_(std::move(control_points)),
      weights_(std::move(weights)) {
  const int d = dim();
  if (d < 1 || d > 3)
    throw InvalidArgument("patch: dimension must be between 1 and 3");
  std::int64_t n = 1;
  for (const auto& b : bases_) n *= b.size();
  if (control_points_.rows() != n || control_points_.cols() != d)
    throw DimensionError("patch: control point array shape mismatch");
  if (weights_.size() != n)
    throw DimensionError("patch: weight array shape mismatch");
  for (std::int64_t i = 0; i < n; ++i)
    if (!(weights_[i] > 0.0))
      throw InvalidArgument("patch: weights must be strictly positive");
}

namespace {

struct ActiveBasis {
  int first;
  double values[32];
  double derivs[32];
};

void evaluate_all(const TensorPatch& patch, std::span<const double> xi,
                  std::span<const Side> sides, bool with_derivs,
                  Eigen::VectorXd* point, Eigen::MatrixXd* jac) {
  const int d = patch.dim();
  if (static_cast<int>(xi.size()) != d)
    throw DimensionError("patch evaluation: parameter dimension mismatch");

  ActiveBasis act[3];
  for (int k = 0; k < d; ++k) {
    const Side s = sides.empty() ? Side::Right : sides[k];
    const int p = patch.basis(k).degree();
    if (with_derivs)
      act[k].first = patch.basis(k).evaluate_with_derivative(
          xi[k], std::span<double>(act[k].values, p + 1),
          std::span<double>(act[k].derivs, p + 1), s);
    else
      act[k].first = patch.basis(k).evaluate(
          xi[k], std::span<double>(act[k].values, p + 1), s);
  }

  std::int64_t stride[3] = {1, 1, 1};
  for (int k = 1; k < d; ++k)
    stride[k] = stride[k - 1] * patch.basis(k - 1).size();

  Eigen::VectorXd A = Eigen::VectorXd::Zero(d);
  double W = 0.0;
  Eigen::MatrixXd dA = Eigen::MatrixXd::Zero(d, d); // column j: dA/dxi_j
  Eigen::VectorXd dW = Eigen::VectorXd::Zero(d);

  const int pb[3] = {patch.basis(0).degree(),
                     d > 1 ? patch.basis(1).degree() : 0,
                     d > 2 ? patch.basis(2).degree() : 0};
  int idx[3] = {0, 0, 0};
  const int n1 = pb[0] + 1;
  const int n2 = d > 1 ? pb[1] + 1 : 1;
  const int n3 = d > 2 ? pb[2] + 1 : 1;
  for (idx[2] = 0; idx[2] < n3; ++idx[2])
    for (idx[1] = 0; idx[1] < n2; ++idx[1])
      for (idx[0] = 0; idx[0] < n1; ++idx[0]) {
        std::int64_t flat = 0;
        double B = 1.0;
        for (int k = 0; k < d; ++k) {
          flat += (act[k].first + idx[k]) * stride[k];
          B *= act[k].values[idx[k]];
        }
        const double wB = patch.weights()[flat] * B;
        W += wB;
        A += wB * patch.control_points().row(flat).transpose();
        if (with_derivs) {
          for (int j = 0; j < d; ++j) {
            double dB = 1.0;
            for (int k = 0; k < d; ++k)
              dB *= (k == j) ? act[k].derivs[idx[k]] : act[k].values[idx[k]];
            const double wdB = patch.weights()[flat] * dB;
            dW[j] += wdB;
            dA.col(j) += wdB * patch.control_points().row(flat).transpose();
          }
        }
      }

  const Eigen::VectorXd F = A / W;
  if (point) *point = F;
  if (jac) {
    jac->resize(d, d);
    for (int j = 0; j < d; ++j) jac->col(j) = (dA.col(j) - F * dW[j]) / W;
  }
}

} // namespace

Eigen::VectorXd TensorPatch::map_point(std::span<const double> xi) const {
  return map_point(xi, {});
}

Eigen::VectorXd TensorPatch::map_point(std::span<const double> xi,
                                       std::span<const Side> sides) const {
  Eigen::VectorXd p;
  evaluate_all(*this, xi, sides, false, &p, nullptr);
  return p;
}

Eigen::MatrixXd TensorPatch::jacobian(std::span<const double> xi,
                                      std::span<const Side> sides) const {
  Eigen::MatrixXd J;
  evaluate_all(*this, xi, sides, true, nullptr, &J);
  return J;
}

double TensorPatch::jacobian_determinant(std::span<const double> xi,
                                         std::span<const Side> sides) const {
  const double det = det_small(jacobian(xi, sides));
  if (!(det > 0.0)) {
    std::ostringstream os;
    os << "singular geometry: det DF = " << det << " at " << point_string(xi);
    throw SingularGeometryError(os.str());
  }
  return det;
}

GeometryGrid evaluate_geometry_grid(const TensorPatch& patch,
                                    std::span<const std::vector<double>> coords,
                                    std::span<const std::vector<Side>> sides) {
  const int d = patch.dim();
  if (static_cast<int>(coords.size()) != d)
    throw DimensionError("geometry grid: coordinate list dimension mismatch");
  std::int64_t total = 1;
  for (const auto& c : coords) total *= static_cast<std::int64_t>(c.size());

  GeometryGrid grid;
  grid.points.resize(total, d);
  grid.det.resize(total);

  double xi[3];
  Side sd[3];
  std::int64_t flat = 0;
  const std::int64_t n1 = coords[0].size();
  const std::int64_t n2 = d > 1 ? coords[1].size() : 1;
  const std::int64_t n3 = d > 2 ? coords[2].size() : 1;
  Eigen::VectorXd pt;
  Eigen::MatrixXd J;
  for (std::int64_t i3 = 0; i3 < n3; ++i3)
    for (std::int64_t i2 = 0; i2 < n2; ++i2)
      for (std::int64_t i1 = 0; i1 < n1; ++i1, ++flat) {
        const std::int64_t ix[3] = {i1, i2, i3};
        for (int k = 0; k < d; ++k) {
          xi[k] = coords[k][ix[k]];
          sd[k] = sides.empty() ? Side::Right : sides[k][ix[k]];
        }
        evaluate_all(patch, std::span<const double>(xi, d),
                     std::span<const Side>(sd, d), true, &pt, &J);
        grid.points.row(flat) = pt.transpose();
        grid.det[flat] = det_small(J);
      }
  return grid;
}

GrevilleGrid build_greville_grid(const TensorPatch& patch,
                                 std::span<const BSplineBasis> interp_bases,
                                 double jac_floor) {
  const int d = patch.dim();
  if (static_cast<int>(interp_bases.size()) != d)
    throw DimensionError("greville grid: basis list dimension mismatch");
  GrevilleGrid g;
  g.abscissae.resize(d);
  g.sides.resize(d);
  for (int k = 0; k < d; ++k) {
    GrevillePoints gp = interp_bases[k].greville_points();
    g.abscissae[k] = std::move(gp.abscissae);
    g.sides[k] = std::move(gp.sides);
  }
  GeometryGrid grid = evaluate_geometry_grid(patch, g.abscissae, g.sides);
  g.points = std::move(grid.points);
  g.jacobian_sqrt.resize(grid.det.size());
  for (std::int64_t i = 0; i < grid.det.size(); ++i) {
    double det = grid.det[i];
    if (det < 0.0) {
      std::ostringstream os;
      os << "singular geometry: det DF = " << det
         << " at Greville grid point " << i;
      throw SingularGeometryError(os.str());
    }
    if (det < jac_floor) {
      det = jac_floor;
      ++g.floored_count;
    }
    g.jacobian_sqrt[i] = std::sqrt(det);
  }
  return g;
}

double patch_volume(const TensorPatch& patch, int q) {
  const int d = patch.dim();
  const GaussRule rule = gauss_rule(q);
  std::vector<std::vector<double>> coords(d);
  std::vector<std::vector<double>> wts(d);
  for (int k = 0; k < d; ++k) {
    const auto bp = patch.basis(k).knot_vector().breakpoints();
    for (size_t e = 0; e + 1 < bp.size(); ++e) {
      const double mid = 0.5 * (bp[e] + bp[e + 1]);
      const double halfw = 0.5 * (bp[e + 1] - bp[e]);
      for (int gq = 0; gq < q; ++gq) {
        coords[k].push_back(mid + halfw * rule.nodes[gq]);
        wts[k].push_back(halfw * rule.weights[gq]);
      }
    }
  }
  GeometryGrid grid = evaluate_geometry_grid(patch, coords);
  double vol = 0.0;
  std::int64_t flat = 0;
  const std::int64_t n1 = coords[0].size();
  const std::int64_t n2 = d > 1 ? coords[1].size() : 1;
  const std::int64_t n3 = d > 2 ? coords[2].size() : 1;
  for (std::int64_t i3 = 0; i3 < n3; ++i3)
    for (std::int64_t i2 = 0; i2 < n2; ++i2)
      for (std::int64_t i1 = 0; i1 < n1; ++i1, ++flat) {
        double w = wts[0][i1];
        if (d > 1) w *= wts[1][i2];
        if (d > 2) w *= wts[2][i3];
        vol += w * grid.det[flat];
      }
  return vol;
}

// ---------------------------------------------------------------------------
// JSON I/O (field names fixed by the geometry file format)
// ---------------------------------------------------------------------------

TensorPatch TensorPatch::parse_json(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("geometry json: parse error: ") + e.what());
  }
  try {
    const int d = j.at("dim").get<int>();
    const auto degrees = j.at("degrees").get<std::vector<int>>();
    const auto knots = j.at("knots").get<std::vector<std::vector<double>>>();
    if (static_cast<int>(degrees.size()) != d ||
        static_cast<int>(knots.size()) != d)
      throw InvalidArgument("geometry json: degrees/knots length must equal dim");
    std::vector<BSplineBasis> bases;
    for (int k = 0; k < d; ++k)
      bases.emplace_back(knots[k], degrees[k]);
    const auto cps = j.at("control_points").get<std::vector<std::vector<double>>>();
    const auto w = j.at("weights").get<std::vector<double>>();
    Eigen::MatrixXd P(cps.size(), d);
    for (size_t i = 0; i < cps.size(); ++i) {
      if (static_cast<int>(cps[i].size()) != d)
        throw InvalidArgument("geometry json: control point arity mismatch");
      for (int k = 0; k < d; ++k) P(i, k) = cps[i][k];
    }
    Eigen::VectorXd W(w.size());
    for (size_t i = 0; i < w.size(); ++i) W[i] = w[i];
    return TensorPatch(std::move(bases), std::move(P), std::move(W));
  } catch (const nlohmann::json::exception& e) {
    throw InvalidArgument(std::string("geometry json: ") + e.what());
  }
}

std::string TensorPatch::dump_json() const {
  nlohmann::json j;
  j["dim"] = dim();
  std::vector<int> degrees;
  std::vector<std::vector<double>> knots;
  for (const auto& b : bases_) {
    degrees.push_back(b.degree());
    knots.push_back(b.knot_vector().knots());
  }
  j["degrees"] = degrees;
  j["knots"] = knots;
  std::vector<std::vector<double>> cps;
  for (std::int64_t i = 0; i < control_points_.rows(); ++i) {
    std::vector<double> row(dim());
    for (int k = 0; k < dim(); ++k) row[k] = control_points_(i, k);
    cps.push_back(std::move(row));
  }
  j["control_points"] = cps;
  std::vector<double> w(weights_.data(), weights_.data() + weights_.size());
  j["weights"] = w;
  return j.dump(2);
}

TensorPatch TensorPatch::load_json(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("geometry json: cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return parse_json(buf.str());
}

void TensorPatch::save_json(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("geometry json: cannot write " + path);
  out << dump_json() << "\n";
}

// ---------------------------------------------------------------------------
// Built-in geometries
// ---------------------------------------------------------------------------

TensorPatch make_box(const std::vector<double>& lengths) {
  const int d = static_cast<int>(lengths.size());
  std::vector<BSplineBasis> bases;
  for (int k = 0; k < d; ++k)
    bases.emplace_back(std::vector<double>{0, 0, 1, 1}, 1);
  const std::int64_t n = std::int64_t{1} << d;
  Eigen::MatrixXd P(n, d);
  for (std::int64_t i = 0; i < n; ++i)
    for (int k = 0; k < d; ++k)
      P(i, k) = ((i >> k) & 1) ? lengths[k] : 0.0;
  return TensorPatch(std::move(bases), std::move(P), Eigen::VectorXd::Ones(n));
}

TensorPatch make_unit_interval() { return make_box({1.0}); }
TensorPatch make_unit_cube() { return make_box({1.0, 1.0, 1.0}); }

TensorPatch make_quarter_annulus(double r_inner, double r_outer) {
  const double s = 1.0 / std::sqrt(2.0);
  std::vector<BSplineBasis> bases;
  bases.emplace_back(std::vector<double>{0, 0, 1, 1}, 1);       // radial
  bases.emplace_back(std::vector<double>{0, 0, 0, 1, 1, 1}, 2); // angular
  const double arc[3][2] = {{1, 0}, {1, 1}, {0, 1}};
  const double wt[3] = {1.0, s, 1.0};
  const double radii[2] = {r_inner, r_outer};
  Eigen::MatrixXd P(6, 2);
  Eigen::VectorXd W(6);
  for (int ia = 0; ia < 3; ++ia)
    for (int ir = 0; ir < 2; ++ir) {
      const int flat = ir + 2 * ia;
      P(flat, 0) = radii[ir] * arc[ia][0];
      P(flat, 1) = radii[ir] * arc[ia][1];
      W[flat] = wt[ia];
    }
  return TensorPatch(std::move(bases), std::move(P), std::move(W));
}

TensorPatch make_half_cylinder(double r_inner, double r_outer, double height) {
  const double s = 1.0 / std::sqrt(2.0);
  std::vector<BSplineBasis> bases;
  bases.emplace_back(std::vector<double>{0, 0, 0, 0.5, 0.5, 1, 1, 1}, 2); // angular
  bases.emplace_back(std::vector<double>{0, 0, 1, 1}, 1);                 // radial
  bases.emplace_back(std::vector<double>{0, 0, 1, 1}, 1);                 // axial
  // semicircle from angle pi to 0 via two C0-joined quadratic arcs
  const double arc[5][2] = {{-1, 0}, {-1, 1}, {0, 1}, {1, 1}, {1, 0}};
  const double wt[5] = {1.0, s, 1.0, s, 1.0};
  const double radii[2] = {r_inner, r_outer};
  const double zs[2] = {0.0, height};
  Eigen::MatrixXd P(20, 3);
  Eigen::VectorXd W(20);
  for (int iz = 0; iz < 2; ++iz)
    for (int ir = 0; ir < 2; ++ir)
      for (int ia = 0; ia < 5; ++ia) {
        const int flat = ia + 5 * ir + 10 * iz;
        P(flat, 0) = radii[ir] * arc[ia][0];
        P(flat, 1) = radii[ir] * arc[ia][1];
        P(flat, 2) = zs[iz];
        W[flat] = wt[ia];
      }
  return TensorPatch(std::move(bases), std::move(P), std::move(W));
}

std::optional<TensorPatch> builtin_geometry(const std::string& name) {
  if (name == "unit_interval") return make_unit_interval();
  if (name == "unit_cube") return make_unit_cube();
  if (name == "quarter_annulus") return make_quarter_annulus();
  if (name == "half_cylinder") return make_half_cylinder();
  return std::nullopt;
}

} // namespace kle
