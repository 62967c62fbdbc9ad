#pragma once

#include <Eigen/Dense>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kle/splines.hpp"

namespace kle {

/// d-variate NURBS patch mapping the parameter cube [0,1]^d into R^d.
/// Control points are stored flattened with the first parametric index
/// varying fastest; weights must be strictly positive.
class TensorPatch {
public:
  TensorPatch(std::vector<BSplineBasis> bases, Eigen::MatrixXd control_points,
              Eigen::VectorXd weights);

  int dim() const { return static_cast<int>(bases_.size()); }
  const BSplineBasis& basis(int k) const { return bases_[k]; }
  const std::vector<BSplineBasis>& bases() const { return bases_; }
  const Eigen::MatrixXd& control_points() const { return control_points_; }
  const Eigen::VectorXd& weights() const { return weights_; }

  /// Physical image of a parametric point.
  Eigen::VectorXd map_point(std::span<const double> xi) const;
  Eigen::VectorXd map_point(std::span<const double> xi,
                            std::span<const Side> sides) const;

  /// Jacobian matrix DF with columns dF/dxi_k.
  Eigen::MatrixXd jacobian(std::span<const double> xi,
                           std::span<const Side> sides = {}) const;

  /// det DF. Throws SingularGeometryError (naming the point) when <= 0.
  double jacobian_determinant(std::span<const double> xi,
                              std::span<const Side> sides = {}) const;

  static TensorPatch load_json(const std::string& path);
  void save_json(const std::string& path) const;
  static TensorPatch parse_json(const std::string& text);
  std::string dump_json() const;

private:
  std::vector<BSplineBasis> bases_;
  Eigen::MatrixXd control_points_; // (n_total x d)
  Eigen::VectorXd weights_;        // n_total
};

/// Tensor grid of geometry evaluations: physical points (row per grid point,
/// vectorization order) and Jacobian determinants.
struct GeometryGrid {
  Eigen::MatrixXd points;
  Eigen::VectorXd det;
};

GeometryGrid evaluate_geometry_grid(
    const TensorPatch& patch, std::span<const std::vector<double>> coords,
    std::span<const std::vector<Side>> sides = {});

/// Greville tensor grid of an interpolation space: abscissae with one-sided
/// tags per direction, physical points and sqrt(det DF) per grid point.
/// Determinants below `jac_floor` are clamped and counted in floored_count.
struct GrevilleGrid {
  std::vector<std::vector<double>> abscissae;
  std::vector<std::vector<Side>> sides;
  Eigen::MatrixXd points;       // (N~ x d)
  Eigen::VectorXd jacobian_sqrt; // N~
  int floored_count = 0;
};

GrevilleGrid build_greville_grid(const TensorPatch& patch,
                                 std::span<const BSplineBasis> interp_bases,
                                 double jac_floor = 1e-14);

/// Patch volume by tensor Gauss quadrature with q points per knot span.
double patch_volume(const TensorPatch& patch, int q = 12);

/// Axis-aligned box [0, lengths_1] x ... with multilinear geometry.
TensorPatch make_box(const std::vector<double>& lengths);
TensorPatch make_unit_interval();
TensorPatch make_unit_cube();
/// Quarter annulus in the first quadrant; direction 1 is radial, direction 2
/// angular (exact NURBS arc).
TensorPatch make_quarter_annulus(double r_inner = 1.0, double r_outer = 2.0);
/// Half-open cylinder shell: semi-annular cross section (two C^0-joined
/// quadratic arcs, direction 1 angular) extruded along z (direction 3);
/// direction 2 is radial.
TensorPatch make_half_cylinder(double r_inner = 4.0, double r_outer = 5.0,
                               double height = 10.0);

/// Resolves a built-in geometry name ("unit_interval", "unit_cube",
/// "quarter_annulus", "half_cylinder"); returns nullopt for unknown names.
std::optional<TensorPatch> builtin_geometry(const std::string& name);

} // namespace kle
