#pragma once

#include <span>
#include <vector>

#include "kle/errors.hpp"

namespace kle {

/// One-sided evaluation limit at a parameter value. Everywhere except at a
/// repeated (discontinuity) knot the two limits coincide.
enum class Side { Left, Right };

/// Open (clamped) knot vector on the parameter domain [0,1].
///
/// Invariants enforced at construction: non-decreasing knots, first and last
/// knot repeated exactly degree+1 times, interior multiplicities at most
/// degree+1, basis dimension at least degree+1. Knots are compared bitwise;
/// knot vectors are constructed, never computed.
class KnotVector {
public:
  KnotVector(std::vector<double> knots, int degree);

  int degree() const { return degree_; }
  const std::vector<double>& knots() const { return knots_; }
  /// Basis dimension n = #knots - degree - 1.
  int num_basis() const { return static_cast<int>(knots_.size()) - degree_ - 1; }

  /// Distinct knot values, ascending (includes 0 and 1).
  std::vector<double> breakpoints() const;
  int multiplicity(double value) const;

  /// Index s of the knot span containing `u`, such that the basis functions
  /// with indices s-p..s are the active ones. Side::Right treats u as
  /// belonging to the span on its right (clamped at u=1), Side::Left to the
  /// span on its left (clamped at u=0).
  int find_span(double u, Side side = Side::Right) const;

private:
  std::vector<double> knots_;
  int degree_;
};

/// Greville abscissae with one-sided evaluation tags. Points are
/// non-decreasing; at a C^-1 knot two consecutive points coincide and the
/// pair is tagged (Left, Right).
struct GrevillePoints {
  std::vector<double> abscissae;
  std::vector<Side> sides;
};

/// Univariate B-spline basis over an open knot vector.
class BSplineBasis {
public:
  explicit BSplineBasis(KnotVector kv) : kv_(std::move(kv)) {}
  BSplineBasis(std::vector<double> knots, int degree)
      : kv_(std::move(knots), degree) {}

  const KnotVector& knot_vector() const { return kv_; }
  int degree() const { return kv_.degree(); }
  int size() const { return kv_.num_basis(); }

  /// Evaluates the p+1 possibly nonzero basis functions at `u` in [0,1].
  /// Writes them into `values` (size >= p+1) and returns the index of the
  /// first active function. The values are nonnegative and sum to one.
  int evaluate(double u, std::span<double> values, Side side = Side::Right) const;

  /// Evaluates basis functions and their first derivatives in one pass.
  int evaluate_with_derivative(double u, std::span<double> values,
                               std::span<double> derivatives,
                               Side side = Side::Right) const;

  /// Greville abscissae xi_i = (t_{i+1} + ... + t_{i+p}) / p. For p = 0 the
  /// midpoint of the support is used instead.
  std::vector<double> greville() const;

  /// Greville abscissae plus Left/Right tags resolving coincident pairs at
  /// C^-1 knots (first of the pair evaluates the left limit).
  GrevillePoints greville_points() const;

private:
  KnotVector kv_;
};

/// Subdivides every nonempty knot span into `subdivisions` equal parts; new
/// breakpoints get multiplicity p - continuity. Existing knots and their
/// multiplicities are preserved. continuity must lie in [-1, p-1].
BSplineBasis refine_uniform(const BSplineBasis& basis, int subdivisions,
                            int continuity);

/// Raises the polynomial degree keeping all breakpoints and the continuity
/// at every existing breakpoint (each multiplicity grows by the degree
/// increment). target_degree must be >= the current degree.
BSplineBasis elevate_degree(const BSplineBasis& basis, int target_degree);

/// Lowers the smoothness at selected interior breakpoints to at most
/// `continuity` by raising knot multiplicities. Breakpoints not listed are
/// untouched. Used to align interpolation spaces with kernel or geometry
/// discontinuities.
BSplineBasis reduce_continuity_at(const BSplineBasis& basis,
                                  std::span<const double> breakpoints,
                                  int continuity);

} // namespace kle
