#include "kle/splines.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <sstream>

namespace kle {

namespace {

void require_param(double u) {
  if (!(u >= 0.0 && u <= 1.0)) {
    std::ostringstream os;
    os << "parameter " << u << " outside [0,1]";
    throw DomainError(os.str());
  }
}

} // namespace

KnotVector::KnotVector(std::vector<double> knots, int degree)
    : knots_(std::move(knots)), degree_(degree) {
  if (degree_ < 0) throw InvalidArgument("knot vector: negative degree");
  const int m = static_cast<int>(knots_.size());
  if (m < 2 * (degree_ + 1))
    throw InvalidArgument("knot vector: too few knots for an open vector");
  for (int i = 1; i < m; ++i)
    if (knots_[i] < knots_[i - 1])
      throw InvalidArgument("knot vector: knots must be non-decreasing");
  if (knots_.front() != 0.0 || knots_.back() != 1.0)
    throw InvalidArgument("knot vector: parameter domain must be [0,1]");
  for (int i = 0; i <= degree_; ++i) {
    if (knots_[i] != knots_.front() || knots_[m - 1 - i] != knots_.back())
      throw InvalidArgument(
          "knot vector: first and last knot must repeat degree+1 times");
  }
  if (m > 2 * (degree_ + 1)) {
    if (knots_[degree_ + 1] == knots_.front() ||
        knots_[m - degree_ - 2] == knots_.back())
      throw InvalidArgument(
          "knot vector: end knots repeated more than degree+1 times");
  }
  // interior multiplicities
  int run = 1;
  for (int i = degree_ + 2; i < m - degree_ - 1; ++i) {
    run = (knots_[i] == knots_[i - 1]) ? run + 1 : 1;
    if (run > degree_ + 1)
      throw InvalidArgument("knot vector: interior multiplicity exceeds degree+1");
  }
  if (num_basis() < degree_ + 1)
    throw InvalidArgument("knot vector: basis dimension below degree+1");
}

std::vector<double> KnotVector::breakpoints() const {
  std::vector<double> out;
  for (double t : knots_)
    if (out.empty() || t != out.back()) out.push_back(t);
  return out;
}

int KnotVector::multiplicity(double value) const {
  return static_cast<int>(std::count(knots_.begin(), knots_.end(), value));
}

int KnotVector::find_span(double u, Side side) const {
  require_param(u);
  const int p = degree_;
  const int n = num_basis();
  // valid spans are p .. n-1; empty spans (zero length) are skipped by the
  // one-sided rules below
  if (side == Side::Right) {
    if (u >= knots_[n]) { // clamp at the right end: take the last nonempty span
      int s = n - 1;
      while (knots_[s] == knots_[s + 1]) --s;
      return s;
    }
    int lo = p, hi = n; // knots_[lo] <= u < knots_[hi]
    while (hi - lo > 1) {
      const int mid = (lo + hi) / 2;
      if (u < knots_[mid]) hi = mid; else lo = mid;
    }
    return lo;
  }
  // Side::Left: span with knots_[s] < u <= knots_[s+1]
  if (u <= knots_[p]) { // clamp at the left end: take the first nonempty span
    int s = p;
    while (knots_[s] == knots_[s + 1]) ++s;
    return s;
  }
  int lo = p, hi = n; // knots_[lo] < u <= knots_[hi]
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (u <= knots_[mid]) hi = mid; else lo = mid;
  }
  return lo;
}

int BSplineBasis::evaluate(double u, std::span<double> values, Side side) const {
  const int p = degree();
  const auto& t = kv_.knots();
  const int span = kv_.find_span(u, side);
  // Cox-de Boor recursion over the active span (NURBS-book style)
  values[0] = 1.0;
  double left[32], right[32];
  for (int j = 1; j <= p; ++j) {
    left[j] = u - t[span + 1 - j];
    right[j] = t[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    values[j] = saved;
  }
  return span - p;
}

int BSplineBasis::evaluate_with_derivative(double u, std::span<double> values,
                                           std::span<double> derivatives,
                                           Side side) const {
  const int p = degree();
  const auto& t = kv_.knots();
  const int span = kv_.find_span(u, side);
  double left[32], right[32];
  double lower[32]; // degree p-1 values, used for the derivative formula
  values[0] = 1.0;
  for (int j = 1; j <= p; ++j) {
    if (j == p) std::copy(values.begin(), values.begin() + p, lower);
    left[j] = u - t[span + 1 - j];
    right[j] = t[span + j] - u;
    double saved = 0.0;
    for (int r = 0; r < j; ++r) {
      const double tmp = values[r] / (right[r + 1] + left[j - r]);
      values[r] = saved + right[r + 1] * tmp;
      saved = left[j - r] * tmp;
    }
    values[j] = saved;
  }
  if (p == 0) {
    derivatives[0] = 0.0;
    return span;
  }
  // B'_{i,p} = p/(t_{i+p}-t_i) B_{i,p-1} - p/(t_{i+p+1}-t_{i+1}) B_{i+1,p-1}
  for (int r = 0; r <= p; ++r) {
    const int i = span - p + r;
    double d = 0.0;
    if (r > 0) {
      const double den = t[i + p] - t[i];
      if (den > 0.0) d += p * lower[r - 1] / den;
    }
    if (r < p) {
      const double den = t[i + p + 1] - t[i + 1];
      if (den > 0.0) d -= p * lower[r] / den;
    }
    derivatives[r] = d;
  }
  return span - p;
}

std::vector<double> BSplineBasis::greville() const {
  const int p = degree();
  const int n = size();
  const auto& t = kv_.knots();
  std::vector<double> xi(n);
  if (p == 0) {
    for (int i = 0; i < n; ++i) xi[i] = 0.5 * (t[i] + t[i + 1]);
    return xi;
  }
  for (int i = 0; i < n; ++i) {
    double s = 0.0;
    for (int j = 1; j <= p; ++j) s += t[i + j];
    xi[i] = s / p;
  }
  // knot averages can drift by an ulp; pin the ends of an open vector
  xi.front() = t.front();
  xi.back() = t.back();
  return xi;
}

GrevillePoints BSplineBasis::greville_points() const {
  GrevillePoints g;
  g.abscissae = greville();
  g.sides.assign(g.abscissae.size(), Side::Right);
  for (size_t i = 0; i + 1 < g.abscissae.size(); ++i) {
    if (g.abscissae[i] == g.abscissae[i + 1]) g.sides[i] = Side::Left;
  }
  if (!g.sides.empty()) g.sides.back() = Side::Left; // xi = 1 uses the last span
  return g;
}

BSplineBasis refine_uniform(const BSplineBasis& basis, int subdivisions,
                            int continuity) {
  const int p = basis.degree();
  if (subdivisions < 1)
    throw InvalidArgument("refine_uniform: subdivisions must be >= 1");
  if (continuity < -1 || continuity >= p)
    throw InvalidArgument("refine_uniform: continuity must lie in [-1, p-1]");
  const int mult = p - continuity;
  const auto& t = basis.knot_vector().knots();
  std::vector<double> out;
  out.reserve(t.size() + 16);
  for (size_t i = 0; i + 1 < t.size(); ++i) {
    out.push_back(t[i]);
    if (t[i] < t[i + 1]) {
      const double h = (t[i + 1] - t[i]) / subdivisions;
      for (int j = 1; j < subdivisions; ++j)
        for (int r = 0; r < mult; ++r) out.push_back(t[i] + j * h);
    }
  }
  out.push_back(t.back());
  return BSplineBasis(std::move(out), p);
}

BSplineBasis elevate_degree(const BSplineBasis& basis, int target_degree) {
  const int p = basis.degree();
  if (target_degree < p)
    throw InvalidArgument("elevate_degree: target degree below current degree");
  const int delta = target_degree - p;
  if (delta == 0) return basis;
  const auto& t = basis.knot_vector().knots();
  std::vector<double> out;
  out.reserve(t.size() + 8);
  for (size_t i = 0; i < t.size(); ++i) {
    out.push_back(t[i]);
    if (i + 1 == t.size() || t[i] != t[i + 1])
      for (int r = 0; r < delta; ++r) out.push_back(t[i]);
  }
  std::sort(out.begin(), out.end());
  return BSplineBasis(std::move(out), target_degree);
}

BSplineBasis reduce_continuity_at(const BSplineBasis& basis,
                                  std::span<const double> breakpoints,
                                  int continuity) {
  const int p = basis.degree();
  if (continuity < -1 || continuity >= p)
    throw InvalidArgument("reduce_continuity_at: continuity must lie in [-1, p-1]");
  const int target_mult = p - continuity;
  std::vector<double> out = basis.knot_vector().knots();
  for (double b : breakpoints) {
    if (!(b > 0.0 && b < 1.0))
      throw InvalidArgument("reduce_continuity_at: breakpoint must be interior");
    const int have = basis.knot_vector().multiplicity(b);
    if (have == 0)
      throw InvalidArgument("reduce_continuity_at: value is not a breakpoint");
    for (int r = have; r < target_mult; ++r) out.push_back(b);
  }
  std::sort(out.begin(), out.end());
  return BSplineBasis(std::move(out), p);
}

} // namespace kle
