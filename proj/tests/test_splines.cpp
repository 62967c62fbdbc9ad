#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <Eigen/Dense>
#include <random>

#include "kle/splines.hpp"

using namespace kle;

TEST_CASE("knot vector invariants are enforced") {
  CHECK_THROWS_AS(KnotVector({0, 0, 1}, 1), InvalidArgument);        // not open
  CHECK_THROWS_AS(KnotVector({0, 0.5, 0.2, 1}, 0), InvalidArgument); // decreasing
  CHECK_THROWS_AS(KnotVector({0, 0, 0.5, 0.5, 0.5, 0.5, 1, 1}, 1),
                  InvalidArgument); // interior multiplicity > p+1
  CHECK_THROWS_AS(KnotVector({-1, -1, 1, 1}, 1), InvalidArgument);   // domain
  const KnotVector kv({0, 0, 0, 0.5, 1, 1, 1}, 2);
  CHECK(kv.num_basis() == 4);
  CHECK(kv.multiplicity(0.5) == 1);
  CHECK(kv.breakpoints() == std::vector<double>{0, 0.5, 1});
}

TEST_CASE("evaluate: linear hats at 0.25") {
  BSplineBasis b({0, 0, 1, 1}, 1);
  double v[2];
  const int first = b.evaluate(0.25, v);
  CHECK(first == 0);
  CHECK(v[0] == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("evaluate: Bernstein quadratics at 0.5") {
  BSplineBasis b({0, 0, 0, 1, 1, 1}, 2);
  double v[3];
  const int first = b.evaluate(0.5, v);
  CHECK(first == 0);
  CHECK(v[0] == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(v[1] == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(v[2] == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("evaluate: domain errors") {
  BSplineBasis b({0, 0, 1, 1}, 1);
  double v[2];
  CHECK_THROWS_AS(b.evaluate(-0.1, v), DomainError);
  CHECK_THROWS_AS(b.evaluate(1.0000001, v), DomainError);
}

TEST_CASE("partition of unity and nonnegativity at random points") {
  std::mt19937_64 rng(123);
  std::uniform_real_distribution<double> dist(0.0, 1.0);
  const BSplineBasis bases[] = {
      BSplineBasis({0, 0, 1, 1}, 1),
      BSplineBasis({0, 0, 0, 0.25, 0.5, 0.5, 0.75, 1, 1, 1}, 2),
      BSplineBasis({0, 0, 0, 0, 0.3, 0.3, 0.3, 0.7, 1, 1, 1, 1}, 3),
      BSplineBasis({0, 0.2, 0.4, 0.6, 0.8, 1}, 0),
  };
  for (const auto& b : bases) {
    double v[8];
    for (int it = 0; it < 1000; ++it) {
      const double xi = dist(rng);
      b.evaluate(xi, std::span<double>(v, b.degree() + 1));
      double sum = 0.0;
      for (int k = 0; k <= b.degree(); ++k) {
        CHECK(v[k] >= 0.0);
        sum += v[k];
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
    // boundary values included
    for (double xi : {0.0, 1.0}) {
      b.evaluate(xi, std::span<double>(v, b.degree() + 1));
      double sum = 0.0;
      for (int k = 0; k <= b.degree(); ++k) sum += v[k];
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
    }
  }
}

TEST_CASE("one-sided evaluation at a discontinuity knot") {
  // C^-1 at 0.5: two independent quadratic pieces
  BSplineBasis b({0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1}, 2);
  double v[3];
  const int left = b.evaluate(0.5, v, Side::Left);
  CHECK(left == 0);
  CHECK(v[2] == doctest::Approx(1.0)); // last left-piece function
  const int right = b.evaluate(0.5, v, Side::Right);
  CHECK(right == 3);
  CHECK(v[0] == doctest::Approx(1.0)); // first right-piece function
}

TEST_CASE("greville abscissae: knot averages") {
  CHECK(BSplineBasis({0, 0, 0, 1, 1, 1}, 2).greville() ==
        std::vector<double>{0, 0.5, 1});
  CHECK(BSplineBasis({0, 0, 0, 0.5, 1, 1, 1}, 2).greville() ==
        std::vector<double>{0, 0.25, 0.75, 1});
  CHECK(BSplineBasis({0, 0, 0.5, 1, 1}, 1).greville() ==
        std::vector<double>{0, 0.5, 1});
}

TEST_CASE("greville abscissae: p = 0 midpoints") {
  CHECK(BSplineBasis({0, 0.5, 1}, 0).greville() ==
        std::vector<double>{0.25, 0.75});
}

TEST_CASE("greville interlacing: strictly increasing when multiplicity <= p") {
  const BSplineBasis b({0, 0, 0, 0.25, 0.5, 0.5, 0.75, 1, 1, 1}, 2);
  const auto xi = b.greville();
  for (size_t i = 0; i + 1 < xi.size(); ++i) CHECK(xi[i] < xi[i + 1]);
}

TEST_CASE("greville sides: coincident pair at a C^-1 knot") {
  const BSplineBasis b({0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1}, 2);
  const auto g = b.greville_points();
  REQUIRE(g.abscissae.size() == 6);
  CHECK(g.abscissae[2] == 0.5);
  CHECK(g.abscissae[3] == 0.5);
  CHECK(g.sides[2] == Side::Left);
  CHECK(g.sides[3] == Side::Right);
}

TEST_CASE("refine_uniform inserts breakpoints at the requested continuity") {
  const BSplineBasis b({0, 0, 0, 1, 1, 1}, 2);
  CHECK(refine_uniform(b, 2, 1).knot_vector().knots() ==
        std::vector<double>{0, 0, 0, 0.5, 1, 1, 1});
  CHECK(refine_uniform(b, 2, 0).knot_vector().knots() ==
        std::vector<double>{0, 0, 0, 0.5, 0.5, 1, 1, 1});
  CHECK(refine_uniform(b, 2, -1).knot_vector().knots() ==
        std::vector<double>{0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1});
  CHECK_THROWS_AS(refine_uniform(b, 2, 2), InvalidArgument);
  CHECK_THROWS_AS(refine_uniform(b, 0, 1), InvalidArgument);
}

TEST_CASE("refine_uniform preserves existing knots") {
  const BSplineBasis b({0, 0, 0, 0.5, 0.5, 1, 1, 1}, 2); // C0 at 0.5
  const auto r = refine_uniform(b, 2, 1);
  CHECK(r.knot_vector().knots() ==
        std::vector<double>{0, 0, 0, 0.25, 0.5, 0.5, 0.75, 1, 1, 1});
}

TEST_CASE("elevate_degree keeps breakpoints and continuity") {
  CHECK(elevate_degree(BSplineBasis({0, 0, 1, 1}, 1), 2).knot_vector().knots() ==
        std::vector<double>{0, 0, 0, 1, 1, 1});
  CHECK(elevate_degree(BSplineBasis({0, 0, 0, 0.5, 1, 1, 1}, 2), 3)
            .knot_vector()
            .knots() ==
        std::vector<double>{0, 0, 0, 0, 0.5, 0.5, 1, 1, 1, 1});
  const BSplineBasis same({0, 0, 0, 0.5, 1, 1, 1}, 2);
  CHECK(elevate_degree(same, 2).knot_vector().knots() ==
        same.knot_vector().knots());
  CHECK_THROWS_AS(elevate_degree(same, 1), InvalidArgument);
}

TEST_CASE("reduce_continuity_at raises multiplicities") {
  const BSplineBasis b({0, 0, 0, 0.5, 1, 1, 1}, 2);
  const double bp[] = {0.5};
  CHECK(reduce_continuity_at(b, bp, 0).knot_vector().knots() ==
        std::vector<double>{0, 0, 0, 0.5, 0.5, 1, 1, 1});
  CHECK(reduce_continuity_at(b, bp, -1).knot_vector().knots() ==
        std::vector<double>{0, 0, 0, 0.5, 0.5, 0.5, 1, 1, 1});
  const double bad[] = {0.3};
  CHECK_THROWS_AS(reduce_continuity_at(b, bad, 0), InvalidArgument);
}

TEST_CASE("refined space reproduces the coarse basis") {
  // each coarse function must lie in the refined space: project on a Gauss
  // grid and check the residual
  const BSplineBasis coarse({0, 0, 0, 0.4, 1, 1, 1}, 2);
  const BSplineBasis fine = refine_uniform(coarse, 3, 1);
  const int nc = coarse.size(), nf = fine.size();

  // dense least-squares fit of each coarse function in the fine basis,
  // sampled densely
  const int ns = 400;
  Eigen::MatrixXd Ac(ns, nc), Af(ns, nf);
  Ac.setZero();
  Af.setZero();
  double v[8];
  for (int s = 0; s < ns; ++s) {
    const double xi = (s + 0.5) / ns;
    int f = coarse.evaluate(xi, std::span<double>(v, 3));
    for (int k = 0; k < 3; ++k) Ac(s, f + k) = v[k];
    f = fine.evaluate(xi, std::span<double>(v, 3));
    for (int k = 0; k < 3; ++k) Af(s, f + k) = v[k];
  }
  const Eigen::MatrixXd sol =
      Af.colPivHouseholderQr().solve(Ac);
  const double residual = (Af * sol - Ac).norm() / Ac.norm();
  CHECK(residual < 1e-10);
}
