#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "nmscale/operators.hpp"
#include "nmscale/problems.hpp"
#include "nmscale/random.hpp"
#include "nmscale/tame_maps.hpp"

using namespace nmscale;

namespace {

GradedVector small(std::uint64_t seed, int n, double decay, double level0) {
  return scaled_random_vector(seed, n, decay, level0);
}

// f(u) = u⁴ with exact first and second derivatives.
TameMapBundle quartic_map(int bandwidth) {
  TameMapBundle f;
  f.name = "quartic";
  f.bandwidth = bandwidth;
  f.eval = [](const GradedVector& u) {
    const GradedVector fs[] = {u, u, u, u};
    return product(fs);
  };
  f.deriv = [](const GradedVector& u, const GradedVector& v) {
    const GradedVector fs[] = {u, u, u, v};
    return 4.0 * product(fs);
  };
  f.second_deriv = [](const GradedVector& u, const GradedVector& v, const GradedVector& w) {
    const GradedVector fs[] = {u, u, v, w};
    return 12.0 * product(fs);
  };
  return f;
}

}  // namespace

TEST_CASE("differentiability probe") {
  SUBCASE("linear map: remainder zero") {
    const TameMapBundle f = make_linear_bundle(catalog_operator("laplace_plus_one", 16).matrix(), "A");
    const auto r = probe_differentiability(f, random_vector(1, 16, 2.0), random_vector(2, 16, 2.0), 0,
                                           {1e-1, 1e-2, 1e-3});
    for (double x : r) CHECK(x < 1e-9);
  }
  SUBCASE("Burgers at x = 0: remainder t·ε‖u u'‖_0") {
    const double eps = 0.1;
    const TameMapBundle f = make_burgers_map(eps, 32, 1.0);
    const GradedVector u = small(3, 32, 3.0, 0.2);
    const double quad = eps * norm(pointwise_product(u, differentiate(u)), 0);
    const std::vector<double> ts = {1e-1, 1e-2, 1e-3};
    const auto r = probe_differentiability(f, GradedVector(32), u, 0, ts);
    for (std::size_t i = 0; i < ts.size(); ++i) {
      CHECK(r[i] == doctest::Approx(ts[i] * quad).epsilon(1e-6));
    }
  }
  SUBCASE("domain exit is reported") {
    const TameMapBundle f = make_burgers_map(0.1, 16);
    const GradedVector u = small(4, 16, 2.0, 1.0);
    CHECK_THROWS_AS(probe_differentiability(f, GradedVector(16), u, 0, {1.0}), DomainError);
  }
}

TEST_CASE("tame constants on linear maps") {
  SUBCASE("identity: a_j = 1") {
    const TameMapBundle id = make_linear_bundle(Eigen::MatrixXcd::Identity(33, 33), "id", 0);
    const TameConstants t = estimate_tame_constants(id, 4, 16, 1);
    for (double a : t.a) CHECK(a == doctest::Approx(1.0).epsilon(1e-13));
    for (bool s : t.stable) CHECK(s);
  }
  SUBCASE("d/dtheta with one lost level: a_j <= 1") {
    TameMapBundle d = make_linear_bundle(GradedOperator::derivative(32).matrix(), "d", 1);
    d.inverse = nullptr;
    const TameConstants t = estimate_tame_constants(d, 4, 16, 2);
    for (double a : t.a) CHECK(a <= 1.0 + 1e-14);
    CHECK(t.d.empty());
  }
  CHECK_THROWS_AS(estimate_tame_constants(make_burgers_map(0.1, 8), 2, 8, 1), std::invalid_argument);
}

TEST_CASE("tame constants of the Burgers map are finite and doubling-stable") {
  const TameMapBundle f = make_burgers_map(0.1, 64);
  const TameConstants t = estimate_tame_constants(f, 4, 64, 5);
  REQUIRE(t.a.size() == 5);
  CHECK(t.trials == 128);
  for (std::size_t j = 0; j < 5; ++j) {
    CHECK(std::isfinite(t.a[j]));
    CHECK(std::isfinite(t.b[j]));
    CHECK(std::isfinite(t.c[j]));
    CHECK(std::isfinite(t.d[j]));
    CHECK(t.stable[j]);
  }
  const std::string csv = tame_constants_csv(t);
  CHECK(csv.rfind("name,j,a,b,c,d,stable\n", 0) == 0);
}

TEST_CASE("inverse consistency") {
  Eigen::VectorXcd diag(17);
  for (int n = -8; n <= 8; ++n) diag(n + 8) = 2.0 + n * n;
  const TameMapBundle lin = make_linear_bundle(GradedOperator::diagonal(diag, 2, "D").matrix(), "D");
  const InverseConsistencyReport rl = check_inverse_consistency(lin, 8, 1);
  CHECK(rl.worst_left < 1e-15);
  CHECK(rl.worst_right < 1e-15);

  const TameMapBundle f = make_burgers_map(0.1, 64);
  const InverseConsistencyReport rb = check_inverse_consistency(f, 32, 2);
  CHECK(rb.pass);
  CHECK(rb.worst_left <= 1e-9);
  CHECK(rb.worst_right <= 1e-9);

  const GradedVector outside = small(6, 64, 3.0, 2.0 * kBurgersRadius);
  CHECK_THROWS_AS(inverse_residuals(f, outside, outside, outside), DomainError);
}

TEST_CASE("second derivative stencil") {
  SUBCASE("linear map") {
    const TameMapBundle f = make_linear_bundle(catalog_operator("ddtheta", 16).matrix(), "d");
    const GradedVector x = random_vector(1, 16, 2.0);
    CHECK(finite_difference_second_derivative(f, x, random_vector(2, 16, 2.0), random_vector(3, 16, 2.0), 1e-3)
              .is_zero());
  }
  SUBCASE("Burgers: eps (v v')' at any x") {
    const double eps = 0.1;
    const TameMapBundle f = make_burgers_map(eps, 32, 1.0);
    const GradedVector v = random_vector(4, 32, 3.0);
    const GradedVector vp = small(5, 32, 3.0, 0.1);
    const GradedVector oracle = eps * differentiate(pointwise_product(v, vp));
    for (std::uint64_t s = 0; s < 3; ++s) {
      const GradedVector x = small(10 + s, 32, 3.0, 0.01);
      const GradedVector fd = finite_difference_second_derivative(f, x, v, vp, 1e-2);
      CHECK(norm(fd - oracle, 0) < 1e-12 * norm(oracle, 0) + 1e-15);
      CHECK(norm(f.second_deriv(x, v, vp) - oracle, 0) < 1e-15);
    }
  }
  SUBCASE("halving h cuts the error by about four") {
    const TameMapBundle f = quartic_map(16);
    const GradedVector x = random_vector(6, 16, 2.0);
    const GradedVector v = random_vector(7, 16, 2.0);
    const GradedVector vp = random_vector(8, 16, 2.0);
    const GradedVector exact = f.second_deriv(x, v, vp);
    const double e1 = norm(finite_difference_second_derivative(f, x, v, vp, 1e-2) - exact, 0);
    const double e2 = norm(finite_difference_second_derivative(f, x, v, vp, 5e-3) - exact, 0);
    CHECK(e1 / e2 >= 3.5);
    const double s1 = derivative_stencil_error(f, x, v, 1e-2);
    const double s2 = derivative_stencil_error(f, x, v, 5e-3);
    CHECK(s1 / s2 >= 3.5);
  }
}

TEST_CASE("assembled derivative matches the dense Burgers matrix") {
  const GradedVector u = small(9, 12, 3.0, 0.02);
  const TameMapBundle f = make_burgers_map(0.1, 12);
  const Eigen::MatrixXcd m = assemble_derivative(f, u);
  CHECK((m - burgers_derivative_matrix(0.1, u)).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("sampling stays in the domain") {
  const TameMapBundle f = make_burgers_map(0.1, 32);
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GradedVector x = sample_in_domain(f, s, 0.75, 0.9);
    CHECK(f.in_domain(x));
    CHECK(norm(x, 0) < kBurgersRadius);
  }
}

TEST_CASE("param points") {
  const ParamPoint p{3.0, GradedVector::constant(4, 4.0)};
  CHECK(norm(p, 0) == doctest::Approx(5.0));
  const ParamPoint q = 2.0 * p - p;
  CHECK(q.b == 3.0);
  CHECK(norm(q + p, 2) == doctest::Approx(10.0));
}
