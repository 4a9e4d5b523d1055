#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <vector>

#include "nmscale/operators.hpp"
#include "nmscale/problems.hpp"
#include "nmscale/random.hpp"

using namespace nmscale;

namespace {

double max_diff(const GradedVector& a, const GradedVector& b) {
  return (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff();
}

double max_diff(const Eigen::MatrixXcd& a, const Eigen::MatrixXcd& b) {
  return (a - b).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("apply on basic operators") {
  const GradedVector u = random_vector(1, 16, 1.0);
  CHECK(max_diff(apply(GradedOperator::identity(16), u), u) == 0.0);
  CHECK(max_diff(apply(GradedOperator::derivative(8), GradedVector::sine(8, 1)), GradedVector::cosine(8, 1)) < 1e-16);
  const GradedOperator mc = GradedOperator::multiplication(GradedVector::cosine(8, 1));
  CHECK(max_diff(apply(mc, GradedVector::constant(8, 1.0)), GradedVector::cosine(8, 1)) < 1e-16);
  CHECK(mc.real_preserving());
  CHECK(apply(mc, resize(u, 8)).is_real());
  CHECK_THROWS_AS(apply(mc, u), BandwidthMismatch);

  // Multiplication operator against the grid product.
  const GradedVector v = random_vector(2, 16, 2.0);
  const GradedOperator mv = GradedOperator::multiplication(v);
  CHECK(max_diff(apply(mv, u), pointwise_product(v, u)) < 1e-14);
}

TEST_CASE("composition and sums") {
  const GradedOperator d = GradedOperator::derivative(8);
  const GradedOperator i = GradedOperator::identity(8);
  CHECK(max_diff(compose(d, i).matrix(), d.matrix()) == 0.0);
  const GradedOperator dd = compose(d, d);
  CHECK(dd.order() == 2);
  for (int n = -8; n <= 8; ++n) CHECK(dd.matrix()(n + 8, n + 8) == Complex(-n * n, 0.0));
  CHECK(max_diff(dd.matrix(), GradedOperator::derivative(8, 2).matrix()) < 1e-13);
  CHECK(compose(catalog_operator("laplace_plus_one", 8), d).order() == 3);
  CHECK(add(dd, i).order() == 2);
  CHECK(scaled(d, 2.0).order() == 1);
  CHECK_THROWS_AS(compose(d, GradedOperator::identity(4)), BandwidthMismatch);
}

TEST_CASE("order certificate") {
  const OrderCertificate d = certify_order(GradedOperator::derivative(32), 4, 64, 3);
  for (double s : d.sup_large) CHECK(s <= 1.0 + 1e-14);
  CHECK(d.stable);
  const OrderCertificate m = certify_order(GradedOperator::multiplication(random_vector(4, 32, 4.0)), 3, 64, 5);
  CHECK(m.stable);
}

TEST_CASE("Fredholm catalog") {
  SUBCASE("identity") {
    const FredholmReport r = analyze_fredholm(GradedOperator::identity(16));
    CHECK(r.dim_ker == 0);
    CHECK(r.dim_coker == 0);
    CHECK(r.index == 0);
    CHECK(std::isinf(r.gap));
  }
  SUBCASE("d/dtheta: constants") {
    for (int n : {32, 64}) {
      const FredholmReport r = analyze_fredholm(catalog_operator("ddtheta", n));
      CHECK(r.dim_ker == 1);
      CHECK(r.dim_coker == 1);
      CHECK(r.index == 0);
      CHECK(r.gap >= 1e3);
      CHECK_FALSE(r.ambiguous);
      REQUIRE(r.kernel_basis.size() == 1);
      CHECK(std::abs(r.kernel_basis[0].coeff(0)) == doctest::Approx(1.0));
      CHECK(r.kernel_decay[0].status == DecayFit::Status::bandlimited);
    }
  }
  SUBCASE("-d2 - 1: modes plus and minus one") {
    for (int n : {32, 64}) {
      const FredholmReport r = analyze_fredholm(catalog_operator("laplace_minus_one", n));
      CHECK(r.dim_ker == 2);
      CHECK(r.dim_coker == 2);
      CHECK(r.index == 0);
      CHECK(r.gap >= 1e3);
      const Eigen::MatrixXcd p = projector(r.kernel_basis, n);
      CHECK(std::abs(p(n + 1, n + 1) - 1.0) < 1e-12);
      CHECK(std::abs(p(n - 1, n - 1) - 1.0) < 1e-12);
    }
  }
  SUBCASE("-d2 + 1 invertible") {
    const FredholmReport r = analyze_fredholm(catalog_operator("laplace_plus_one", 32));
    CHECK(r.dim_ker == 0);
    CHECK(r.dim_coker == 0);
  }
  SUBCASE("elliptic operators with potentials") {
    const FredholmReport one = analyze_fredholm(make_elliptic_operator(GradedVector::constant(16, 1.0)));
    CHECK(one.dim_ker == 0);
    const FredholmReport zero = analyze_fredholm(make_elliptic_operator(GradedVector(16)));
    CHECK(zero.dim_ker == 1);
    for (int n : {2, 8, 32}) {
      CHECK(analyze_fredholm(make_elliptic_operator(GradedVector::constant(n, -1.0))).dim_ker == 2);
    }
  }
  CHECK(catalog_operator_names().size() == 3);
  CHECK_THROWS_AS(catalog_operator("nope", 8), std::invalid_argument);
}

TEST_CASE("bandwidth stability") {
  for (const auto& name : catalog_operator_names()) {
    const BandwidthStability s = check_bandwidth_stability([&](int n) { return catalog_operator(name, n); }, 32);
    CHECK(s.stable);
  }
}

TEST_CASE("strongly smoothing operators") {
  const auto zero = random_strongly_smoothing(1, 16, 2, 3.0, 0.0);
  CHECK(zero.op.matrix().isZero(0.0));

  const auto k1 = random_strongly_smoothing(2, 32, 1, 3.0, 1.0);
  const FredholmReport r1 = analyze_fredholm(k1.op);
  CHECK(r1.rank == 1);
  CHECK(r1.singular_values(0) == doctest::Approx(1.0).epsilon(1e-12));

  for (std::uint64_t s = 0; s < 20; ++s) {
    const auto k = random_strongly_smoothing(derive_seed(9, s), 64, 2, 3.0, 1.0);
    for (Eigen::Index c = 0; c < k.op.matrix().cols(); c += 16) {
      const GradedVector col(k.op.matrix().col(c), false);
      const DecayFit fit = fit_decay_exponent(col);
      CHECK(fit.exponent >= 3.0);
    }
  }
}

TEST_CASE("index laws") {
  const GradedOperator d = catalog_operator("ddtheta", 32);
  const IndexExperiment none = index_invariance_experiment(d, {1, 2, 3}, 1, 0.0);
  CHECK(none.violations == 0);
  std::vector<std::uint64_t> seeds;
  for (std::uint64_t s = 0; s < 20; ++s) seeds.push_back(derive_seed(4, s));
  const IndexExperiment ex = index_invariance_experiment(d, seeds, 2, 1.0);
  CHECK(ex.violations == 0);
  for (const auto& row : ex.rows) CHECK(row.index == 0);

  for (std::uint64_t s = 0; s < 5; ++s) {
    const GradedOperator a = add(catalog_operator("laplace_minus_one", 16),
                                 random_strongly_smoothing(derive_seed(5, s), 16, 1, 3.0, 0.5).op);
    const GradedOperator b = add(catalog_operator("ddtheta", 16),
                                 random_strongly_smoothing(derive_seed(6, s), 16, 2, 3.0, 0.5).op);
    CHECK(index_additivity(a, b).holds);
  }
}

TEST_CASE("kernel-forcing perturbation") {
  const GradedOperator a = catalog_operator("laplace_plus_one", 24);
  const GradedVector k = random_vector(7, 24, 4.0);
  const GradedVector b = random_vector(8, 24, 4.0);
  const auto pert = kernel_forcing_perturbation(a, k, b);
  const GradedOperator sum = add(a, pert.op);
  CHECK(norm(apply(sum, k), 0) < 1e-12 * norm(apply(a, k), 0));
  const FredholmReport r = analyze_fredholm(sum);
  CHECK(r.dim_ker == 1);
  CHECK(r.dim_coker == 1);
  CHECK_THROWS_AS(kernel_forcing_perturbation(a, GradedVector::mode(24, 1, 1.0), GradedVector::mode(24, 2, 1.0)),
                  std::invalid_argument);
}

TEST_CASE("regularity proxy") {
  const GradedOperator a = catalog_operator("laplace_plus_one", 64);
  const RegularityResult smooth = regularity_check(a, random_vector(1, 64, 6.0));
  CHECK(smooth.status == RegularityResult::Status::consistent);
  const RegularityResult rough = regularity_check(a, random_vector(2, 64, 1.0));
  CHECK(rough.status == RegularityResult::Status::consistent);
  const RegularityResult kernel =
      regularity_check(catalog_operator("ddtheta", 64), GradedVector::constant(64, 1.0));
  CHECK(kernel.status == RegularityResult::Status::consistent);
  CHECK(kernel.decay_in.status == DecayFit::Status::bandlimited);
}

TEST_CASE("Fredholm inverse identities") {
  CHECK(max_diff(fredholm_inverse(GradedOperator::identity(8)).matrix(), Eigen::MatrixXcd::Identity(17, 17)) < 1e-14);

  const GradedOperator dinv = fredholm_inverse(GradedOperator::derivative(8));
  CHECK(dinv.order() == -1);
  for (int n = -8; n <= 8; ++n) {
    const Complex expected = n == 0 ? Complex{} : 1.0 / Complex(0.0, n);
    CHECK(std::abs(dinv.matrix()(n + 8, n + 8) - expected) < 1e-14);
  }

  const int n = 32;
  const GradedOperator a = catalog_operator("laplace_minus_one", n);
  const FredholmReport r = analyze_fredholm(a);
  const Eigen::MatrixXcd ap = fredholm_inverse(a).matrix();
  const Eigen::MatrixXcd id = Eigen::MatrixXcd::Identity(2 * n + 1, 2 * n + 1);
  CHECK(max_diff(a.matrix() * ap, id - projector(r.cokernel_basis, n)) <= 1e-8);
  CHECK(max_diff(ap * a.matrix(), id - projector(r.kernel_basis, n)) <= 1e-8);
}

TEST_CASE("report JSON carries the dimensions") {
  const nlohmann::json j = analyze_fredholm(catalog_operator("ddtheta", 8));
  CHECK(j.at("dim_ker") == 1);
  CHECK(j.at("dim_coker") == 1);
  CHECK(j.at("index") == 0);
}
