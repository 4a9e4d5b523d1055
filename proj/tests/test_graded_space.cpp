#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <vector>

#include "nmscale/graded_space.hpp"
#include "nmscale/random.hpp"

using namespace nmscale;

namespace {

// Independent oracle: direct O(M·N) evaluation of Σ û_n e^{inθ_j}.
std::vector<double> direct_samples(const GradedVector& u, int m) {
  std::vector<double> out(m);
  for (int j = 0; j < m; ++j) {
    const double theta = 2.0 * std::numbers::pi * j / m;
    Complex s{};
    for (int n = -u.bandwidth(); n <= u.bandwidth(); ++n) s += u.coeff(n) * std::polar(1.0, n * theta);
    out[j] = s.real();
  }
  return out;
}

double max_diff(const GradedVector& a, const GradedVector& b) {
  return (a.coeffs() - b.coeffs()).cwiseAbs().maxCoeff();
}

}  // namespace

TEST_CASE("norm of the zero vector and of the constant mode") {
  const GradedVector z(8);
  const GradedVector one = GradedVector::constant(8, 1.0);
  for (int k = 0; k <= 12; ++k) {
    CHECK(norm(z, k) == 0.0);
    CHECK(norm(one, k) == doctest::Approx(1.0).epsilon(1e-15));
  }
}

TEST_CASE("cos theta norms by direct summation") {
  const GradedVector c = GradedVector::cosine(8, 1);
  CHECK(c.coeff(1) == Complex(0.5, 0.0));
  CHECK(c.coeff(-1) == Complex(0.5, 0.0));
  // Σ w(n)^{2k}|û_n|² over n = ±1 with w = 2.
  auto oracle = [](int k) { return std::sqrt(2.0 * std::pow(2.0, 2 * k) * 0.25); };
  CHECK(norm(c, 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  CHECK(norm(c, 1) == doctest::Approx(std::sqrt(2.0)).epsilon(1e-15));
  CHECK(norm(c, 2) == doctest::Approx(std::sqrt(8.0)).epsilon(1e-15));
  for (int k = 0; k <= 6; ++k) CHECK(norm(c, k) == doctest::Approx(oracle(k)).epsilon(1e-14));
  CHECK(norm_monotone(c));
}

TEST_CASE("norm levels outside the scale are rejected") {
  const GradedVector c = GradedVector::cosine(4, 1);
  CHECK_THROWS_AS(norm(c, -1), DomainError);
  CHECK_THROWS_AS(norm(c, 13), DomainError);
}

TEST_CASE("monotonicity, triangle inequality and homogeneity on random vectors") {
  CHECK(norm_monotone(GradedVector(16)));
  for (std::uint64_t s = 0; s < 20; ++s) {
    const GradedVector u = random_vector(derive_seed(1, s), 32, 2.0);
    const GradedVector v = random_vector(derive_seed(2, s), 32, 0.5);
    const GradedVector w = random_vector(derive_seed(3, s), 32, 1.0);
    CHECK(norm_monotone(u));
    for (int k = 0; k <= 6; ++k) {
      CHECK(norm(u + v, k) <= norm(u, k) + norm(v, k) + 1e-12);
      CHECK(norm(u + v + w, k) <= norm(u, k) + norm(v, k) + norm(w, k) + 1e-12);
      CHECK(norm(-2.5 * u, k) == doctest::Approx(2.5 * norm(u, k)).epsilon(1e-14));
      if (k > 0) CHECK(norm(u, k - 1) <= norm(u, k));
    }
  }
}

TEST_CASE("synthesize matches the defining sum") {
  SUBCASE("constant") {
    const Eigen::VectorXd s = synthesize(GradedVector::constant(4, 1.0), 16);
    for (Eigen::Index j = 0; j < s.size(); ++j) CHECK(s(j) == doctest::Approx(1.0).epsilon(1e-15));
  }
  SUBCASE("cos at M = 8") {
    const Eigen::VectorXd s = synthesize(GradedVector::cosine(3, 1), 8);
    for (int j = 0; j < 8; ++j) CHECK(s(j) == doctest::Approx(std::cos(2.0 * std::numbers::pi * j / 8)).scale(1.0).epsilon(1e-15));
  }
  SUBCASE("random vector against direct evaluation") {
    const GradedVector u = random_vector(5, 12, 1.0);
    const Eigen::VectorXd s = synthesize(u, 30);
    const std::vector<double> d = direct_samples(u, 30);
    for (int j = 0; j < 30; ++j) CHECK(std::abs(s(j) - d[j]) < 1e-13);
  }
  CHECK_THROWS_AS(synthesize(GradedVector(8), 16), AliasingError);
}

TEST_CASE("analyze inverts synthesize") {
  SUBCASE("constant samples") {
    const GradedVector u = analyze(Eigen::VectorXd(Eigen::VectorXd::Ones(9)), 4);
    CHECK(max_diff(u, GradedVector::constant(4, 1.0)) < 1e-15);
  }
  SUBCASE("cos samples") {
    Eigen::VectorXd s(8);
    for (int j = 0; j < 8; ++j) s(j) = std::cos(2.0 * std::numbers::pi * j / 8);
    CHECK(max_diff(analyze(s, 3), GradedVector::cosine(3, 1)) < 1e-15);
  }
  SUBCASE("round trip") {
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
      const GradedVector u = random_vector(seed, 40, 0.0);
      for (int m : {81, 96, 160}) CHECK(max_diff(analyze(synthesize(u, m), 40), u) < 1e-12);
    }
  }
  CHECK_THROWS_AS(analyze(Eigen::VectorXd(Eigen::VectorXd::Ones(8)), 4), AliasingError);
}

TEST_CASE("pointwise products") {
  const GradedVector v = random_vector(9, 16, 1.0);
  CHECK(pointwise_product(v, GradedVector(16)).is_zero());
  CHECK(max_diff(pointwise_product(GradedVector::constant(16, 1.0), v), v) < 1e-14);

  const GradedVector c = GradedVector::cosine(8, 1);
  const GradedVector sq = pointwise_product(c, c);
  const GradedVector expected = GradedVector::constant(8, 0.5) + GradedVector::cosine(8, 2, 0.5);
  CHECK(max_diff(sq, expected) < 1e-15);

  // Oracle: truncated discrete convolution Σ_m û_m v̂_{n−m}.
  const GradedVector u = random_vector(10, 16, 1.0);
  const GradedVector p = pointwise_product(u, v);
  for (int n = -16; n <= 16; ++n) {
    Complex s{};
    for (int m = -16; m <= 16; ++m) s += u.coeff(m) * v.coeff(n - m);
    CHECK(std::abs(p.coeff(n) - s) < 1e-13);
  }
  CHECK(p.is_real());
  CHECK(hermitian_symmetric(p));

  // Triple product against two nested pairwise products.
  const GradedVector w = random_vector(11, 16, 2.0);
  const GradedVector factors[] = {u, v, w};
  const GradedVector triple = product(factors);
  for (int n = -16; n <= 16; ++n) {
    Complex s{};
    for (int a = -16; a <= 16; ++a) {
      for (int b = -16; b <= 16; ++b) s += u.coeff(a) * v.coeff(b) * w.coeff(n - a - b);
    }
    CHECK(std::abs(triple.coeff(n) - s) < 1e-13);
  }
  CHECK_THROWS_AS(pointwise_product(u, GradedVector(8)), BandwidthMismatch);
}

TEST_CASE("differentiation") {
  CHECK(differentiate(GradedVector::constant(8, 3.0)).is_zero());
  CHECK(max_diff(differentiate(GradedVector::sine(8, 1)), GradedVector::cosine(8, 1)) < 1e-16);
  CHECK(norm(differentiate(GradedVector::cosine(8, 1)), 0) == doctest::Approx(std::sqrt(0.5)).epsilon(1e-15));
  for (std::uint64_t s = 0; s < 10; ++s) {
    const GradedVector u = random_vector(s, 24, 1.0);
    for (int k = 0; k < 6; ++k) CHECK(norm(differentiate(u), k) <= norm(u, k + 1) * (1 + 1e-15));
  }
}

TEST_CASE("rotation") {
  const GradedVector u = random_vector(21, 20, 1.0);
  CHECK(max_diff(compose_with_rotation(u, 0.0), u) == 0.0);
  const GradedVector c = GradedVector::cosine(8, 1);
  CHECK(max_diff(compose_with_rotation(c, std::numbers::pi), -c) < 1e-15);
  for (int i = 0; i < 20; ++i) {
    const double s = 0.37 * i - 2.0;
    const GradedVector r = compose_with_rotation(u, s);
    for (int k = 0; k <= 6; ++k) CHECK(std::abs(norm(r, k) - norm(u, k)) <= 1e-14 * norm(u, k));
    // u(θ + s) sampled directly.
    const Eigen::VectorXd got = synthesize(r, 41);
    for (int j = 0; j < 41; j += 5) {
      const double theta = 2.0 * std::numbers::pi * j / 41 + s;
      Complex v{};
      for (int n = -20; n <= 20; ++n) v += u.coeff(n) * std::polar(1.0, n * theta);
      CHECK(std::abs(got(j) - v.real()) < 1e-12);
    }
  }
}

TEST_CASE("random vectors") {
  const GradedVector a = random_vector(77, 16, 1.5);
  const GradedVector b = random_vector(77, 16, 1.5);
  CHECK(a.coeffs() == b.coeffs());
  CHECK(a.is_real());
  CHECK(hermitian_symmetric(a));
  const GradedVector flat = random_vector(3, 4, 0.0);
  for (int n = -4; n <= 4; ++n) {
    CHECK(std::abs(flat.coeff(n)) >= 0.5);
    CHECK(std::abs(flat.coeff(n)) <= 1.0);
  }
  // Decay 2: doubling N moves ‖u‖_1² by at most the tail Σ w^{-2}.
  const double n1 = norm(random_vector(4, 256, 2.0), 1);
  const double n2 = norm(random_vector(4, 512, 2.0), 1);
  double tail = 0.0;
  for (int n = 257; n <= 512; ++n) tail += 2.0 * std::pow(1.0 + n, -2.0);
  CHECK(std::abs(n2 * n2 - n1 * n1) <= tail + 1e-12);
  CHECK_THROWS_AS(random_vector(1, 4, -1.0), std::invalid_argument);
}

TEST_CASE("decay exponent fit") {
  CoeffVector c = CoeffVector::Zero(129);
  for (int n = -64; n <= 64; ++n) c(n + 64) = std::pow(weight(n), -3.0);
  const DecayFit fit = fit_decay_exponent(GradedVector(c, true));
  CHECK(fit.status == DecayFit::Status::fitted);
  CHECK(fit.exponent == doctest::Approx(3.0).epsilon(1e-10));
  const DecayFit band = fit_decay_exponent(GradedVector::cosine(64, 2));
  CHECK(band.status == DecayFit::Status::bandlimited);
  CHECK(std::isinf(band.exponent));
}

TEST_CASE("resize and JSON round trip") {
  const GradedVector u = random_vector(8, 10, 1.0);
  const GradedVector big = resize(u, 20);
  CHECK(norm(big, 3) == doctest::Approx(norm(u, 3)).epsilon(1e-15));
  CHECK(big.coeff(15) == Complex{});
  const GradedVector small = resize(u, 4);
  CHECK(small.coeff(4) == u.coeff(4));

  const nlohmann::json j = u;
  const GradedVector back = j.get<GradedVector>();
  CHECK(back.coeffs() == u.coeffs());
  CHECK(back.is_real() == u.is_real());
  nlohmann::json bad = j;
  bad["bandwidth"] = 3;
  CHECK_THROWS(bad.get<GradedVector>());
}
