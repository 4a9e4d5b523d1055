#pragma once

// Periodic functions on the circle stored as truncated Fourier coefficients
// u(θ) = Σ_{|n|≤N} û_n e^{inθ}, carrying the whole scale of graded norms
//   ‖u‖_k = ( Σ_n w(n)^{2k} |û_n|² )^{1/2},   w(n) = 1 + |n|.
// One coefficient array with many norms models the nested chain
// E_∞ ⊆ … ⊆ E_1 ⊆ E_0, all inclusions of norm ≤ 1.

#include <cmath>
#include <complex>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>
#include "json.hpp"

namespace nmscale {

using Complex = std::complex<double>;
using CoeffVector = Eigen::VectorXcd;

class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class AliasingError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class BandwidthMismatch : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kDefaultMaxLevel = 12;

/// Weight rule of the graded norms.
inline double weight(long n) { return 1.0 + static_cast<double>(n < 0 ? -n : n); }

struct NormScale {
  int max_level = kDefaultMaxLevel;

  void check_level(int k) const {
    if (k < 0 || k > max_level) {
      throw DomainError("norm level " + std::to_string(k) + " outside [0, " +
                        std::to_string(max_level) + "]");
    }
  }
};

/// ‖c‖_k for a centred coefficient array of odd length 2N+1 (index i ↔ mode i − N).
template <typename Derived>
double graded_norm(const Eigen::MatrixBase<Derived>& c, int k) {
  const Eigen::Index size = c.size();
  const long bandwidth = static_cast<long>((size - 1) / 2);
  double sum = 0.0;
  for (Eigen::Index i = 0; i < size; ++i) {
    const double w2k = std::pow(weight(static_cast<long>(i) - bandwidth), 2.0 * k);
    sum += w2k * std::norm(c(i));
  }
  return std::sqrt(sum);
}

/// Bandwidth-limited coefficient sequence. Immutable after construction; real
/// vectors have Hermitian symmetry û_{−n} = conj(û_n) enforced on construction.
class GradedVector {
 public:
  GradedVector() : GradedVector(0, true) {}
  explicit GradedVector(int bandwidth, bool real = true);
  GradedVector(CoeffVector coeffs, bool real);

  static GradedVector zero(int bandwidth, bool real = true) { return GradedVector(bandwidth, real); }
  static GradedVector constant(int bandwidth, double value);
  /// Single complex mode n; real_flag is false unless n == 0 and value is real.
  static GradedVector mode(int bandwidth, int n, Complex value);
  /// Real cosine/sine modes a·cos(nθ), a·sin(nθ).
  static GradedVector cosine(int bandwidth, int n, double amplitude = 1.0);
  static GradedVector sine(int bandwidth, int n, double amplitude = 1.0);

  int bandwidth() const { return bandwidth_; }
  int size() const { return 2 * bandwidth_ + 1; }
  bool is_real() const { return real_; }
  const CoeffVector& coeffs() const { return coeffs_; }

  /// û_n for |n| ≤ N, zero beyond the bandwidth.
  Complex coeff(int n) const {
    return (n < -bandwidth_ || n > bandwidth_) ? Complex{} : coeffs_(n + bandwidth_);
  }

  bool is_zero() const { return coeffs_.isZero(0.0); }

  GradedVector operator-() const { return GradedVector(-coeffs_, real_); }
  GradedVector& operator+=(const GradedVector& other);
  GradedVector& operator-=(const GradedVector& other);
  GradedVector& operator*=(double s);

 private:
  int bandwidth_;
  bool real_;
  CoeffVector coeffs_;
};

GradedVector operator+(GradedVector a, const GradedVector& b);
GradedVector operator-(GradedVector a, const GradedVector& b);
GradedVector operator*(double s, GradedVector a);
inline GradedVector operator*(GradedVector a, double s) { return s * std::move(a); }

/// Complex scalar multiple; drops the real flag unless the scalar is real.
GradedVector scaled(const GradedVector& u, Complex s);

/// Level-0 inner product Σ conj(û_n) v̂_n.
Complex inner(const GradedVector& u, const GradedVector& v);

double norm(const GradedVector& u, int k, const NormScale& scale = {});

/// ‖u‖_0 … ‖u‖_K in one pass.
Eigen::VectorXd norms(const GradedVector& u, int max_level);

/// True iff ‖u‖_l ≤ ‖u‖_k for all l ≤ k ≤ max_level.
bool norm_monotone(const GradedVector& u, const NormScale& scale = {});

bool hermitian_symmetric(const GradedVector& u, double rel_tol = 1e-14);

/// Zero-pads or truncates to a new bandwidth.
GradedVector resize(const GradedVector& u, int bandwidth);

/// Smallest 2^a 3^b 5^c ≥ n.
int next_fast_size(int n);

/// Samples u(θ_j), θ_j = 2πj/M. Throws AliasingError when M < 2N+1.
Eigen::VectorXcd synthesize_complex(const GradedVector& u, int grid_size);
Eigen::VectorXd synthesize(const GradedVector& u, int grid_size);

/// Inverse of synthesize on bandwidth-limited input.
GradedVector analyze(const Eigen::VectorXd& samples, int bandwidth);
GradedVector analyze(const Eigen::VectorXcd& samples, int bandwidth);

/// Product truncated to bandwidth N, alias-free on a grid of ≥ 3N+1 points.
GradedVector pointwise_product(const GradedVector& u, const GradedVector& v);

/// Product of k ≥ 1 factors, alias-free on a grid of ≥ (k+1)N+1 points.
GradedVector product(std::span<const GradedVector> factors);

/// û_n ↦ i n û_n.
GradedVector differentiate(const GradedVector& u);

/// u ↦ u(· + s), i.e. û_n ↦ e^{ins} û_n.
GradedVector compose_with_rotation(const GradedVector& u, double s);

/// Real vector with |û_n| = w(n)^{−decay}·U[0.5, 1] and uniform random phases.
GradedVector random_vector(std::uint64_t seed, int bandwidth, double decay);

/// Least-squares fit of log|û_n| against log w(n) over the top half of the
/// spectrum; the fitted decay exponent is minus the slope.
struct DecayFit {
  enum class Status { fitted, bandlimited, inconclusive };
  Status status = Status::inconclusive;
  double exponent = 0.0;  // +inf when bandlimited
  double r2 = 0.0;
  int modes_used = 0;
};

DecayFit fit_decay_exponent(const GradedVector& u);

std::string to_string(DecayFit::Status status);

void to_json(nlohmann::json& j, const GradedVector& u);
void from_json(const nlohmann::json& j, GradedVector& u);

}  // namespace nmscale
