#include "nmscale/graded_space.hpp"

#include <algorithm>
#include <limits>
#include <numbers>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "nmscale/random.hpp"

namespace nmscale {

namespace {

int bandwidth_of_size(Eigen::Index size) {
  if (size < 1 || size % 2 == 0) {
    throw std::invalid_argument("coefficient array must have odd length 2N+1");
  }
  return static_cast<int>((size - 1) / 2);
}

void symmetrize(CoeffVector& c) {
  const int n_max = bandwidth_of_size(c.size());
  for (int n = 0; n <= n_max; ++n) {
    const Complex avg = 0.5 * (c(n_max + n) + std::conj(c(n_max - n)));
    c(n_max + n) = avg;
    c(n_max - n) = std::conj(avg);
  }
}

void require_same_bandwidth(const GradedVector& a, const GradedVector& b) {
  if (a.bandwidth() != b.bandwidth()) {
    throw BandwidthMismatch("bandwidth mismatch: " + std::to_string(a.bandwidth()) + " vs " +
                            std::to_string(b.bandwidth()));
  }
}

int wrap(int n, int m) {
  const int r = n % m;
  return r < 0 ? r + m : r;
}

}  // namespace

GradedVector::GradedVector(int bandwidth, bool real)
    : bandwidth_(bandwidth), real_(real), coeffs_(CoeffVector::Zero(2 * bandwidth + 1)) {
  if (bandwidth < 0) throw std::invalid_argument("negative bandwidth");
}

GradedVector::GradedVector(CoeffVector coeffs, bool real)
    : bandwidth_(bandwidth_of_size(coeffs.size())), real_(real), coeffs_(std::move(coeffs)) {
  if (real_) symmetrize(coeffs_);
}

GradedVector GradedVector::constant(int bandwidth, double value) {
  CoeffVector c = CoeffVector::Zero(2 * bandwidth + 1);
  c(bandwidth) = value;
  return GradedVector(std::move(c), true);
}

GradedVector GradedVector::mode(int bandwidth, int n, Complex value) {
  if (n < -bandwidth || n > bandwidth) throw std::out_of_range("mode outside bandwidth");
  CoeffVector c = CoeffVector::Zero(2 * bandwidth + 1);
  c(n + bandwidth) = value;
  return GradedVector(std::move(c), n == 0 && value.imag() == 0.0);
}

GradedVector GradedVector::cosine(int bandwidth, int n, double amplitude) {
  if (n < 0 || n > bandwidth) throw std::out_of_range("mode outside bandwidth");
  if (n == 0) return constant(bandwidth, amplitude);
  CoeffVector c = CoeffVector::Zero(2 * bandwidth + 1);
  c(bandwidth + n) = 0.5 * amplitude;
  c(bandwidth - n) = 0.5 * amplitude;
  return GradedVector(std::move(c), true);
}

GradedVector GradedVector::sine(int bandwidth, int n, double amplitude) {
  if (n < 0 || n > bandwidth) throw std::out_of_range("mode outside bandwidth");
  CoeffVector c = CoeffVector::Zero(2 * bandwidth + 1);
  if (n > 0) {
    c(bandwidth + n) = Complex(0.0, -0.5 * amplitude);
    c(bandwidth - n) = Complex(0.0, 0.5 * amplitude);
  }
  return GradedVector(std::move(c), true);
}

GradedVector& GradedVector::operator+=(const GradedVector& other) {
  require_same_bandwidth(*this, other);
  coeffs_ += other.coeffs_;
  real_ = real_ && other.real_;
  return *this;
}

GradedVector& GradedVector::operator-=(const GradedVector& other) {
  require_same_bandwidth(*this, other);
  coeffs_ -= other.coeffs_;
  real_ = real_ && other.real_;
  return *this;
}

GradedVector& GradedVector::operator*=(double s) {
  coeffs_ *= s;
  return *this;
}

GradedVector operator+(GradedVector a, const GradedVector& b) { return a += b; }
GradedVector operator-(GradedVector a, const GradedVector& b) { return a -= b; }
GradedVector operator*(double s, GradedVector a) { return a *= s; }

GradedVector scaled(const GradedVector& u, Complex s) {
  return GradedVector(u.coeffs() * s, u.is_real() && s.imag() == 0.0);
}

Complex inner(const GradedVector& u, const GradedVector& v) {
  require_same_bandwidth(u, v);
  return u.coeffs().dot(v.coeffs());
}

double norm(const GradedVector& u, int k, const NormScale& scale) {
  scale.check_level(k);
  return graded_norm(u.coeffs(), k);
}

Eigen::VectorXd norms(const GradedVector& u, int max_level) {
  Eigen::VectorXd sums = Eigen::VectorXd::Zero(max_level + 1);
  const int n_max = u.bandwidth();
  for (int n = -n_max; n <= n_max; ++n) {
    const double a2 = std::norm(u.coeff(n));
    if (a2 == 0.0) continue;
    const double w2 = weight(n) * weight(n);
    double wk = 1.0;
    for (int k = 0; k <= max_level; ++k) {
      sums(k) += wk * a2;
      wk *= w2;
    }
  }
  return sums.cwiseSqrt();
}

bool norm_monotone(const GradedVector& u, const NormScale& scale) {
  const Eigen::VectorXd all = norms(u, scale.max_level);
  for (int k = 1; k <= scale.max_level; ++k) {
    if (all(k - 1) > all(k)) return false;
  }
  return true;
}

bool hermitian_symmetric(const GradedVector& u, double rel_tol) {
  const double scale = u.coeffs().cwiseAbs().maxCoeff();
  for (int n = 0; n <= u.bandwidth(); ++n) {
    if (std::abs(u.coeff(-n) - std::conj(u.coeff(n))) > rel_tol * scale) return false;
  }
  return true;
}

GradedVector resize(const GradedVector& u, int bandwidth) {
  CoeffVector c = CoeffVector::Zero(2 * bandwidth + 1);
  const int common = std::min(bandwidth, u.bandwidth());
  for (int n = -common; n <= common; ++n) c(n + bandwidth) = u.coeff(n);
  return GradedVector(std::move(c), u.is_real());
}

int next_fast_size(int n) {
  for (int m = std::max(n, 1);; ++m) {
    int r = m;
    for (int p : {2, 3, 5}) {
      while (r % p == 0) r /= p;
    }
    if (r == 1) return m;
  }
}

Eigen::VectorXcd synthesize_complex(const GradedVector& u, int grid_size) {
  const int n_max = u.bandwidth();
  if (grid_size < 2 * n_max + 1) {
    throw AliasingError("grid of " + std::to_string(grid_size) + " points aliases bandwidth " +
                        std::to_string(n_max));
  }
  Eigen::VectorXcd spectrum = Eigen::VectorXcd::Zero(grid_size);
  for (int n = -n_max; n <= n_max; ++n) spectrum(wrap(n, grid_size)) = u.coeff(n);

  Eigen::FFT<double> fft;
  fft.SetFlag(Eigen::FFT<double>::Unscaled);
  Eigen::VectorXcd samples(grid_size);
  fft.inv(samples, spectrum);
  return samples;
}

Eigen::VectorXd synthesize(const GradedVector& u, int grid_size) {
  return synthesize_complex(u, grid_size).real();
}

GradedVector analyze(const Eigen::VectorXcd& samples, int bandwidth) {
  const int m = static_cast<int>(samples.size());
  if (m < 2 * bandwidth + 1) {
    throw AliasingError("need at least 2N+1 samples to resolve bandwidth " +
                        std::to_string(bandwidth));
  }
  Eigen::FFT<double> fft;
  Eigen::VectorXcd spectrum(m);
  fft.fwd(spectrum, samples);
  CoeffVector c(2 * bandwidth + 1);
  const double inv_m = 1.0 / m;
  for (int n = -bandwidth; n <= bandwidth; ++n) c(n + bandwidth) = spectrum(wrap(n, m)) * inv_m;
  return GradedVector(std::move(c), false);
}

GradedVector analyze(const Eigen::VectorXd& samples, int bandwidth) {
  const Eigen::VectorXcd complex_samples = samples.cast<Complex>();
  return GradedVector(analyze(complex_samples, bandwidth).coeffs(), true);
}

GradedVector pointwise_product(const GradedVector& u, const GradedVector& v) {
  const GradedVector factors[] = {u, v};
  return product(factors);
}

GradedVector product(std::span<const GradedVector> factors) {
  if (factors.empty()) throw std::invalid_argument("product of zero factors");
  const int n_max = factors.front().bandwidth();
  bool real = true;
  for (const auto& f : factors) {
    require_same_bandwidth(factors.front(), f);
    real = real && f.is_real();
  }
  if (factors.size() == 1) return factors.front();

  const int k = static_cast<int>(factors.size());
  const int grid = next_fast_size((k + 1) * n_max + 1);
  Eigen::VectorXcd acc = synthesize_complex(factors.front(), grid);
  for (int i = 1; i < k; ++i) acc.array() *= synthesize_complex(factors[i], grid).array();
  return GradedVector(analyze(acc, n_max).coeffs(), real);
}

GradedVector differentiate(const GradedVector& u) {
  CoeffVector c = u.coeffs();
  const int n_max = u.bandwidth();
  for (int n = -n_max; n <= n_max; ++n) c(n + n_max) *= Complex(0.0, n);
  return GradedVector(std::move(c), u.is_real());
}

GradedVector compose_with_rotation(const GradedVector& u, double s) {
  CoeffVector c = u.coeffs();
  const int n_max = u.bandwidth();
  for (int n = -n_max; n <= n_max; ++n) c(n + n_max) *= std::polar(1.0, n * s);
  return GradedVector(std::move(c), u.is_real());
}

GradedVector random_vector(std::uint64_t seed, int bandwidth, double decay) {
  if (decay < 0.0) throw std::invalid_argument("decay exponent must be nonnegative");
  Rng rng(seed);
  CoeffVector c(2 * bandwidth + 1);
  const double zero_mag = rng.uniform(0.5, 1.0);
  c(bandwidth) = (rng.uniform() < 0.5 ? -zero_mag : zero_mag);
  for (int n = 1; n <= bandwidth; ++n) {
    const double mag = std::pow(weight(n), -decay) * rng.uniform(0.5, 1.0);
    const double phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    c(bandwidth + n) = std::polar(mag, phase);
    c(bandwidth - n) = std::polar(mag, -phase);
  }
  return GradedVector(std::move(c), true);
}

DecayFit fit_decay_exponent(const GradedVector& u) {
  DecayFit fit;
  const int n_max = u.bandwidth();
  const double peak = u.coeffs().cwiseAbs().maxCoeff();
  if (peak == 0.0) {
    fit.status = DecayFit::Status::bandlimited;
    fit.exponent = std::numeric_limits<double>::infinity();
    return fit;
  }
  const double floor = 1e-13 * peak;
  std::vector<double> xs, ys;
  for (int n = (n_max + 1) / 2; n <= n_max; ++n) {
    if (n == 0) continue;
    const double amp =
        std::sqrt(0.5 * (std::norm(u.coeff(n)) + std::norm(u.coeff(-n))));
    if (amp <= floor) continue;
    xs.push_back(std::log(weight(n)));
    ys.push_back(std::log(amp));
  }
  fit.modes_used = static_cast<int>(xs.size());
  if (xs.empty()) {
    fit.status = DecayFit::Status::bandlimited;
    fit.exponent = std::numeric_limits<double>::infinity();
    return fit;
  }
  if (xs.size() < 4) return fit;

  const Eigen::Map<const Eigen::VectorXd> x(xs.data(), static_cast<Eigen::Index>(xs.size()));
  const Eigen::Map<const Eigen::VectorXd> y(ys.data(), static_cast<Eigen::Index>(ys.size()));
  const double xm = x.mean();
  const double ym = y.mean();
  const double sxx = (x.array() - xm).square().sum();
  const double sxy = ((x.array() - xm) * (y.array() - ym)).sum();
  const double syy = (y.array() - ym).square().sum();
  const double slope = sxy / sxx;
  fit.status = DecayFit::Status::fitted;
  fit.exponent = -slope;
  fit.r2 = syy > 0.0 ? (sxy * sxy) / (sxx * syy) : 1.0;
  return fit;
}

std::string to_string(DecayFit::Status status) {
  switch (status) {
    case DecayFit::Status::fitted: return "fitted";
    case DecayFit::Status::bandlimited: return "bandlimited";
    case DecayFit::Status::inconclusive: return "inconclusive";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const GradedVector& u) {
  nlohmann::json coeffs = nlohmann::json::array();
  for (int n = -u.bandwidth(); n <= u.bandwidth(); ++n) {
    coeffs.push_back({u.coeff(n).real(), u.coeff(n).imag()});
  }
  j = nlohmann::json{{"bandwidth", u.bandwidth()}, {"real_flag", u.is_real()}, {"coeffs", coeffs}};
}

void from_json(const nlohmann::json& j, GradedVector& u) {
  const int bandwidth = j.at("bandwidth").get<int>();
  const auto& coeffs = j.at("coeffs");
  if (coeffs.size() != static_cast<std::size_t>(2 * bandwidth + 1)) {
    throw std::invalid_argument("coefficient count does not match bandwidth");
  }
  CoeffVector c(2 * bandwidth + 1);
  for (int i = 0; i < 2 * bandwidth + 1; ++i) {
    c(i) = Complex(coeffs[i].at(0).get<double>(), coeffs[i].at(1).get<double>());
  }
  u = GradedVector(std::move(c), j.at("real_flag").get<bool>());
}

}  // namespace nmscale
