#include "nmscale/operators.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "nmscale/random.hpp"

namespace nmscale {

namespace {

int bandwidth_of(const Eigen::MatrixXcd& m) {
  if (m.rows() != m.cols() || m.rows() % 2 == 0) {
    throw std::invalid_argument("operator matrix must be square of odd size 2N+1");
  }
  return static_cast<int>((m.rows() - 1) / 2);
}

bool check_real_preserving(const Eigen::MatrixXcd& m) {
  const Eigen::Index size = m.rows();
  const double scale = m.cwiseAbs().maxCoeff();
  const double tol = 1e-13 * (scale > 0.0 ? scale : 1.0);
  for (Eigen::Index i = 0; i < size; ++i) {
    for (Eigen::Index j = 0; j < size; ++j) {
      if (std::abs(m(size - 1 - i, size - 1 - j) - std::conj(m(i, j))) > tol) return false;
    }
  }
  return true;
}

void require_same_bandwidth(const GradedOperator& a, int bandwidth) {
  if (a.bandwidth() != bandwidth) {
    throw BandwidthMismatch("operator bandwidth " + std::to_string(a.bandwidth()) +
                            " does not match " + std::to_string(bandwidth));
  }
}

GradedVector column_vector(const Eigen::VectorXcd& c) { return GradedVector(c, false); }

}  // namespace

GradedOperator::GradedOperator(Eigen::MatrixXcd matrix, int order, std::string label)
    : bandwidth_(bandwidth_of(matrix)),
      order_(order),
      label_(std::move(label)),
      matrix_(std::move(matrix)),
      real_preserving_(check_real_preserving(matrix_)) {}

GradedOperator GradedOperator::identity(int bandwidth) {
  return {Eigen::MatrixXcd::Identity(2 * bandwidth + 1, 2 * bandwidth + 1), 0, "id"};
}

GradedOperator GradedOperator::diagonal(const Eigen::VectorXcd& symbol, int order,
                                        std::string label) {
  return {symbol.asDiagonal().toDenseMatrix(), order, std::move(label)};
}

GradedOperator GradedOperator::derivative(int bandwidth, int times) {
  Eigen::VectorXcd symbol(2 * bandwidth + 1);
  for (int n = -bandwidth; n <= bandwidth; ++n) {
    symbol(n + bandwidth) = std::pow(Complex(0.0, n), times);
  }
  return diagonal(symbol, times, times == 1 ? "d/dθ" : "d^" + std::to_string(times) + "/dθ^" +
                                                            std::to_string(times));
}

GradedOperator GradedOperator::multiplication(const GradedVector& v) {
  const int n_max = v.bandwidth();
  Eigen::MatrixXcd m(2 * n_max + 1, 2 * n_max + 1);
  for (int n = -n_max; n <= n_max; ++n) {
    for (int k = -n_max; k <= n_max; ++k) m(n + n_max, k + n_max) = v.coeff(n - k);
  }
  return {std::move(m), 0, "mult"};
}

GradedVector apply(const GradedOperator& a, const GradedVector& u) {
  require_same_bandwidth(a, u.bandwidth());
  return GradedVector(a.matrix() * u.coeffs(), u.is_real() && a.real_preserving());
}

GradedOperator compose(const GradedOperator& a, const GradedOperator& b) {
  require_same_bandwidth(a, b.bandwidth());
  return {a.matrix() * b.matrix(), a.order() + b.order(), a.label() + "∘" + b.label()};
}

GradedOperator add(const GradedOperator& a, const GradedOperator& b) {
  require_same_bandwidth(a, b.bandwidth());
  return {a.matrix() + b.matrix(), std::max(a.order(), b.order()), a.label() + "+" + b.label()};
}

GradedOperator scaled(const GradedOperator& a, Complex s) {
  return {a.matrix() * s, a.order(), a.label()};
}

OrderCertificate certify_order(const GradedOperator& a, int max_level, int trials,
                               std::uint64_t seed) {
  static constexpr double kDecays[] = {0.75, 1.5, 3.0};
  const int d = std::max(a.order(), 0);
  const int top = max_level - d;
  if (top < 0) throw DomainError("declared order exceeds max_level");
  OrderCertificate cert;
  cert.sup_small.assign(static_cast<std::size_t>(top) + 1, 0.0);
  cert.sup_large.assign(static_cast<std::size_t>(top) + 1, 0.0);
  for (int i = 0; i < 2 * trials; ++i) {
    const GradedVector u =
        random_vector(derive_seed(seed, static_cast<std::uint64_t>(i)), a.bandwidth(), kDecays[i % 3]);
    const Eigen::VectorXd in = norms(u, max_level);
    const Eigen::VectorXd out = norms(apply(a, u), max_level);
    for (int k = 0; k <= top; ++k) {
      const double ratio = out(k) / in(k + d);
      if (i < trials) cert.sup_small[k] = std::max(cert.sup_small[k], ratio);
      cert.sup_large[k] = std::max(cert.sup_large[k], ratio);
    }
  }
  for (int k = 0; k <= top; ++k) {
    if (cert.sup_large[k] > 2.0 * cert.sup_small[k]) cert.stable = false;
  }
  return cert;
}

FredholmReport analyze_fredholm(const GradedOperator& a, double rank_tol) {
  if (!(rank_tol > 0.0 && rank_tol < 1.0)) throw std::invalid_argument("rank_tol must lie in (0, 1)");
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a.matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  FredholmReport report;
  report.singular_values = svd.singularValues();
  const Eigen::Index size = a.matrix().rows();
  const double sigma_max = size > 0 ? report.singular_values(0) : 0.0;
  const double cut = rank_tol * sigma_max;

  int rank = 0;
  while (rank < size && report.singular_values(rank) > cut) ++rank;
  report.rank = rank;
  report.dim_ker = static_cast<int>(size) - rank;
  report.dim_coker = static_cast<int>(size) - rank;
  report.index = report.dim_ker - report.dim_coker;

  report.gap = std::numeric_limits<double>::infinity();
  if (rank > 0 && rank < size && report.singular_values(rank) > 0.0) {
    report.gap = report.singular_values(rank - 1) / report.singular_values(rank);
  }
  report.ambiguous = report.gap < kMinSpectralGap;

  for (Eigen::Index i = rank; i < size; ++i) {
    report.kernel_basis.push_back(column_vector(svd.matrixV().col(i)));
    report.cokernel_basis.push_back(column_vector(svd.matrixU().col(i)));
  }
  for (const auto& v : report.kernel_basis) report.kernel_decay.push_back(fit_decay_exponent(v));
  return report;
}

void to_json(nlohmann::json& j, const FredholmReport& r) {
  nlohmann::json decay = nlohmann::json::array();
  for (const auto& d : r.kernel_decay) {
    decay.push_back({{"status", to_string(d.status)},
                     {"exponent", std::isfinite(d.exponent) ? nlohmann::json(d.exponent)
                                                            : nlohmann::json("inf")},
                     {"r2", d.r2}});
  }
  j = nlohmann::json{
      {"dim_ker", r.dim_ker},
      {"dim_coker", r.dim_coker},
      {"index", r.index},
      {"rank", r.rank},
      {"gap", std::isfinite(r.gap) ? nlohmann::json(r.gap) : nlohmann::json("inf")},
      {"ambiguous", r.ambiguous},
      {"singular_values", std::vector<double>(r.singular_values.data(),
                                              r.singular_values.data() + r.singular_values.size())},
      {"kernel_basis", r.kernel_basis},
      {"cokernel_basis", r.cokernel_basis},
      {"kernel_decay", decay}};
}

BandwidthStability check_bandwidth_stability(const std::function<GradedOperator(int)>& build,
                                             int bandwidth, double rank_tol) {
  BandwidthStability out;
  out.coarse = analyze_fredholm(build(bandwidth), rank_tol);
  out.fine = analyze_fredholm(build(2 * bandwidth), rank_tol);
  out.stable = out.coarse.dim_ker == out.fine.dim_ker && out.coarse.dim_coker == out.fine.dim_coker &&
               !out.coarse.ambiguous && !out.fine.ambiguous;
  return out;
}

StronglySmoothingOperator make_strongly_smoothing(std::vector<GradedVector> range_vectors,
                                                  std::vector<GradedVector> functionals,
                                                  double smoothness, std::string label) {
  if (range_vectors.empty() || range_vectors.size() != functionals.size()) {
    throw std::invalid_argument("need matching nonempty range vectors and functionals");
  }
  const int n_max = range_vectors.front().bandwidth();
  const int size = 2 * n_max + 1;
  Eigen::MatrixXcd m = Eigen::MatrixXcd::Zero(size, size);
  for (std::size_t i = 0; i < range_vectors.size(); ++i) {
    m += range_vectors[i].coeffs() * functionals[i].coeffs().adjoint();
  }
  // Maps E_0 into E_∞; declared order 0.
  return {GradedOperator(std::move(m), 0, std::move(label)), std::move(range_vectors),
          std::move(functionals), smoothness};
}

StronglySmoothingOperator random_strongly_smoothing(std::uint64_t seed, int bandwidth, int rank,
                                                    double smoothness, double scale) {
  if (rank < 1) throw std::invalid_argument("rank must be at least 1");
  std::vector<GradedVector> range, functionals;
  for (int i = 0; i < rank; ++i) {
    range.push_back(random_vector(derive_seed(seed, 2 * i), bandwidth, smoothness + 1.0));
    functionals.push_back(random_vector(derive_seed(seed, 2 * i + 1), bandwidth, 0.0));
  }
  auto k = make_strongly_smoothing(range, functionals, smoothness, "K");
  const double sigma_max =
      Eigen::JacobiSVD<Eigen::MatrixXcd>(k.op.matrix()).singularValues()(0);
  const double factor = sigma_max > 0.0 ? scale / sigma_max : 0.0;
  for (auto& v : k.range_vectors) v *= factor;
  k.op = GradedOperator(k.op.matrix() * factor, 0, "K");
  return k;
}

StronglySmoothingOperator kernel_forcing_perturbation(const GradedOperator& a,
                                                      const GradedVector& kernel_dir,
                                                      const GradedVector& functional) {
  const Complex pairing = inner(functional, kernel_dir);
  if (std::abs(pairing) == 0.0) throw std::invalid_argument("functional annihilates the kernel direction");
  const GradedVector image = apply(a, kernel_dir);
  GradedVector range = scaled(image, -1.0 / pairing);
  const double smoothness = fit_decay_exponent(range).exponent;
  return make_strongly_smoothing({range}, {functional}, smoothness, "K_forcing");
}

IndexExperiment index_invariance_experiment(const GradedOperator& a,
                                            const std::vector<std::uint64_t>& seeds, int rank,
                                            double scale, double smoothness, double rank_tol) {
  IndexExperiment out;
  out.base_index = analyze_fredholm(a, rank_tol).index;
  for (std::uint64_t seed : seeds) {
    const auto k = random_strongly_smoothing(seed, a.bandwidth(), rank, smoothness, scale);
    const FredholmReport rep = analyze_fredholm(add(a, k.op), rank_tol);
    out.rows.push_back({seed, rep.dim_ker, rep.dim_coker, rep.index});
    if (rep.index != out.base_index) ++out.violations;
  }
  return out;
}

AdditivityCheck index_additivity(const GradedOperator& a, const GradedOperator& b,
                                 double rank_tol) {
  AdditivityCheck out;
  out.index_a = analyze_fredholm(a, rank_tol).index;
  out.index_b = analyze_fredholm(b, rank_tol).index;
  out.index_composite = analyze_fredholm(compose(a, b), rank_tol).index;
  out.holds = out.index_composite == out.index_a + out.index_b;
  return out;
}

RegularityResult regularity_check(const GradedOperator& a, const GradedVector& u, double fit_tol) {
  RegularityResult out;
  out.decay_in = fit_decay_exponent(u);
  out.decay_out = fit_decay_exponent(apply(a, u));
  if (out.decay_in.status == DecayFit::Status::inconclusive ||
      out.decay_out.status == DecayFit::Status::inconclusive) {
    out.status = RegularityResult::Status::inconclusive;
    return out;
  }
  const double required = out.decay_out.exponent - a.order() - fit_tol;
  const bool ok = std::isinf(out.decay_in.exponent) || out.decay_in.exponent >= required;
  out.status = ok ? RegularityResult::Status::consistent : RegularityResult::Status::inconsistent;
  return out;
}

GradedOperator fredholm_inverse(const GradedOperator& a, double rank_tol) {
  const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(a.matrix(), Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::VectorXd& sigma = svd.singularValues();
  const double cut = rank_tol * (sigma.size() > 0 ? sigma(0) : 0.0);
  Eigen::VectorXcd inv_sigma = Eigen::VectorXcd::Zero(sigma.size());
  for (Eigen::Index i = 0; i < sigma.size(); ++i) {
    if (sigma(i) > cut) inv_sigma(i) = 1.0 / sigma(i);
  }
  Eigen::MatrixXcd pinv = svd.matrixV() * inv_sigma.asDiagonal() * svd.matrixU().adjoint();
  return {std::move(pinv), -a.order(), "pinv(" + a.label() + ")"};
}

Eigen::MatrixXcd projector(const std::vector<GradedVector>& orthonormal, int bandwidth) {
  const int size = 2 * bandwidth + 1;
  Eigen::MatrixXcd p = Eigen::MatrixXcd::Zero(size, size);
  for (const auto& v : orthonormal) p += v.coeffs() * v.coeffs().adjoint();
  return p;
}

}  // namespace nmscale
