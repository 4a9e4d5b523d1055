#include "nmscale/problems.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>

#include "nmscale/io.hpp"
#include "nmscale/random.hpp"

namespace nmscale {

namespace {

double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / x);
  const double b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

double window(double s) {
  return smooth_step((s - 0.05) / 0.15) * smooth_step((0.95 - s) / 0.15);
}

void check_burgers_domain(double epsilon, const GradedVector& u) {
  if (epsilon == 0.0) return;
  const int grid = next_fast_size(3 * u.bandwidth() + 1);
  const Eigen::VectorXd du = synthesize(differentiate(u), grid);
  const double worst = (1.0 + epsilon * du.array()).minCoeff();
  if (!(worst >= 0.5)) {
    throw DomainError("near-singular coefficient: min(1 + εu′) = " + format_double(worst) +
                      " < 1/2");
  }
}

GradedVector burgers_eval(double epsilon, const GradedVector& u) {
  return u + epsilon * pointwise_product(u, differentiate(u));
}

GradedVector burgers_deriv(double epsilon, const GradedVector& u, const GradedVector& v) {
  return v + epsilon * differentiate(pointwise_product(u, v));
}

GradedVector burgers_second(double epsilon, const GradedVector& v, const GradedVector& w) {
  return epsilon * differentiate(pointwise_product(v, w));
}

GradedVector rotate(const GradedVector& u, double b) { return compose_with_rotation(u, b); }

GradedVector unit_at_level(GradedVector u, int level) {
  u *= 1.0 / norm(u, level);
  return u;
}

int next_pow2(int n) {
  int p = 1;
  while (p < n) p *= 2;
  return p;
}

}  // namespace

Eigen::MatrixXcd burgers_derivative_matrix(double epsilon, const GradedVector& u) {
  Eigen::MatrixXcd m = GradedOperator::multiplication(u).matrix();
  const int n_max = u.bandwidth();
  for (int n = -n_max; n <= n_max; ++n) m.row(n + n_max) *= Complex(0.0, epsilon * n);
  m += Eigen::MatrixXcd::Identity(m.rows(), m.cols());
  return m;
}

TameMapBundle make_burgers_map(double epsilon, int bandwidth, double domain_radius) {
  TameMapBundle f;
  f.name = "burgers(eps=" + format_double(epsilon) + ")";
  f.bandwidth = bandwidth;
  f.domain_radius = domain_radius;
  f.k0 = 1;
  f.loss = 1;
  f.eval = [epsilon](const GradedVector& u) { return burgers_eval(epsilon, u); };
  f.deriv = [epsilon](const GradedVector& u, const GradedVector& v) {
    return burgers_deriv(epsilon, u, v);
  };
  f.second_deriv = [epsilon](const GradedVector&, const GradedVector& v, const GradedVector& w) {
    return burgers_second(epsilon, v, w);
  };
  f.inverse = [epsilon](const GradedVector& u, const GradedVector& w) {
    check_burgers_domain(epsilon, u);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(burgers_derivative_matrix(epsilon, u));
    return GradedVector(lu.solve(w.coeffs()), u.is_real() && w.is_real());
  };
  f.domain_check = [epsilon](const GradedVector& u) { check_burgers_domain(epsilon, u); };
  return f;
}

TameMapBundle make_perturbed_burgers_map(double epsilon, int bandwidth, const GradedOperator& k,
                                         double domain_radius) {
  if (k.bandwidth() != bandwidth) throw BandwidthMismatch("perturbation bandwidth mismatch");
  TameMapBundle f = make_burgers_map(epsilon, bandwidth, domain_radius);
  f.name = "burgers+K(eps=" + format_double(epsilon) + ")";
  f.eval = [epsilon, k](const GradedVector& u) { return burgers_eval(epsilon, u) + apply(k, u); };
  f.deriv = [epsilon, k](const GradedVector& u, const GradedVector& v) {
    return burgers_deriv(epsilon, u, v) + apply(k, v);
  };
  f.inverse = [epsilon, k](const GradedVector& u, const GradedVector& w) {
    check_burgers_domain(epsilon, u);
    const Eigen::PartialPivLU<Eigen::MatrixXcd> lu(burgers_derivative_matrix(epsilon, u) +
                                                    k.matrix());
    return GradedVector(lu.solve(w.coeffs()), u.is_real() && w.is_real() && k.real_preserving());
  };
  return f;
}

GradedVector scaled_random_vector(std::uint64_t seed, int bandwidth, double decay,
                                  double level0_norm) {
  GradedVector v = random_vector(seed, bandwidth, decay);
  const double n0 = norm(v, 0);
  if (n0 > 0.0) v *= level0_norm / n0;
  return v;
}

RankOneFixture make_rank_one_burgers_fixture(double epsilon, int bandwidth, std::uint64_t seed,
                                             double x0_norm, double decay) {
  RankOneFixture fx;
  fx.x0 = scaled_random_vector(derive_seed(seed, 0), bandwidth, decay, x0_norm);
  fx.kernel_dir = scaled_random_vector(derive_seed(seed, 1), bandwidth, decay, 1.0);
  fx.functional = scaled_random_vector(derive_seed(seed, 2), bandwidth, decay, 1.0);
  const GradedOperator d(burgers_derivative_matrix(epsilon, fx.x0), 1, "Df(x0)");
  const StronglySmoothingOperator k = kernel_forcing_perturbation(d, fx.kernel_dir, fx.functional);
  fx.f = make_perturbed_burgers_map(epsilon, bandwidth, k.op);
  return fx;
}

GradedOperator make_elliptic_operator(const GradedVector& v) {
  const GradedOperator lap = scaled(GradedOperator::derivative(v.bandwidth(), 2), -1.0);
  const GradedOperator a = add(lap, GradedOperator::multiplication(v));
  return a.relabeled("-d2+V");
}

GradedOperator catalog_operator(const std::string& name, int bandwidth) {
  if (name == "ddtheta") return GradedOperator::derivative(bandwidth, 1);
  if (name == "laplace_minus_one") {
    return make_elliptic_operator(GradedVector::constant(bandwidth, -1.0)).relabeled("-d2-1");
  }
  if (name == "laplace_plus_one") {
    return make_elliptic_operator(GradedVector::constant(bandwidth, 1.0)).relabeled("-d2+1");
  }
  throw std::invalid_argument("unknown catalog operator '" + name + "'");
}

std::vector<std::string> catalog_operator_names() {
  return {"ddtheta", "laplace_minus_one", "laplace_plus_one"};
}

MapBundle<ParamPoint> make_rotation_action() {
  MapBundle<ParamPoint> f;
  f.name = "rotation_action";
  f.loss = 1;
  f.eval = [](const ParamPoint& x) { return rotate(x.u, x.b); };
  f.deriv = [](const ParamPoint& x, const ParamPoint& d) {
    return d.b * rotate(differentiate(x.u), x.b) + rotate(d.u, x.b);
  };
  f.second_deriv = [](const ParamPoint& x, const ParamPoint& d1, const ParamPoint& d2) {
    const GradedVector du = differentiate(x.u);
    return (d1.b * d2.b) * rotate(differentiate(du), x.b) +
           d1.b * rotate(differentiate(d2.u), x.b) + d2.b * rotate(differentiate(d1.u), x.b);
  };
  return f;
}

double plateau_bump(double s, int n) {
  const double x = 2.0 * n * std::abs(s - 0.5);
  return std::sqrt(static_cast<double>(n)) * (1.0 - smooth_step(2.0 * x - 1.0));
}

bool bump_resolvable(int n, int bandwidth) {
  return n >= 1 && static_cast<double>(2 * bandwidth + 1) / n >= 4.0;
}

GradedVector bump_vector(int k, int n, int bandwidth) {
  if (k < 0 || n < 1) throw std::invalid_argument("bump needs k >= 0 and n >= 1");
  const int grid = next_fast_size(4 * (2 * bandwidth + 1));
  const double h = 1.0 / grid;
  Eigen::VectorXd f(grid);
  for (int j = 0; j < grid; ++j) f(j) = plateau_bump(j * h, n);
  for (int i = 0; i < k; ++i) {
    Eigen::VectorXd g(grid);
    g(0) = 0.0;
    for (int j = 1; j < grid; ++j) g(j) = g(j - 1) + 0.5 * h * (f(j - 1) + f(j));
    f = std::move(g);
  }
  for (int j = 0; j < grid; ++j) f(j) *= window(j * h);
  return analyze(f, bandwidth);
}

ContinuityReport uniform_continuity_failure_experiment(int level, double shift, int bandwidth,
                                                       int n_min, int n_max) {
  if (shift < 0.0) throw std::invalid_argument("shift must be nonnegative");
  ContinuityReport rep;
  rep.level = level;
  rep.shift = shift;
  rep.bandwidth = bandwidth;
  rep.parameter_offset = shift;
  rep.u_offset = 0.0;
  rep.n_threshold = shift > 0.0
                        ? static_cast<int>(std::ceil(2.0 * std::numbers::pi / shift - 1e-9))
                        : std::numeric_limits<int>::max();
  rep.min_distance_beyond = std::numeric_limits<double>::infinity();
  for (int n = n_min; n <= n_max; ++n) {
    ContinuityRow row;
    row.n = n;
    row.resolved = bump_resolvable(n, bandwidth);
    if (row.resolved) {
      const GradedVector raw = bump_vector(level, n, bandwidth);
      row.level0_norm = norm(raw, 0);
      const GradedVector u = unit_at_level(raw, level);
      const GradedVector moved = rotate(u, shift);
      row.distance = norm(moved - u, level);
      const double n0 = norm(u, 0);
      row.overlap = norm(pointwise_product(moved, u), 0) / (n0 * n0);
      if (n >= rep.n_threshold) {
        rep.min_distance_beyond = std::min(rep.min_distance_beyond, row.distance);
        rep.max_overlap_beyond = std::max(rep.max_overlap_beyond, row.overlap);
      }
    }
    rep.rows.push_back(row);
  }
  return rep;
}

std::string continuity_csv(const ContinuityReport& r) {
  CsvTable t({"n", "resolved", "distance", "overlap", "level0_norm"});
  for (const auto& row : r.rows) {
    t.add_row({std::to_string(row.n), row.resolved ? "true" : "false",
               row.resolved ? format_double(row.distance) : "",
               row.resolved ? format_double(row.overlap) : "",
               row.resolved ? format_double(row.level0_norm) : ""});
  }
  return t.str();
}

std::vector<double> default_loss_ts() {
  std::vector<double> ts;
  for (int i = 0; i <= 6; ++i) ts.push_back(std::pow(10.0, -4.0 + 0.5 * i));
  return ts;
}

double loglog_slope(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 2) throw std::invalid_argument("need >= 2 points");
  double mx = 0.0, my = 0.0;
  const double m = static_cast<double>(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += std::log(x[i]) / m;
    my += std::log(y[i]) / m;
  }
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = std::log(x[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(y[i]) - my);
  }
  return sxy / sxx;
}

DerivativeLossReport derivative_loss_probe(int level, const std::vector<double>& ts,
                                           std::uint64_t seed) {
  DerivativeLossReport rep;
  rep.level = level;
  rep.ts = ts;
  const auto action = make_rotation_action();
  const GradedVector base = random_vector(derive_seed(seed, 0), 64, level + 3.0);

  const int ns = kLossSmoothBandwidth;
  const GradedVector vs = unit_at_level(random_vector(derive_seed(seed, 1), ns, level + 1.75), level);
  rep.smooth_remainder =
      probe_differentiability(action, ParamPoint{0.0, resize(base, ns)}, ParamPoint{1.0, vs}, level, ts);
  rep.smooth_slope = loglog_slope(ts, rep.smooth_remainder);

  rep.rough_min = std::numeric_limits<double>::infinity();
  for (double t : ts) {
    const int n0 = static_cast<int>(std::ceil(2.0 * std::numbers::pi / t - 1e-9));
    const int nt = std::min(std::max(64, next_pow2(2 * n0)), kLossMaxBandwidth);
    const ParamPoint x{0.0, resize(base, nt)};
    const GradedVector rough =
        unit_at_level(random_vector(derive_seed(seed, 2), nt, level + 0.75), level);
    double sup = probe_differentiability(action, x, ParamPoint{1.0, rough}, level, {t}).front();
    if (bump_resolvable(n0, nt)) {
      const GradedVector bump = unit_at_level(bump_vector(level, n0, nt), level);
      sup = std::max(sup, probe_differentiability(action, x, ParamPoint{1.0, bump}, level, {t}).front());
      rep.rough_bump_n.push_back(n0);
    } else {
      rep.rough_bump_n.push_back(0);
    }
    rep.rough_bandwidth.push_back(nt);
    rep.rough_remainder.push_back(sup);
    rep.rough_min = std::min(rep.rough_min, sup);
  }
  return rep;
}

std::string derivative_loss_csv(const DerivativeLossReport& r) {
  CsvTable t({"t", "smooth_remainder", "rough_remainder", "rough_bandwidth", "rough_bump_n"});
  for (std::size_t i = 0; i < r.ts.size(); ++i) {
    t.add_row({format_double(r.ts[i]), format_double(r.smooth_remainder[i]),
               format_double(r.rough_remainder[i]), std::to_string(r.rough_bandwidth[i]),
               std::to_string(r.rough_bump_n[i])});
  }
  return t.str();
}

}  // namespace nmscale
