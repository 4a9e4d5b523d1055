#include "nmscale/tame_maps.hpp"

#include <algorithm>
#include <memory>

#include "nmscale/io.hpp"
#include "nmscale/random.hpp"

namespace nmscale {

ParamPoint operator+(const ParamPoint& x, const ParamPoint& y) { return {x.b + y.b, x.u + y.u}; }
ParamPoint operator-(const ParamPoint& x, const ParamPoint& y) { return {x.b - y.b, x.u - y.u}; }
ParamPoint operator*(double s, const ParamPoint& x) { return {s * x.b, s * x.u}; }

double norm(const ParamPoint& x, int k) {
  const double un = norm(x.u, k);
  return std::sqrt(x.b * x.b + un * un);
}

namespace {

constexpr double kSampleDecays[] = {0.75, 1.5, 3.0};

double ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  return num / den;
}

bool doubling_stable(double small, double large) { return large <= 2.0 * small || large == 0.0; }

}  // namespace

GradedVector sample_in_domain(const TameMapBundle& f, std::uint64_t seed, double decay,
                              double radius_fraction) {
  GradedVector x = random_vector(seed, f.bandwidth, decay);
  const double radius = std::isfinite(f.domain_radius) ? f.domain_radius : 1.0;
  x *= radius_fraction * radius / norm(x, 0);
  for (int halvings = 0; halvings < 60; ++halvings) {
    if (f.in_domain(x)) return x;
    x *= 0.5;
  }
  throw DomainError(f.name + ": no admissible sample found");
}

TameConstants estimate_tame_constants(const TameMapBundle& f, int levels, int trials,
                                      std::uint64_t seed) {
  if (trials < 16) throw std::invalid_argument("estimate_tame_constants needs trials >= 16");
  const int l = f.loss;
  const int k0 = f.k0;
  const int top = levels + std::max(l, k0);
  NormScale{}.check_level(top);

  const bool with_c = f.has_second_deriv();
  const bool with_d = f.has_inverse();
  const std::size_t count = static_cast<std::size_t>(levels) + 1;
  TameConstants small, large;
  for (TameConstants* t : {&small, &large}) {
    t->a.assign(count, 0.0);
    t->b.assign(count, 0.0);
    if (with_c) t->c.assign(count, 0.0);
    if (with_d) t->d.assign(count, 0.0);
  }

  const GradedVector f0 = f.eval(GradedVector::zero(f.bandwidth));
  for (int i = 0; i < 2 * trials; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(derive_seed(s, 0));
    const double fraction = rng.uniform(0.05, 0.9);
    const GradedVector x = sample_in_domain(f, derive_seed(s, 1), kSampleDecays[i % 3], fraction);
    const GradedVector e = random_vector(derive_seed(s, 2), f.bandwidth, kSampleDecays[(i / 3) % 3]);
    const GradedVector et = random_vector(derive_seed(s, 3), f.bandwidth, kSampleDecays[(i / 9) % 3]);

    const Eigen::VectorXd nx = norms(x, top);
    const Eigen::VectorXd ne = norms(e, top);
    const Eigen::VectorXd net = norms(et, top);
    const Eigen::VectorXd nf = norms(f.eval(x) - f0, levels);
    const Eigen::VectorXd ndf = norms(f.deriv(x, e), levels);
    Eigen::VectorXd nd2, npsi;
    if (with_c) nd2 = norms(f.second_deriv(x, e, et), levels);
    if (with_d) npsi = norms(f.inverse(x, e), levels);

    for (TameConstants* t : {&small, &large}) {
      if (t == &small && i >= trials) continue;
      for (int j = 0; j <= levels; ++j) {
        t->a[j] = std::max(t->a[j], ratio(nf(j), nx(j + l)));
        t->b[j] = std::max(t->b[j], ratio(ndf(j), nx(j + l) * ne(l) + ne(j + l)));
        if (with_c) {
          const double den = nx(j + l) * ne(l) * net(l) + ne(j + l) * net(l) + ne(l) * net(j + l);
          t->c[j] = std::max(t->c[j], ratio(nd2(j), den));
        }
        if (with_d) {
          t->d[j] = std::max(t->d[j], ratio(npsi(j), nx(j + k0) * ne(k0) + ne(j + k0)));
        }
      }
    }
  }

  large.name = f.name;
  large.trials = 2 * trials;
  large.stable.assign(count, true);
  for (std::size_t j = 0; j < count; ++j) {
    bool ok = doubling_stable(small.a[j], large.a[j]) && doubling_stable(small.b[j], large.b[j]);
    if (with_c) ok = ok && doubling_stable(small.c[j], large.c[j]);
    if (with_d) ok = ok && doubling_stable(small.d[j], large.d[j]);
    ok = ok && std::isfinite(large.a[j]) && std::isfinite(large.b[j]);
    large.stable[j] = ok;
  }
  return large;
}

std::string tame_constants_csv(const TameConstants& t) {
  CsvTable table({"name", "j", "a", "b", "c", "d", "stable"});
  for (std::size_t j = 0; j < t.a.size(); ++j) {
    table.add_row({t.name, std::to_string(j), format_double(t.a[j]), format_double(t.b[j]),
                   t.c.empty() ? "" : format_double(t.c[j]), t.d.empty() ? "" : format_double(t.d[j]),
                   t.stable[j] ? "true" : "false"});
  }
  return table.str();
}

InverseResiduals inverse_residuals(const TameMapBundle& f, const GradedVector& x,
                                   const GradedVector& v, const GradedVector& w) {
  if (!f.has_inverse()) throw std::invalid_argument(f.name + " has no family inverse");
  f.require_domain(x, "x");
  InverseResiduals r;
  r.left = ratio(norm(f.inverse(x, f.deriv(x, v)) - v, 0), norm(v, 0));
  r.right = ratio(norm(f.deriv(x, f.inverse(x, w)) - w, 0), norm(w, 0));
  return r;
}

InverseConsistencyReport check_inverse_consistency(const TameMapBundle& f, int trials,
                                                   std::uint64_t seed) {
  InverseConsistencyReport rep;
  rep.trials = trials;
  for (int i = 0; i < trials; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    const double fraction = Rng(derive_seed(s, 0)).uniform(0.05, 0.9);
    const GradedVector x = sample_in_domain(f, derive_seed(s, 1), kSampleDecays[i % 3], fraction);
    const GradedVector v = random_vector(derive_seed(s, 2), f.bandwidth, kSampleDecays[(i + 1) % 3]);
    const GradedVector w = random_vector(derive_seed(s, 3), f.bandwidth, kSampleDecays[(i + 2) % 3]);
    const InverseResiduals r = inverse_residuals(f, x, v, w);
    rep.worst_left = std::max(rep.worst_left, r.left);
    rep.worst_right = std::max(rep.worst_right, r.right);
  }
  rep.pass = rep.worst_left <= kInverseTol && rep.worst_right <= kInverseTol;
  return rep;
}

GradedVector finite_difference_second_derivative(const TameMapBundle& f, const GradedVector& x,
                                                 const GradedVector& v, const GradedVector& vp,
                                                 double h) {
  const GradedVector xp = x + h * vp;
  const GradedVector xm = x - h * vp;
  f.require_domain(xp, "stencil point x + h v'");
  f.require_domain(xm, "stencil point x - h v'");
  GradedVector out = f.deriv(xp, v) - f.deriv(xm, v);
  out *= 1.0 / (2.0 * h);
  return out;
}

double derivative_stencil_error(const TameMapBundle& f, const GradedVector& x,
                                const GradedVector& v, double h) {
  const GradedVector xp = x + h * v;
  const GradedVector xm = x - h * v;
  f.require_domain(xp, "stencil point x + h v");
  f.require_domain(xm, "stencil point x - h v");
  GradedVector fd = f.eval(xp) - f.eval(xm);
  fd *= 1.0 / (2.0 * h);
  return norm(fd - f.deriv(x, v), 0);
}

Eigen::MatrixXcd assemble_derivative(const TameMapBundle& f, const GradedVector& x) {
  const int size = x.size();
  Eigen::MatrixXcd m(size, size);
  for (int i = 0; i < size; ++i) {
    CoeffVector e = CoeffVector::Zero(size);
    e(i) = 1.0;
    m.col(i) = f.deriv(x, GradedVector(std::move(e), false)).coeffs();
  }
  return m;
}

TameMapBundle make_linear_bundle(const Eigen::MatrixXcd& a, std::string name, int loss) {
  const int bandwidth = static_cast<int>((a.rows() - 1) / 2);
  const auto lu = std::make_shared<Eigen::PartialPivLU<Eigen::MatrixXcd>>(a);
  auto mult = [a](const GradedVector& v) {
    return GradedVector(a * v.coeffs(), false);
  };
  TameMapBundle f;
  f.name = std::move(name);
  f.bandwidth = bandwidth;
  f.loss = loss;
  f.eval = mult;
  f.deriv = [mult](const GradedVector&, const GradedVector& v) { return mult(v); };
  f.inverse = [lu](const GradedVector&, const GradedVector& w) {
    return GradedVector(lu->solve(w.coeffs()), false);
  };
  f.second_deriv = [bandwidth](const GradedVector&, const GradedVector&, const GradedVector&) {
    return GradedVector::zero(bandwidth, false);
  };
  return f;
}

}  // namespace nmscale
