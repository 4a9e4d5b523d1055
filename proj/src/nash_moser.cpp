#include "nmscale/nash_moser.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "nmscale/io.hpp"
#include "nmscale/operators.hpp"
#include "nmscale/random.hpp"

namespace nmscale {

namespace {

constexpr double kSampleDecays[] = {0.75, 1.5, 3.0};
constexpr double kEps = std::numeric_limits<double>::epsilon();

double ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  return num / den;
}

}  // namespace

void SolverConfig::validate() const {
  if (p < 0) throw std::invalid_argument("p must be nonnegative");
  if (k0 < 0) throw std::invalid_argument("k0 must be nonnegative");
  if (!(base > 1.0 && base <= 2.0)) throw std::invalid_argument("schedule base must lie in (1, 2]");
  if (max_iter < 0) throw std::invalid_argument("max_iter must be nonnegative");
  if (!(tol > 0.0)) throw std::invalid_argument("tol must be positive");
  if (!(guard >= 0.0)) throw std::invalid_argument("guard must be nonnegative");
  if (levels < 0 || levels > kDefaultMaxLevel) {
    throw std::invalid_argument("levels must lie in [0, " + std::to_string(kDefaultMaxLevel) + "]");
  }
  if (std::isnan(mu)) throw std::invalid_argument("mu must be a number");
}

CutoffKind cutoff_from_string(const std::string& s) {
  if (s == "sharp") return CutoffKind::sharp;
  if (s == "ramp") return CutoffKind::ramp;
  if (s == "none") return CutoffKind::none;
  throw std::invalid_argument("unknown smoothing kind '" + s + "'");
}

std::string to_string(CutoffKind kind) {
  switch (kind) {
    case CutoffKind::sharp: return "sharp";
    case CutoffKind::ramp: return "ramp";
    case CutoffKind::none: return "none";
  }
  return "unknown";
}

std::string to_string(SolveStatus s) {
  switch (s) {
    case SolveStatus::converged: return "converged";
    case SolveStatus::max_iter: return "max_iter";
    case SolveStatus::diverged: return "diverged";
    case SolveStatus::domain_exit: return "domain_exit";
  }
  return "unknown";
}

void to_json(nlohmann::json& j, const SolverConfig& c) {
  j = nlohmann::json{{"p", c.p},
                     {"k0", c.k0},
                     {"mu", c.effective_mu()},
                     {"base", c.base},
                     {"max_iter", c.max_iter},
                     {"tol", c.tol},
                     {"guard", json_number(c.guard)},
                     {"levels", c.levels},
                     {"smoothing", to_string(c.smoothing)}};
}

void from_json(const nlohmann::json& j, SolverConfig& c) {
  if (j.contains("p")) c.p = j.at("p").get<int>();
  if (j.contains("k0")) c.k0 = j.at("k0").get<int>();
  if (j.contains("mu")) c.mu = j.at("mu").get<double>();
  if (j.contains("base")) c.base = j.at("base").get<double>();
  if (j.contains("max_iter")) c.max_iter = j.at("max_iter").get<int>();
  if (j.contains("tol")) c.tol = j.at("tol").get<double>();
  if (j.contains("guard")) c.guard = j.at("guard").get<double>();
  if (j.contains("levels")) c.levels = j.at("levels").get<int>();
  if (j.contains("smoothing")) c.smoothing = cutoff_from_string(j.at("smoothing").get<std::string>());
}

SolveResult solve(const TameMapBundle& f, const GradedVector& y, const SolverConfig& cfg) {
  return solve(f, y, cfg, GradedVector::zero(y.bandwidth()));
}

SolveResult solve(const TameMapBundle& f, const GradedVector& y, const SolverConfig& cfg,
                  const GradedVector& base_point) {
  cfg.validate();
  if (base_point.bandwidth() != y.bandwidth()) throw BandwidthMismatch("base point bandwidth");
  const SmoothingFamily smoothing(cfg.smoothing, cfg.p);
  const int levels = cfg.levels;

  SolveResult out;
  SolverTrace& trace = out.trace;
  trace.smoothing = cfg.smoothing;
  trace.base = cfg.base;
  trace.base_point = base_point;
  trace.y = y;
  trace.y_norms = norms(y, levels);
  const double y0 = trace.y_norms(0);

  const GradedVector f_base = f.eval(base_point);
  GradedVector xi = GradedVector::zero(y.bandwidth(), y.is_real() && base_point.is_real());

  for (int r = 0;; ++r) {
    TraceRow row;
    row.r = r;
    row.t = std::pow(cfg.base, r);
    const GradedVector point = base_point + xi;
    const GradedVector z = y - (f.eval(point) - f_base);
    row.x_norms = norms(xi, levels);
    row.z_norms = norms(z, levels);
    trace.xs.push_back(xi);
    trace.zs.push_back(z);
    trace.stop_iteration = r;

    auto stop = [&](SolveStatus s, std::string msg) {
      trace.rows.push_back(std::move(row));
      trace.status = s;
      trace.message = std::move(msg);
    };

    if (row.z_norms(0) <= cfg.tol) {
      stop(SolveStatus::converged, "residual below tol");
      break;
    }
    if (!(row.x_norms(0) < cfg.guard)) {
      stop(SolveStatus::diverged, "iterate norm reached guard at r = " + std::to_string(r));
      break;
    }
    if (row.z_norms(0) > 1e3 * y0 || !std::isfinite(row.z_norms(0))) {
      stop(SolveStatus::diverged, "residual exceeded 1e3 ||y||_0 at r = " + std::to_string(r));
      break;
    }
    if (r >= cfg.max_iter) {
      stop(SolveStatus::max_iter, "max_iter reached");
      break;
    }

    GradedVector dx;
    try {
      f.require_domain(point, "iterate");
      dx = smoothing.apply(f.inverse(point, z), row.t);
    } catch (const DomainError& e) {
      stop(SolveStatus::domain_exit, "domain exit at r = " + std::to_string(r) + ": " + e.what());
      break;
    }
    row.dx_norms = norms(dx, levels);
    trace.dxs.push_back(dx);
    trace.rows.push_back(std::move(row));
    xi += dx;
  }
  out.x = base_point + trace.xs.back();
  return out;
}

SolveResult plain_newton(const TameMapBundle& f, const GradedVector& y, const SolverConfig& cfg) {
  SolverConfig plain = cfg;
  plain.smoothing = CutoffKind::none;
  return solve(f, y, plain);
}

std::string trace_csv(const SolverTrace& trace, int levels) {
  std::vector<std::string> header = {"r", "t_r"};
  for (const char* prefix : {"x_norm_", "z_norm_", "dx_norm_"}) {
    for (int j = 0; j <= levels; ++j) header.push_back(prefix + std::to_string(j));
  }
  CsvTable table(header);
  for (const auto& row : trace.rows) {
    std::vector<std::string> fields = {std::to_string(row.r), format_double(row.t)};
    for (const Eigen::VectorXd* v : {&row.x_norms, &row.z_norms, &row.dx_norms}) {
      for (int j = 0; j <= levels; ++j) {
        fields.push_back(j < v->size() ? format_double((*v)(j)) : std::string());
      }
    }
    table.add_row(std::move(fields));
  }
  return table.str();
}

nlohmann::json trace_metadata(const SolverTrace& trace, const SolverConfig& cfg,
                              const std::string& bundle_name) {
  const double final_residual = trace.rows.empty() ? 0.0 : trace.rows.back().z_norms(0);
  return nlohmann::json{{"bundle", bundle_name},
                        {"config", cfg},
                        {"rho", cfg.rho()},
                        {"mu", cfg.effective_mu()},
                        {"reference_rate", -cfg.effective_mu() / 4.0},
                        {"status", to_string(trace.status)},
                        {"message", trace.message},
                        {"steps", static_cast<int>(trace.dxs.size())},
                        {"rows", static_cast<int>(trace.rows.size())},
                        {"final_residual_0", final_residual}};
}

DecayRateFit fit_decay(const SolverTrace& trace, int level) {
  DecayRateFit fit;
  const double floor =
      level < trace.y_norms.size() ? 100.0 * kEps * trace.y_norms(level) : 0.0;
  std::vector<double> ts, ls;
  for (const auto& row : trace.rows) {
    if (level >= row.z_norms.size()) continue;
    const double z = row.z_norms(level);
    if (!(z > floor) || !std::isfinite(z)) continue;
    ts.push_back(row.t);
    ls.push_back(std::log(z));
  }
  fit.rows_used = static_cast<int>(ts.size());
  if (ts.size() < 3) return fit;
  const double m = static_cast<double>(ts.size());
  double mt = 0.0, ml = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    mt += ts[i] / m;
    ml += ls[i] / m;
  }
  double stt = 0.0, stl = 0.0, sll = 0.0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    stt += (ts[i] - mt) * (ts[i] - mt);
    stl += (ts[i] - mt) * (ls[i] - ml);
    sll += (ls[i] - ml) * (ls[i] - ml);
  }
  fit.status = DecayRateFit::Status::fitted;
  fit.slope = stl / stt;
  fit.intercept = ml - fit.slope * mt;
  fit.r2 = sll > 0.0 ? (stl * stl) / (stt * sll) : 1.0;
  return fit;
}

SuperlinearityCheck superlinearity_check(const SolverTrace& trace, double exponent, double lo,
                                         double hi) {
  SuperlinearityCheck out;
  for (std::size_t i = 0; i + 1 < trace.rows.size(); ++i) {
    const double z = trace.rows[i].z_norms(0);
    if (z < lo || z > hi) continue;
    ++out.pairs;
    if (trace.rows[i + 1].z_norms(0) > std::pow(z, exponent)) ++out.violations;
  }
  out.pass = out.pairs > 0 && out.violations == 0;
  return out;
}

RecursionReport residual_recursion_check(const TameMapBundle& f, const SolverTrace& trace) {
  const SmoothingFamily smoothing(trace.smoothing);
  auto second = [&](const GradedVector& x, const GradedVector& v) {
    if (f.has_second_deriv()) return f.second_deriv(x, v, v);
    return finite_difference_second_derivative(f, x, v, v, 1e-5);
  };
  auto taylor_term = [&](const GradedVector& x, const GradedVector& dx, int points) {
    GradedVector acc = GradedVector::zero(dx.bandwidth(), dx.is_real() && x.is_real());
    for (int i = 0; i < points; ++i) {
      const double t = (i + 0.5) / points;
      acc += ((1.0 - t) / points) * second(x + t * dx, dx);
    }
    return acc;
  };

  RecursionReport rep;
  const std::size_t steps = std::min(trace.dxs.size(), trace.zs.size() - 1);
  for (std::size_t r = 0; r < steps; ++r) {
    RecursionRow row;
    row.r = static_cast<int>(r);
    const GradedVector x = trace.base_point + trace.xs[r];
    const GradedVector& z = trace.zs[r];
    const GradedVector& dx = trace.dxs[r];
    const double scale = norm(z, 0);
    const GradedVector w = f.inverse(x, z);
    const GradedVector rest = w - smoothing.apply(w, trace.rows[r].t);
    const GradedVector q16 = taylor_term(x, dx, 16);
    const GradedVector q32 = taylor_term(x, dx, 32);
    const GradedVector rhs = f.deriv(x, rest) - q16;
    row.mismatch = ratio(norm(trace.zs[r + 1] - rhs, 0), scale);
    row.quadrature_change = ratio(norm(q16 - q32, 0), scale);
    row.breakdown = !std::isfinite(row.mismatch) || !std::isfinite(row.quadrature_change);
    rep.worst = std::max(rep.worst, row.breakdown ? std::numeric_limits<double>::infinity()
                                                  : row.mismatch);
    rep.rows.push_back(row);
  }
  rep.pass = !rep.rows.empty() && rep.worst <= kRecursionTol;
  return rep;
}

InjectivityEstimate injectivity_probe(const TameMapBundle& f, int levels, int pairs,
                                      std::uint64_t seed) {
  if (pairs < 32) throw std::invalid_argument("injectivity_probe needs pairs >= 32");
  const int k0 = f.k0;
  const int top = levels + k0;
  NormScale{}.check_level(top);
  InjectivityEstimate est;
  est.pairs = pairs;
  est.c_small.assign(static_cast<std::size_t>(levels) + 1, 0.0);
  est.c_large.assign(static_cast<std::size_t>(levels) + 1, 0.0);

  for (int i = 0; i < 2 * pairs; ++i) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(i));
    Rng rng(derive_seed(s, 0));
    const GradedVector x =
        sample_in_domain(f, derive_seed(s, 1), kSampleDecays[i % 3], rng.uniform(0.05, 0.9));
    GradedVector y;
    if (i % 2 == 0) {
      y = sample_in_domain(f, derive_seed(s, 2), kSampleDecays[(i / 3) % 3], rng.uniform(0.05, 0.9));
    } else {
      // Nearby pair: y = x + small perturbation, shrunk until admissible.
      GradedVector e = random_vector(derive_seed(s, 2), f.bandwidth, kSampleDecays[(i / 3) % 3]);
      e *= rng.uniform(1e-3, 1e-1) * norm(x, 0) / norm(e, 0);
      y = x + e;
      for (int h = 0; h < 60 && !f.in_domain(y); ++h) {
        e *= 0.5;
        y = x + e;
      }
      if (!f.in_domain(y)) y = x;
    }
    const Eigen::VectorXd nx = norms(x, top);
    const Eigen::VectorXd ny = norms(y, top);
    const Eigen::VectorXd nd = norms(y - x, levels);
    const Eigen::VectorXd nf = norms(f.eval(y) - f.eval(x), top);
    for (int j = 0; j <= levels; ++j) {
      const double c = ratio(nd(j), (nx(j + k0) + ny(j + k0)) * nf(k0) + nf(j + k0));
      if (i < pairs) est.c_small[j] = std::max(est.c_small[j], c);
      est.c_large[j] = std::max(est.c_large[j], c);
    }
  }
  est.stable.resize(est.c_small.size());
  for (std::size_t j = 0; j < est.c_small.size(); ++j) {
    est.stable[j] = std::isfinite(est.c_large[j]) &&
                    (est.c_large[j] <= 2.0 * est.c_small[j] || est.c_large[j] == 0.0);
  }
  return est;
}

std::string injectivity_csv(const InjectivityEstimate& e) {
  CsvTable t({"j", "c_half", "c_full", "pairs_half", "pairs_full", "stable"});
  for (std::size_t j = 0; j < e.c_small.size(); ++j) {
    t.add_row({std::to_string(j), format_double(e.c_small[j]), format_double(e.c_large[j]),
               std::to_string(e.pairs), std::to_string(2 * e.pairs), e.stable[j] ? "true" : "false"});
  }
  return t.str();
}

FiniteDimReduction::FiniteDimReduction(TameMapBundle f, GradedVector x0, double rank_tol,
                                       double inner_tol)
    : f_(std::move(f)), x0_(std::move(x0)), inner_tol_(inner_tol) {
  f_.require_domain(x0_, "reduction base point");
  f_x0_ = f_.eval(x0_);
  d_ = assemble_derivative(f_, x0_);
  const GradedOperator d_op(d_, 0, "Df(x0)");
  const FredholmReport rep = analyze_fredholm(d_op, rank_tol);
  kernel_ = rep.kernel_basis;
  cokernel_ = rep.cokernel_basis;
  d_pinv_ = fredholm_inverse(d_op, rank_tol).matrix();
  p_ker_ = projector(kernel_, x0_.bandwidth());
  p_coker_ = projector(cokernel_, x0_.bandwidth());

  const TameMapBundle fc = f_;
  const GradedVector x0c = x0_;
  const GradedVector fx0 = f_x0_;
  const Eigen::MatrixXcd pinv = d_pinv_;
  const Eigen::MatrixXcd pker = p_ker_;
  psi_bundle_.name = "psi[" + f_.name + "]";
  psi_bundle_.bandwidth = f_.bandwidth;
  psi_bundle_.domain_radius = std::numeric_limits<double>::infinity();
  psi_bundle_.domain_check = [fc](const GradedVector& x) { fc.require_domain(x, "ψ argument"); };
  psi_bundle_.eval = [fc, x0c, fx0, pinv, pker](const GradedVector& x) {
    const bool real = x.is_real() && x0c.is_real();
    const GradedVector dx = x - x0c;
    return x0c + GradedVector(pker * dx.coeffs() + pinv * (fc.eval(x) - fx0).coeffs(), real);
  };
  psi_bundle_.deriv = [fc, pinv, pker](const GradedVector& x, const GradedVector& v) {
    return GradedVector(pker * v.coeffs() + pinv * fc.deriv(x, v).coeffs(),
                        x.is_real() && v.is_real());
  };
  psi_bundle_.inverse = [fc, pinv, pker](const GradedVector& x, const GradedVector& w) {
    const Eigen::MatrixXcd m = pker + pinv * assemble_derivative(fc, x);
    return GradedVector(Eigen::PartialPivLU<Eigen::MatrixXcd>(m).solve(w.coeffs()),
                        x.is_real() && w.is_real());
  };
}

GradedVector FiniteDimReduction::psi(const GradedVector& x) const { return psi_bundle_.eval(x); }

GradedVector FiniteDimReduction::g(const GradedVector& xi) const {
  SolverConfig cfg;
  cfg.smoothing = CutoffKind::none;
  cfg.tol = inner_tol_;
  cfg.max_iter = 40;
  cfg.guard = std::numeric_limits<double>::infinity();
  cfg.levels = 0;
  const SolveResult res = solve(psi_bundle_, xi - x0_, cfg, x0_);
  if (res.trace.status != SolveStatus::converged) {
    throw std::runtime_error("local inversion of ψ failed: " + to_string(res.trace.status) + " (" +
                             res.trace.message + ")");
  }
  return res.x;
}

GradedVector FiniteDimReduction::k(const GradedVector& xi) const {
  const GradedVector dxi = xi - x0_;
  return f_.eval(g(xi)) - f_x0_ - GradedVector(d_ * dxi.coeffs(), dxi.is_real());
}

double FiniteDimReduction::off_c(const GradedVector& v) const {
  return graded_norm(v.coeffs() - p_coker_ * v.coeffs(), 0);
}

ReductionReport finite_dim_reduction(const TameMapBundle& f, const GradedVector& x0,
                                     const ReductionConfig& cfg) {
  const FiniteDimReduction red(f, x0, cfg.rank_tol, cfg.inner_tol);
  ReductionReport rep;
  rep.kernel_basis = red.kernel_basis();
  rep.cokernel_basis = red.cokernel_basis();
  rep.dim_ker = static_cast<int>(rep.kernel_basis.size());
  rep.dim_coker = static_cast<int>(rep.cokernel_basis.size());

  for (int i = 0; i < cfg.samples; ++i) {
    const std::uint64_t s = derive_seed(cfg.seed, static_cast<std::uint64_t>(i));
    GradedVector e = random_vector(derive_seed(s, 0), x0.bandwidth(), 3.0);
    e *= cfg.sample_radius * Rng(derive_seed(s, 1)).uniform(0.2, 1.0) / norm(e, 0);
    const GradedVector kv = red.k(x0 + e);
    rep.off_c.push_back(red.off_c(kv));
    rep.k_norms.push_back(norm(kv, 0));
    rep.max_off_c = std::max(rep.max_off_c, rep.off_c.back());
  }

  rep.k_at_x0 = norm(red.k(x0), 0);
  for (int i = 0; i < cfg.stencil_directions; ++i) {
    GradedVector e = random_vector(derive_seed(cfg.seed ^ 0x5157ULL, static_cast<std::uint64_t>(i)),
                                   x0.bandwidth(), 2.0);
    e *= 1.0 / norm(e, 0);
    GradedVector dk = red.k(x0 + cfg.stencil_h * e) - red.k(x0 - cfg.stencil_h * e);
    dk *= 1.0 / (2.0 * cfg.stencil_h);
    rep.dk_stencil = std::max(rep.dk_stencil, norm(dk, 0));
  }
  rep.pass = rep.max_off_c <= kOffCTol && rep.k_at_x0 <= kKAtX0Tol && rep.dk_stencil <= kDkTol;
  return rep;
}

}  // namespace nmscale
