#include "nmscale/smoothing.hpp"

#include <algorithm>
#include <cmath>

#include "nmscale/random.hpp"

namespace nmscale {

namespace {

// C^∞ step: 0 for x ≤ 0, 1 for x ≥ 1.
double smooth_step(double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double a = std::exp(-1.0 / x);
  const double b = std::exp(-1.0 / (1.0 - x));
  return a / (a + b);
}

double safe_ratio(double num, double den) {
  if (num == 0.0) return 0.0;
  return num / den;
}

}  // namespace

SmoothingFamily::SmoothingFamily(CutoffKind kind, int p) : kind_(kind), p_(p) {
  if (p < 0) throw std::invalid_argument("smoothing exponent p must be nonnegative");
}

double SmoothingFamily::constant(int m, int n) const {
  if (kind_ == CutoffKind::ramp && n > m) return std::ldexp(1.0, n - m);
  return 1.0;
}

double SmoothingFamily::multiplier(int n, double t) const {
  const double excess = std::log(weight(n)) - t;
  switch (kind_) {
    case CutoffKind::sharp: return excess <= 0.0 ? 1.0 : 0.0;
    case CutoffKind::ramp: return 1.0 - smooth_step(excess / std::log(2.0));
    case CutoffKind::none: return 1.0;
  }
  return 1.0;
}

GradedVector SmoothingFamily::apply(const GradedVector& u, double t) const {
  if (!(t >= 0.0)) throw DomainError("smoothing parameter t must be nonnegative");
  if (kind_ == CutoffKind::none) return u;
  CoeffVector c = u.coeffs();
  const int n_max = u.bandwidth();
  for (int n = -n_max; n <= n_max; ++n) c(n + n_max) *= multiplier(n, t);
  return GradedVector(std::move(c), u.is_real());
}

GradedVector smooth(const GradedVector& u, double t) {
  return SmoothingFamily(CutoffKind::sharp).apply(u, t);
}

std::vector<double> cutoff_thresholds(int bandwidth) {
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(bandwidth) + 1);
  for (int n = 0; n <= bandwidth; ++n) out.push_back(std::log(weight(n)));
  return out;
}

bool near_threshold(double t, int bandwidth, double tol) {
  for (double th : cutoff_thresholds(bandwidth)) {
    if (std::abs(t - th) <= tol) return true;
  }
  return false;
}

std::vector<double> default_t_grid(int bandwidth, int uniform_points) {
  std::vector<double> grid;
  const double t_max = std::log(weight(bandwidth));
  for (int i = 0; i < uniform_points; ++i) {
    grid.push_back(uniform_points == 1 ? 0.0 : t_max * i / (uniform_points - 1));
  }
  for (double th : cutoff_thresholds(bandwidth)) {
    if (th - 1e-6 >= 0.0) grid.push_back(th - 1e-6);
    grid.push_back(th + 1e-6);
  }
  std::sort(grid.begin(), grid.end());
  return grid;
}

double continuity_gap(const SmoothingFamily& family, const GradedVector& u, double t, double dt) {
  return norm(family.apply(u, t + dt) - family.apply(u, t), 0);
}

void to_json(nlohmann::json& j, const SmoothingReport& r) {
  j = nlohmann::json{{"p", r.p},
                     {"levels", r.levels},
                     {"t_count", r.t_count},
                     {"trials", r.trials},
                     {"worst_ratio_ineq1", r.worst_ratio_ineq1},
                     {"worst_ratio_ineq2", r.worst_ratio_ineq2},
                     {"pass", r.pass}};
}

SmoothingReport verify_smoothing_on(const SmoothingFamily& family, int levels,
                                    const std::vector<double>& t_grid,
                                    const std::vector<GradedVector>& samples) {
  SmoothingReport report;
  report.p = family.p();
  report.levels = levels;
  report.t_count = static_cast<int>(t_grid.size());
  report.trials = static_cast<int>(samples.size());
  const int p = family.p();

  for (const auto& u : samples) {
    const Eigen::VectorXd u_norms = norms(u, levels);
    for (double t : t_grid) {
      const GradedVector kept = family.apply(u, t);
      const Eigen::VectorXd kept_norms = norms(kept, levels);
      const Eigen::VectorXd rest_norms = norms(u - kept, levels);
      for (int m = 0; m <= levels; ++m) {
        for (int n = 0; n <= levels; ++n) {
          const double c = family.constant(m, n);
          const double bound1 = c * (1.0 + std::exp((p + n - m) * t)) * u_norms(m);
          report.worst_ratio_ineq1 =
              std::max(report.worst_ratio_ineq1, safe_ratio(kept_norms(n), bound1));
          if (m - n >= p) {
            const double bound2 = c * std::exp((p - (m - n)) * t) * u_norms(m);
            report.worst_ratio_ineq2 =
                std::max(report.worst_ratio_ineq2, safe_ratio(rest_norms(n), bound2));
          }
        }
      }
    }
  }
  const double limit = 1.0 + kSmoothingSlack;
  report.pass = report.worst_ratio_ineq1 <= limit && report.worst_ratio_ineq2 <= limit;
  return report;
}

SmoothingReport verify_smoothing_family(const SmoothingFamily& family, int levels,
                                        const std::vector<double>& t_grid, int trials,
                                        std::uint64_t seed, int bandwidth) {
  static constexpr double kDecays[] = {0.0, 1.0, 2.0, 3.0};
  std::vector<GradedVector> samples;
  samples.reserve(static_cast<std::size_t>(trials));
  for (int i = 0; i < trials; ++i) {
    samples.push_back(random_vector(derive_seed(seed, static_cast<std::uint64_t>(i)), bandwidth,
                                    kDecays[i % 4]));
  }
  return verify_smoothing_on(family, levels, t_grid, samples);
}

}  // namespace nmscale
