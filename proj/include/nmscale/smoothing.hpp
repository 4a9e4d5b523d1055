#pragma once

#include <cstdint>
#include <vector>

#include "json.hpp"
#include "nmscale/graded_space.hpp"

namespace nmscale {

enum class CutoffKind {
  sharp,  ///< keep mode n iff w(n) ≤ e^t; certified with p = 0, C = 1
  ramp,   ///< smooth multiplier, 1 for w(n) ≤ e^t, 0 for w(n) ≥ 2e^t
  none,   ///< S_t = id; only as the plain-Newton comparator, not a smoothing family
};

/// One-parameter family S_t acting diagonally on coefficients, with the
/// constants p and C(m, n) it is certified against:
///   ‖S_t u‖_n        ≤ C(m,n) (1 + e^{(p + n − m) t}) ‖u‖_m
///   ‖(1 − S_t) u‖_n  ≤ C(m,n) e^{(p − (m − n)) t} ‖u‖_m      for m − n ≥ p.
class SmoothingFamily {
 public:
  explicit SmoothingFamily(CutoffKind kind = CutoffKind::sharp, int p = 0);

  CutoffKind kind() const { return kind_; }
  int p() const { return p_; }

  /// Declared C(m, n): 1 for the sharp cutoff, max(1, 2^{n−m}) for the ramp.
  double constant(int m, int n) const;

  /// Multiplier applied to mode n at parameter t.
  double multiplier(int n, double t) const;

  GradedVector apply(const GradedVector& u, double t) const;

 private:
  CutoffKind kind_;
  int p_;
};

/// S_t u with the sharp cutoff. Throws DomainError for t < 0.
GradedVector smooth(const GradedVector& u, double t);

/// Cutoff thresholds ln w(n), n = 0..N, where the sharp family jumps.
std::vector<double> cutoff_thresholds(int bandwidth);

bool near_threshold(double t, int bandwidth, double tol);

/// 64 points uniform on [0, ln w(N)] plus every threshold ± 1e−6 (nonnegative ones), sorted.
std::vector<double> default_t_grid(int bandwidth, int uniform_points = 64);

/// ‖S_{t+dt} u − S_t u‖_0.
double continuity_gap(const SmoothingFamily& family, const GradedVector& u, double t, double dt);

struct SmoothingReport {
  int p = 0;
  int levels = 0;
  int t_count = 0;
  int trials = 0;
  double worst_ratio_ineq1 = 0.0;  // normalized by C(m, n)
  double worst_ratio_ineq2 = 0.0;
  bool pass = true;
};

void to_json(nlohmann::json& j, const SmoothingReport& r);

inline constexpr double kSmoothingSlack = 1e-12;

/// Checks both smoothing inequalities for every (m, n) ≤ levels, t in t_grid and
/// `trials` random vectors of the given bandwidth. Failures are reported, not thrown.
SmoothingReport verify_smoothing_family(const SmoothingFamily& family, int levels,
                                        const std::vector<double>& t_grid, int trials,
                                        std::uint64_t seed, int bandwidth);

/// Same check on caller-supplied vectors.
SmoothingReport verify_smoothing_on(const SmoothingFamily& family, int levels,
                                    const std::vector<double>& t_grid,
                                    const std::vector<GradedVector>& samples);

}  // namespace nmscale
