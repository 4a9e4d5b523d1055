#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmscale/graded_space.hpp"
#include "nmscale/smoothing.hpp"
#include "nmscale/tame_maps.hpp"

namespace nmscale {

struct SolverConfig {
  int p = 0;
  int k0 = 1;
  double mu = 0.0;  // ≤ 0 selects the default 16ρ
  double base = 1.5;
  int max_iter = 20;
  double tol = 1e-12;
  double guard = 1.0;
  int levels = 4;
  CutoffKind smoothing = CutoffKind::sharp;

  /// ρ = 2(p + k₀) + 1.
  double rho() const { return 2.0 * (p + k0) + 1.0; }
  double effective_mu() const { return mu > 0.0 ? mu : 16.0 * rho(); }
  /// Throws std::invalid_argument on an inconsistent configuration.
  void validate() const;
};

void to_json(nlohmann::json& j, const SolverConfig& c);
void from_json(const nlohmann::json& j, SolverConfig& c);

CutoffKind cutoff_from_string(const std::string& s);
std::string to_string(CutoffKind kind);

enum class SolveStatus { converged, max_iter, diverged, domain_exit };
std::string to_string(SolveStatus s);

struct TraceRow {
  int r = 0;
  double t = 0.0;
  Eigen::VectorXd x_norms;   // ‖x_r‖_j, j = 0..K
  Eigen::VectorXd z_norms;   // ‖z_r‖_j
  Eigen::VectorXd dx_norms;  // ‖Δx_r‖_j, empty on a row without a step
};

/// Per-iteration record. Iterates are kept in shifted coordinates x_r = ξ_r, the
/// actual point being base_point + ξ_r.
struct SolverTrace {
  std::vector<TraceRow> rows;
  SolveStatus status = SolveStatus::max_iter;
  int stop_iteration = 0;
  std::string message;
  Eigen::VectorXd y_norms;
  CutoffKind smoothing = CutoffKind::sharp;
  double base = 1.5;

  GradedVector base_point;
  GradedVector y;
  std::vector<GradedVector> xs, zs, dxs;  // dxs.size() == number of steps taken
};

struct SolveResult {
  GradedVector x;  // base_point + ξ
  SolverTrace trace;
};

/// Modified Newton scheme on f̃(ξ) = f(base + ξ) − f(base):
///   z_r = y − f̃(ξ_r),  Δξ_r = S_{t_r} ψ(base + ξ_r) z_r,  t_r = b^r,  ξ_0 = 0.
/// Stops on ‖z_r‖_0 ≤ tol (converged), ‖ξ_r‖_0 ≥ guard or ‖z_r‖_0 > 10³‖y‖_0
/// (diverged), a DomainError from the bundle (domain_exit) or r = max_iter.
SolveResult solve(const TameMapBundle& f, const GradedVector& y, const SolverConfig& cfg);
SolveResult solve(const TameMapBundle& f, const GradedVector& y, const SolverConfig& cfg,
                  const GradedVector& base_point);

/// Same loop with S_t replaced by the identity.
SolveResult plain_newton(const TameMapBundle& f, const GradedVector& y, const SolverConfig& cfg);

std::string trace_csv(const SolverTrace& trace, int levels);
nlohmann::json trace_metadata(const SolverTrace& trace, const SolverConfig& cfg,
                              const std::string& bundle_name);

struct DecayRateFit {
  enum class Status { fitted, inconclusive };
  Status status = Status::inconclusive;
  double slope = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  int rows_used = 0;
};

/// Least squares of log‖z_r‖_j against t_r over rows with ‖z_r‖_j above
/// 100·ε_mach·‖y‖_j; fewer than three rows is inconclusive.
DecayRateFit fit_decay(const SolverTrace& trace, int level);

struct SuperlinearityCheck {
  int pairs = 0;
  int violations = 0;
  bool pass = false;  // at least one pair and no violations
};

/// ‖z_{r+1}‖_0 ≤ ‖z_r‖_0^{exponent} for rows with ‖z_r‖_0 ∈ [lo, hi].
SuperlinearityCheck superlinearity_check(const SolverTrace& trace, double exponent = 1.2,
                                         double lo = 1e-8, double hi = 1e-2);

struct RecursionRow {
  int r = 0;
  double mismatch = 0.0;          // ‖z_{r+1} − rhs‖_0 / ‖z_r‖_0
  double quadrature_change = 0.0;  // ‖Q_16 − Q_32‖_0 / ‖z_r‖_0
  bool breakdown = false;
};

struct RecursionReport {
  std::vector<RecursionRow> rows;
  double worst = 0.0;
  bool pass = false;
};

inline constexpr double kRecursionTol = 1e-6;

/// Recomputes z_{r+1} = Df(x_r)(1 − S_{t_r})ψ(x_r)z_r − ∫₀¹(1−t)D²f(x_r + tΔx_r)(Δx_r, Δx_r)dt
/// with 16-point composite midpoint quadrature (32 points as the doubling check)
/// and compares it with the recorded residual.
RecursionReport residual_recursion_check(const TameMapBundle& f, const SolverTrace& trace);

struct InjectivityEstimate {
  std::vector<double> c_small;  // over the first half of the pairs
  std::vector<double> c_large;
  std::vector<bool> stable;
  int pairs = 0;
};

/// Sup of ‖y−x‖_j / ((‖x‖_{j+k₀} + ‖y‖_{j+k₀})‖Δf‖_{k₀} + ‖Δf‖_{j+k₀}), Δf = f(y) − f(x),
/// at `pairs` and 2·`pairs` samples in the δ-ball.
InjectivityEstimate injectivity_probe(const TameMapBundle& f, int levels, int pairs,
                                      std::uint64_t seed);

std::string injectivity_csv(const InjectivityEstimate& e);

// ---- finite-dimensional reduction -----------------------------------------

struct ReductionConfig {
  int samples = 50;
  double sample_radius = 2e-3;  // ‖ξ − x₀‖_0 of the samples
  double stencil_h = 1e-4;
  int stencil_directions = 8;
  double inner_tol = 1e-13;
  double rank_tol = 1e-8;
  std::uint64_t seed = 0;
};

struct ReductionReport {
  int dim_ker = 0;
  int dim_coker = 0;
  std::vector<GradedVector> kernel_basis;
  std::vector<GradedVector> cokernel_basis;
  std::vector<double> off_c;     // ‖P_im k(ξ)‖_0 per sample
  std::vector<double> k_norms;   // ‖k(ξ)‖_0 per sample
  double max_off_c = 0.0;
  double k_at_x0 = 0.0;
  double dk_stencil = 0.0;
  bool pass = false;
};

inline constexpr double kOffCTol = 1e-8;
inline constexpr double kKAtX0Tol = 1e-9;
inline constexpr double kDkTol = 1e-4;

/// Local normal form f∘g(ξ) = f(x₀) + D(ξ − x₀) + k(ξ) with D = Df(x₀), k(ξ) ∈ coker D.
/// g inverts ψ(x) = x₀ + P_ker(x − x₀) + D⁺(f(x) − f(x₀)) through `solve`.
class FiniteDimReduction {
 public:
  FiniteDimReduction(TameMapBundle f, GradedVector x0, double rank_tol = 1e-8,
                     double inner_tol = 1e-13);

  GradedVector psi(const GradedVector& x) const;
  /// Local inverse of ψ; throws std::runtime_error when the inner solve fails.
  GradedVector g(const GradedVector& xi) const;
  GradedVector k(const GradedVector& xi) const;
  /// ‖(1 − P_C) v‖_0 with C the cokernel space.
  double off_c(const GradedVector& v) const;

  const std::vector<GradedVector>& kernel_basis() const { return kernel_; }
  const std::vector<GradedVector>& cokernel_basis() const { return cokernel_; }
  const TameMapBundle& psi_bundle() const { return psi_bundle_; }

 private:
  TameMapBundle f_;
  GradedVector x0_;
  GradedVector f_x0_;
  Eigen::MatrixXcd d_;
  Eigen::MatrixXcd d_pinv_;
  Eigen::MatrixXcd p_ker_;
  Eigen::MatrixXcd p_coker_;
  std::vector<GradedVector> kernel_;
  std::vector<GradedVector> cokernel_;
  TameMapBundle psi_bundle_;
  double inner_tol_;
};

ReductionReport finite_dim_reduction(const TameMapBundle& f, const GradedVector& x0,
                                     const ReductionConfig& cfg);

}  // namespace nmscale
