#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmscale/graded_space.hpp"
#include "nmscale/operators.hpp"
#include "nmscale/tame_maps.hpp"

namespace nmscale {

// ---- quasilinear map -------------------------------------------------------

inline constexpr double kBurgersRadius = 0.05;

/// f(u) = u + ε u u′ at bandwidth N, with Df(u)v = v + ε(uv)′, D²f(u)(v, w) = ε(vw)′
/// and ψ(u) = (1 + ε ∂∘M_u)⁻¹ by dense LU. Admissible u have 1 + εu′ ≥ 1/2 on the grid.
TameMapBundle make_burgers_map(double epsilon, int bandwidth, double domain_radius = kBurgersRadius);

/// Burgers map plus a fixed linear term: f(u) = u + ε u u′ + K u.
TameMapBundle make_perturbed_burgers_map(double epsilon, int bandwidth, const GradedOperator& k,
                                         double domain_radius = kBurgersRadius);

/// Scaled random vector: decay `decay`, level-0 norm `level0_norm`.
GradedVector scaled_random_vector(std::uint64_t seed, int bandwidth, double decay, double level0_norm);

/// Burgers map with a rank-one K chosen so that Df(x₀) + K has a one-dimensional
/// kernel (spanned by a) and cokernel.
struct RankOneFixture {
  TameMapBundle f;
  GradedVector x0;
  GradedVector kernel_dir;
  GradedVector functional;
};

RankOneFixture make_rank_one_burgers_fixture(double epsilon, int bandwidth, std::uint64_t seed,
                                             double x0_norm = 1e-2, double decay = 4.0);

/// Matrix of v ↦ v + ε(uv)′.
Eigen::MatrixXcd burgers_derivative_matrix(double epsilon, const GradedVector& u);

// ---- linear catalog --------------------------------------------------------

/// −d²/dθ² + multiplication by V, order 2.
GradedOperator make_elliptic_operator(const GradedVector& v);

/// Named Fredholm catalog: "ddtheta", "laplace_minus_one" (−d² − 1), "laplace_plus_one" (−d² + 1).
GradedOperator catalog_operator(const std::string& name, int bandwidth);
std::vector<std::string> catalog_operator_names();

// ---- reparametrisation action ----------------------------------------------

/// Ψ(b, u) = u(· + b) with DΨ(b, u)(e, v) = e u′(· + b) + v(· + b) (one level lost on u).
MapBundle<ParamPoint> make_rotation_action();

// ---- bump family -----------------------------------------------------------

/// Plateau bump in s = θ/2π: √n on |s − 1/2| ≤ 1/(4n), zero for |s − 1/2| ≥ 1/(2n).
double plateau_bump(double s, int n);

/// True when bump n has at least four grid cells of 2N+1 across its support.
bool bump_resolvable(int n, int bandwidth);

/// u^k_n: the k-fold antiderivative in s of the plateau bump, times a window equal
/// to 1 on [0.2, 0.8] and vanishing outside [0.05, 0.95]; analyzed at bandwidth N.
GradedVector bump_vector(int k, int n, int bandwidth);

struct ContinuityRow {
  int n = 0;
  bool resolved = false;
  double distance = 0.0;        // ‖Ψ(t, u_n) − Ψ(0, u_n)‖_k with ‖u_n‖_k = 1
  double overlap = 0.0;         // ‖u_n(· + t) · u_n‖_0 / ‖u_n‖_0²
  double level0_norm = 0.0;     // ‖u_n‖_0 before normalization
};

struct ContinuityReport {
  int level = 0;
  double shift = 0.0;  // radians
  int bandwidth = 0;
  int n_threshold = 0;  // ⌈2π / shift⌉
  double parameter_offset = 0.0;
  double u_offset = 0.0;
  std::vector<ContinuityRow> rows;
  double min_distance_beyond = 0.0;  // over resolved n ≥ n_threshold
  double max_overlap_beyond = 0.0;
};

ContinuityReport uniform_continuity_failure_experiment(int level, double shift, int bandwidth,
                                                       int n_min, int n_max);

std::string continuity_csv(const ContinuityReport& r);

struct DerivativeLossReport {
  int level = 0;
  std::vector<double> ts;
  std::vector<double> smooth_remainder;
  std::vector<double> rough_remainder;  // sup over probe directions
  std::vector<int> rough_bandwidth;
  std::vector<int> rough_bump_n;
  double smooth_slope = 0.0;
  double rough_min = 0.0;
};

inline constexpr int kLossSmoothBandwidth = 1024;
inline constexpr int kLossMaxBandwidth = 1 << 17;

/// Remainder curves of the rotation action at (0, u_base) along (1, v):
/// smooth v (decay j + 1.75) at fixed bandwidth, and the sup over a rough random
/// v (decay j + 0.75) and the unit level-j bump concentrated at scale t.
DerivativeLossReport derivative_loss_probe(int level, const std::vector<double>& ts,
                                           std::uint64_t seed);

std::vector<double> default_loss_ts();

std::string derivative_loss_csv(const DerivativeLossReport& r);

/// Least-squares slope of log y against log x.
double loglog_slope(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace nmscale
