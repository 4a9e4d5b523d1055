#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "nmscale/graded_space.hpp"

namespace nmscale {

/// Point (b, u) of ℝ × E with ‖(b, u)‖_k = (b² + ‖u‖_k²)^{1/2}.
struct ParamPoint {
  double b = 0.0;
  GradedVector u;
};

ParamPoint operator+(const ParamPoint& x, const ParamPoint& y);
ParamPoint operator-(const ParamPoint& x, const ParamPoint& y);
ParamPoint operator*(double s, const ParamPoint& x);
double norm(const ParamPoint& x, int k);

/// Nonlinear map f from a graded space into E with derivative, optional family
/// inverse ψ(x) of Df(x) and optional second derivative.
template <typename Point>
struct MapBundle {
  std::string name;
  int bandwidth = 0;  // 0: works at any bandwidth
  double domain_radius = std::numeric_limits<double>::infinity();  // δ at level 0
  int k0 = 0;    // level offset in the ψ estimate
  int loss = 0;  // levels lost by Df
  std::function<GradedVector(const Point&)> eval;
  std::function<GradedVector(const Point&, const Point&)> deriv;
  std::function<Point(const Point&, const GradedVector&)> inverse;
  std::function<GradedVector(const Point&, const Point&, const Point&)> second_deriv;
  /// Extra admissibility test beyond the δ-ball; throws DomainError.
  std::function<void(const Point&)> domain_check;

  bool has_inverse() const { return static_cast<bool>(inverse); }
  bool has_second_deriv() const { return static_cast<bool>(second_deriv); }

  bool in_domain(const Point& x) const {
    if (!(norm(x, 0) < domain_radius)) return false;
    if (domain_check) {
      try {
        domain_check(x);
      } catch (const DomainError&) {
        return false;
      }
    }
    return true;
  }

  void require_domain(const Point& x, const std::string& what) const {
    if (!(norm(x, 0) < domain_radius)) {
      throw DomainError(name + ": " + what + " outside the δ-ball (‖x‖_0 = " +
                        std::to_string(norm(x, 0)) + ", δ = " + std::to_string(domain_radius) + ")");
    }
    if (domain_check) domain_check(x);
  }
};

using TameMapBundle = MapBundle<GradedVector>;

/// ‖(f(x + tu) − f(x))/t − Df(x)u‖_j for each t.
template <typename Point>
std::vector<double> probe_differentiability(const MapBundle<Point>& f, const Point& x,
                                            const Point& u, int level,
                                            const std::vector<double>& ts) {
  f.require_domain(x, "base point");
  const GradedVector fx = f.eval(x);
  const GradedVector lu = f.deriv(x, u);
  std::vector<double> out;
  out.reserve(ts.size());
  for (double t : ts) {
    const Point xt = x + t * u;
    GradedVector ft;
    try {
      f.require_domain(xt, "x + t u");
      ft = f.eval(xt);
    } catch (const DomainError& e) {
      std::ostringstream msg;
      msg << "domain exit at t = " << t << ": " << e.what();
      throw DomainError(msg.str());
    }
    GradedVector r = ft - fx;
    r *= 1.0 / t;
    r -= lu;
    out.push_back(norm(r, level));
  }
  return out;
}

struct TameConstants {
  std::string name;
  std::vector<double> a, b, c, d;  // c empty without second_deriv, d empty without inverse
  std::vector<bool> stable;         // per level, all present constants within 2× on doubling
  int trials = 0;
};

/// Empirical suprema of the modified tame ratios, with l = bundle.loss:
///   a_j = ‖f̃(x)‖_j / ‖x‖_{j+l}
///   b_j = ‖Df(x)e‖_j / (‖x‖_{j+l}‖e‖_l + ‖e‖_{j+l})
///   c_j = ‖D²f(x)(e,ẽ)‖_j / (‖x‖_{j+l}‖e‖_l‖ẽ‖_l + ‖e‖_{j+l}‖ẽ‖_l + ‖e‖_l‖ẽ‖_{j+l})
///   d_j = ‖ψ(x)e′‖_j / (‖x‖_{j+k₀}‖e′‖_{k₀} + ‖e′‖_{j+k₀})
/// with f̃(x) = f(x) − f(0). Evaluated at `trials` and 2·`trials` samples.
TameConstants estimate_tame_constants(const TameMapBundle& f, int levels, int trials,
                                      std::uint64_t seed);

std::string tame_constants_csv(const TameConstants& t);

/// Sample in the δ-ball at level 0 with the given decay, shrunk until admissible.
GradedVector sample_in_domain(const TameMapBundle& f, std::uint64_t seed, double decay,
                              double radius_fraction);

struct InverseResiduals {
  double left = 0.0;   // ‖ψ(x)Df(x)v − v‖_0 / ‖v‖_0
  double right = 0.0;  // ‖Df(x)ψ(x)w − w‖_0 / ‖w‖_0
};

/// Throws DomainError when x is outside the domain.
InverseResiduals inverse_residuals(const TameMapBundle& f, const GradedVector& x,
                                   const GradedVector& v, const GradedVector& w);

struct InverseConsistencyReport {
  double worst_left = 0.0;
  double worst_right = 0.0;
  int trials = 0;
  bool pass = false;
};

inline constexpr double kInverseTol = 1e-9;

InverseConsistencyReport check_inverse_consistency(const TameMapBundle& f, int trials,
                                                   std::uint64_t seed);

/// (Df(x + h v′)v − Df(x − h v′)v) / (2h).
GradedVector finite_difference_second_derivative(const TameMapBundle& f, const GradedVector& x,
                                                 const GradedVector& v, const GradedVector& vp,
                                                 double h);

/// ‖(f(x + hv) − f(x − hv))/(2h) − Df(x)v‖_0.
double derivative_stencil_error(const TameMapBundle& f, const GradedVector& x,
                                const GradedVector& v, double h);

/// Dense matrix of Df(x) in the coefficient basis.
Eigen::MatrixXcd assemble_derivative(const TameMapBundle& f, const GradedVector& x);

/// Linear bundle x ↦ A x with ψ = A⁻¹ (dense LU), D²f = 0.
TameMapBundle make_linear_bundle(const Eigen::MatrixXcd& a, std::string name, int loss = 0);

}  // namespace nmscale
