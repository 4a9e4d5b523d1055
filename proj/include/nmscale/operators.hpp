#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmscale/graded_space.hpp"

namespace nmscale {

/// Linear map on bandwidth-N coefficient space with a declared order d: it is
/// expected to be bounded E_{k+d} → E_k at every level.
class GradedOperator {
 public:
  GradedOperator(Eigen::MatrixXcd matrix, int order, std::string label);

  static GradedOperator identity(int bandwidth);
  /// Diagonal symbol σ(n) at mode n.
  static GradedOperator diagonal(const Eigen::VectorXcd& symbol, int order, std::string label);
  /// (d/dθ)^times.
  static GradedOperator derivative(int bandwidth, int times = 1);
  /// u ↦ P_N(v·u), the Toeplitz matrix (V̂_{n−m}).
  static GradedOperator multiplication(const GradedVector& v);

  int bandwidth() const { return bandwidth_; }
  int order() const { return order_; }
  const std::string& label() const { return label_; }
  const Eigen::MatrixXcd& matrix() const { return matrix_; }

  /// Maps real vectors to real vectors: A_{−m,−n} = conj(A_{m,n}).
  bool real_preserving() const { return real_preserving_; }

  GradedOperator relabeled(std::string label) const { return {matrix_, order_, std::move(label)}; }

 private:
  int bandwidth_;
  int order_;
  std::string label_;
  Eigen::MatrixXcd matrix_;
  bool real_preserving_;
};

GradedVector apply(const GradedOperator& a, const GradedVector& u);
/// a∘b; orders add.
GradedOperator compose(const GradedOperator& a, const GradedOperator& b);
/// a + b; order is the max.
GradedOperator add(const GradedOperator& a, const GradedOperator& b);
GradedOperator scaled(const GradedOperator& a, Complex s);

/// Empirical sup ‖Au‖_k / ‖u‖_{k+d} at two sample sizes.
struct OrderCertificate {
  std::vector<double> sup_small;
  std::vector<double> sup_large;
  bool stable = true;
};

OrderCertificate certify_order(const GradedOperator& a, int max_level, int trials,
                               std::uint64_t seed);

struct FredholmReport {
  int dim_ker = 0;
  int dim_coker = 0;
  int index = 0;
  int rank = 0;
  std::vector<GradedVector> kernel_basis;
  std::vector<GradedVector> cokernel_basis;
  Eigen::VectorXd singular_values;  // descending
  std::vector<DecayFit> kernel_decay;
  double gap = 0.0;        // σ_rank / σ_{rank+1}, +inf without a cut
  bool ambiguous = false;  // gap below kMinSpectralGap
};

inline constexpr double kDefaultRankTol = 1e-8;
inline constexpr double kMinSpectralGap = 1e3;

/// Kernel, cokernel and index from the singular spectrum cut at rank_tol·σ_max.
FredholmReport analyze_fredholm(const GradedOperator& a, double rank_tol = kDefaultRankTol);

void to_json(nlohmann::json& j, const FredholmReport& r);

struct BandwidthStability {
  FredholmReport coarse;
  FredholmReport fine;
  bool stable = false;
};

/// Recomputes the Fredholm dimensions at N and 2N.
BandwidthStability check_bandwidth_stability(const std::function<GradedOperator(int)>& build,
                                             int bandwidth, double rank_tol = kDefaultRankTol);

/// Finite-rank operator Σ_i v_i ⟨w_i, ·⟩ with smooth range vectors v_i: it factors
/// through the coarsest level into a rank-r coordinate space.
struct StronglySmoothingOperator {
  GradedOperator op;
  std::vector<GradedVector> range_vectors;
  std::vector<GradedVector> functionals;
  double smoothness = 0.0;
};

StronglySmoothingOperator make_strongly_smoothing(std::vector<GradedVector> range_vectors,
                                                  std::vector<GradedVector> functionals,
                                                  double smoothness, std::string label);

/// Deterministic per seed; level-0 operator norm exactly `scale` (zero when scale = 0).
StronglySmoothingOperator random_strongly_smoothing(std::uint64_t seed, int bandwidth, int rank,
                                                    double smoothness, double scale);

/// Rank-one K = −(A a)⟨b, ·⟩ / ⟨b, a⟩, so that (A + K) a = 0.
StronglySmoothingOperator kernel_forcing_perturbation(const GradedOperator& a,
                                                      const GradedVector& kernel_dir,
                                                      const GradedVector& functional);

struct IndexExperimentRow {
  std::uint64_t seed = 0;
  int dim_ker = 0;
  int dim_coker = 0;
  int index = 0;
};

struct IndexExperiment {
  int base_index = 0;
  std::vector<IndexExperimentRow> rows;
  int violations = 0;
};

/// ind(A + K) against ind(A) for one random strongly smoothing K per seed.
IndexExperiment index_invariance_experiment(const GradedOperator& a,
                                            const std::vector<std::uint64_t>& seeds, int rank,
                                            double scale, double smoothness = 3.0,
                                            double rank_tol = kDefaultRankTol);

struct AdditivityCheck {
  int index_a = 0;
  int index_b = 0;
  int index_composite = 0;
  bool holds = false;
};

AdditivityCheck index_additivity(const GradedOperator& a, const GradedOperator& b,
                                 double rank_tol = kDefaultRankTol);

/// Decay-transfer proxy for regularity: if Au decays like w^{−s} then u should
/// decay at least like w^{−(s − order)}, within fit_tol.
struct RegularityResult {
  enum class Status { consistent, inconsistent, inconclusive };
  DecayFit decay_in;
  DecayFit decay_out;
  Status status = Status::inconclusive;
};

RegularityResult regularity_check(const GradedOperator& a, const GradedVector& u,
                                  double fit_tol = 0.5);

/// Pseudo-inverse with kernel and cokernel cut at rank_tol: A∘A⁺ = 1 − P_coker and
/// A⁺∘A = 1 − P_ker.
GradedOperator fredholm_inverse(const GradedOperator& a, double rank_tol = kDefaultRankTol);

/// Orthogonal projection onto the span of an orthonormal family.
Eigen::MatrixXcd projector(const std::vector<GradedVector>& orthonormal, int bandwidth);

}  // namespace nmscale
