#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "nmscale/graded_space.hpp"
#include "nmscale/nash_moser.hpp"

namespace nmscale::cli {

class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline constexpr int kExitPass = 0;
inline constexpr int kExitNegative = 1;
inline constexpr int kExitUsage = 2;

/// Every experiment parameter in one flat, serializable record. Each subcommand
/// reads the fields it needs; the output directory is not part of the record.
struct ExperimentConfig {
  std::string command;
  int bandwidth = 64;
  int max_level = kDefaultMaxLevel;
  std::uint64_t seed = 20240501;

  // solve, tame-probe, reduce
  double epsilon = 0.1;
  double y_decay = 4.0;
  double y_norm = 1e-2;
  bool plain = false;
  SolverConfig solver;

  // verify-smoothing
  std::string cutoff = "sharp";
  int p = 0;
  int levels = 6;
  int trials = 200;
  int t_points = 64;

  // fredholm
  std::vector<std::string> operators;
  double rank_tol = 1e-8;
  int perturbations = 20;
  int perturbation_rank = 2;
  double perturbation_scale = 1.0;
  int composition_pairs = 10;

  // tame-probe
  int pairs = 500;

  // reparam-demo
  int level = 0;
  double shift_fraction = 0.1;  // shift t in units of 2π
  int n_min = 5;
  int n_max = 40;
  int loss_level = 2;
  double continuity_floor = 1.3;
  double overlap_ceiling = 1e-3;
  double loss_floor = 0.5;
  double slope_min = 0.8;
  double slope_max = 1.2;

  // reduce
  double x0_norm = 1e-2;
  int samples = 50;
  double sample_radius = 2e-3;
  double stencil_h = 1e-4;
  int stencil_directions = 8;
  double inner_tol = 1e-13;

  /// Throws UsageError for values the named command cannot run with.
  void validate() const;
};

void to_json(nlohmann::json& j, const ExperimentConfig& c);
/// Strict: unknown keys raise UsageError.
void from_json(const nlohmann::json& j, ExperimentConfig& c);

/// Defaults for one subcommand.
ExperimentConfig default_config(const std::string& command);

/// Applies a JSON object on top of `base`; keys in the object win.
ExperimentConfig apply_overrides(const ExperimentConfig& base, const nlohmann::json& overrides);

ExperimentConfig load_config_file(const std::filesystem::path& path);

/// Canonical serialization: compact JSON with sorted keys.
std::string canonical_json(const ExperimentConfig& c);

std::string sha256_hex(const std::string& data);

/// Hash of the canonical config; stored in every output's metadata.
std::string config_hash(const ExperimentConfig& c);

/// Target y of the solve command.
GradedVector solve_target(const ExperimentConfig& c);

/// Runs one subcommand and writes its artifacts into `out`. Returns the exit code.
int run_command(const ExperimentConfig& c, const std::filesystem::path& out, std::ostream& log);

/// Summarizes every artifact found in the input directories.
int run_report(const std::vector<std::filesystem::path>& inputs, const std::filesystem::path& out,
               std::ostream& log);

/// Full command line entry point: exit codes 0 pass, 1 negative result, 2 usage or IO.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace nmscale::cli
