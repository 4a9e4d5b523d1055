#include "nmscale/cli.hpp"

#include <openssl/evp.h>

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <memory>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>

#include "CLI11.hpp"
#include "nmscale/io.hpp"
#include "nmscale/operators.hpp"
#include "nmscale/problems.hpp"
#include "nmscale/random.hpp"
#include "nmscale/smoothing.hpp"
#include "nmscale/tame_maps.hpp"

namespace nmscale::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

const std::vector<std::string> kCommands = {"verify-smoothing", "fredholm",     "solve",
                                            "tame-probe",       "reparam-demo", "reduce"};

void require(bool ok, const std::string& what) {
  if (!ok) throw UsageError(what);
}

template <typename T>
void read_key(const json& j, const char* key, T& field) {
  if (j.contains(key)) field = j.at(key).get<T>();
}

std::string to_lower_hex(const unsigned char* data, unsigned int len) {
  std::ostringstream os;
  os << std::hex << std::setfill('0');
  for (unsigned int i = 0; i < len; ++i) os << std::setw(2) << static_cast<int>(data[i]);
  return os.str();
}

/// Collects the files a command writes, then emits them with one metadata sidecar.
class ArtifactWriter {
 public:
  ArtifactWriter(const ExperimentConfig& cfg, fs::path out)
      : cfg_(cfg), out_(std::move(out)), hash_(config_hash(cfg)) {}

  void csv(const std::string& name, const std::string& content) {
    files_[name] = content;
  }

  const std::string& hash() const { return hash_; }

  void finish(json result, bool pass) {
    json cfg_json = cfg_;
    cfg_json["config_sha256"] = hash_;
    const std::string config_name = cfg_.command + ".config.json";
    write_text_file(out_ / config_name, dump_json(cfg_json));

    json files = json::object();
    for (const auto& [name, content] : files_) {
      write_text_file(out_ / name, content);
      files[name] = {{"sha256", sha256_hex(content)}};
    }
    json meta = {{"command", cfg_.command},
                 {"config_sha256", hash_},
                 {"config_file", config_name},
                 {"files", files},
                 {"pass", pass},
                 {"result", std::move(result)}};
    write_text_file(out_ / (cfg_.command + ".json"), dump_json(meta));
  }

 private:
  const ExperimentConfig& cfg_;
  fs::path out_;
  std::string hash_;
  std::map<std::string, std::string> files_;
};

json fit_json(const DecayRateFit& fit) {
  return {{"status", fit.status == DecayRateFit::Status::fitted ? "fitted" : "inconclusive"},
          {"slope", json_number(fit.slope)},
          {"intercept", json_number(fit.intercept)},
          {"r2", json_number(fit.r2)},
          {"rows_used", fit.rows_used}};
}

json vector_json(const Eigen::VectorXd& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(json_number(v(i)));
  return out;
}

// ---- verify-smoothing ------------------------------------------------------

int cmd_verify_smoothing(const ExperimentConfig& c, const fs::path& out, std::ostream& log) {
  const SmoothingFamily family(cutoff_from_string(c.cutoff), c.p);
  const std::vector<double> grid = default_t_grid(c.bandwidth, c.t_points);
  const SmoothingReport rep = verify_smoothing_family(family, c.levels, grid, c.trials, c.seed, c.bandwidth);

  ArtifactWriter w(c, out);
  json result = rep;
  result["cutoff"] = c.cutoff;
  result["bandwidth"] = c.bandwidth;
  result["slack"] = kSmoothingSlack;
  w.finish(result, rep.pass);
  log << "verify-smoothing: " << (rep.pass ? "pass" : "FAIL") << " (worst ratios "
      << format_double(rep.worst_ratio_ineq1) << ", " << format_double(rep.worst_ratio_ineq2)
      << " over " << rep.t_count << " t-values)\n";
  return rep.pass ? kExitPass : kExitNegative;
}

// ---- fredholm --------------------------------------------------------------

int cmd_fredholm(const ExperimentConfig& c, const fs::path& out, std::ostream& log) {
  std::vector<std::string> names = c.operators.empty() ? catalog_operator_names() : c.operators;

  CsvTable dims({"operator", "bandwidth", "dim_ker", "dim_coker", "index", "rank", "gap", "ambiguous"});
  CsvTable laws({"law", "operator_a", "operator_b", "seed", "index_a", "index_b", "index_result", "holds"});
  bool pass = true;
  int violations = 0;
  json summary = json::array();

  for (const auto& name : names) {
    const BandwidthStability bs = check_bandwidth_stability(
        [&](int n) { return catalog_operator(name, n); }, c.bandwidth, c.rank_tol);
    for (const FredholmReport* r : {&bs.coarse, &bs.fine}) {
      const int n = r == &bs.coarse ? c.bandwidth : 2 * c.bandwidth;
      dims.add_row({name, std::to_string(n), std::to_string(r->dim_ker), std::to_string(r->dim_coker),
                    std::to_string(r->index), std::to_string(r->rank), format_double(r->gap),
                    r->ambiguous ? "true" : "false"});
      pass = pass && !r->ambiguous;
    }
    pass = pass && bs.stable;

    const GradedOperator a = catalog_operator(name, c.bandwidth);
    std::vector<std::uint64_t> seeds;
    for (int i = 0; i < c.perturbations; ++i) {
      seeds.push_back(derive_seed(c.seed, static_cast<std::uint64_t>(i)));
    }
    const IndexExperiment ex = index_invariance_experiment(a, seeds, c.perturbation_rank,
                                                           c.perturbation_scale, 3.0, c.rank_tol);
    for (const auto& row : ex.rows) {
      const bool holds = row.index == ex.base_index;
      laws.add_row({"perturbation", name, "K", std::to_string(row.seed), std::to_string(ex.base_index),
                    "", std::to_string(row.index), holds ? "true" : "false"});
    }
    violations += ex.violations;
    summary.push_back({{"operator", name},
                       {"dim_ker", bs.coarse.dim_ker},
                       {"dim_coker", bs.coarse.dim_coker},
                       {"index", bs.coarse.index},
                       {"gap", json_number(bs.coarse.gap)},
                       {"bandwidth_stable", bs.stable},
                       {"perturbation_violations", ex.violations}});
  }

  for (int i = 0; i < c.composition_pairs; ++i) {
    const std::uint64_t s = derive_seed(c.seed, 1000 + static_cast<std::uint64_t>(i));
    Rng rng(s);
    const std::string& na = names[rng.next() % names.size()];
    const std::string& nb = names[rng.next() % names.size()];
    const GradedOperator a = add(catalog_operator(na, c.bandwidth),
                                 random_strongly_smoothing(derive_seed(s, 1), c.bandwidth,
                                                           c.perturbation_rank, 3.0,
                                                           c.perturbation_scale)
                                     .op);
    const GradedOperator b = add(catalog_operator(nb, c.bandwidth),
                                 random_strongly_smoothing(derive_seed(s, 2), c.bandwidth,
                                                           c.perturbation_rank, 3.0,
                                                           c.perturbation_scale)
                                     .op);
    const AdditivityCheck chk = index_additivity(a, b, c.rank_tol);
    laws.add_row({"composition", na + "+K", nb + "+K", std::to_string(s), std::to_string(chk.index_a),
                  std::to_string(chk.index_b), std::to_string(chk.index_composite),
                  chk.holds ? "true" : "false"});
    if (!chk.holds) ++violations;
  }
  pass = pass && violations == 0;

  ArtifactWriter w(c, out);
  w.csv("fredholm.csv", dims.str());
  w.csv("index_laws.csv", laws.str());
  w.finish({{"operators", summary}, {"index_law_violations", violations}}, pass);
  log << "fredholm: " << names.size() << " operators, " << violations << " index-law violations, "
      << (pass ? "pass" : "FAIL") << "\n";
  return pass ? kExitPass : kExitNegative;
}

// ---- solve -----------------------------------------------------------------

int cmd_solve(const ExperimentConfig& c, const fs::path& out, std::ostream& log) {
  const TameMapBundle f = make_burgers_map(c.epsilon, c.bandwidth);
  const GradedVector y = solve_target(c);
  const SolveResult res = c.plain ? plain_newton(f, y, c.solver) : solve(f, y, c.solver);
  const SolverTrace& tr = res.trace;

  json result = trace_metadata(tr, c.solver, f.name);
  result["method"] = c.plain ? "plain_newton" : "smoothed";
  result["y_norms"] = vector_json(tr.y_norms);
  json fits = json::array();
  for (int j = 0; j <= c.solver.levels; ++j) fits.push_back(fit_json(fit_decay(tr, j)));
  result["fit_decay"] = fits;
  const SuperlinearityCheck sl = superlinearity_check(tr);
  result["superlinearity"] = {{"pairs", sl.pairs}, {"violations", sl.violations}, {"pass", sl.pass}};
  if (!tr.dxs.empty() && f.has_second_deriv()) {
    const RecursionReport rr = residual_recursion_check(f, tr);
    json rows = json::array();
    for (const auto& row : rr.rows) {
      rows.push_back({{"r", row.r},
                      {"mismatch", json_number(row.mismatch)},
                      {"quadrature_change", json_number(row.quadrature_change)},
                      {"breakdown", row.breakdown}});
    }
    result["recursion"] = {{"worst", json_number(rr.worst)}, {"pass", rr.pass}, {"rows", rows}};
  }

  const bool converged = tr.status == SolveStatus::converged;
  ArtifactWriter w(c, out);
  w.csv("trace.csv", trace_csv(tr, c.solver.levels));
  w.finish(result, converged);
  log << "solve: " << to_string(tr.status) << " after " << tr.dxs.size() << " steps, final |z|_0 = "
      << format_double(tr.rows.empty() ? 0.0 : tr.rows.back().z_norms(0)) << "\n";
  return converged ? kExitPass : kExitNegative;
}

// ---- tame-probe ------------------------------------------------------------

int cmd_tame_probe(const ExperimentConfig& c, const fs::path& out, std::ostream& log) {
  const TameMapBundle f = make_burgers_map(c.epsilon, c.bandwidth);
  const TameConstants tc = estimate_tame_constants(f, c.levels, c.trials, derive_seed(c.seed, 0));
  const InverseConsistencyReport inv = check_inverse_consistency(f, c.trials, derive_seed(c.seed, 1));
  const InjectivityEstimate inj = injectivity_probe(f, c.levels, c.pairs, derive_seed(c.seed, 2));

  const bool tame_stable = std::all_of(tc.stable.begin(), tc.stable.end(), [](bool b) { return b; });
  const bool inj_stable = std::all_of(inj.stable.begin(), inj.stable.end(), [](bool b) { return b; });
  const bool pass = tame_stable && inj_stable && inv.pass;

  json result = {{"bundle", f.name},
                 {"tame_stable", tame_stable},
                 {"injectivity_stable", inj_stable},
                 {"injectivity_c0", json_number(inj.c_large.empty() ? 0.0 : inj.c_large[0])},
                 {"injectivity_c0_half", json_number(inj.c_small.empty() ? 0.0 : inj.c_small[0])},
                 {"inverse", {{"worst_left", json_number(inv.worst_left)},
                              {"worst_right", json_number(inv.worst_right)},
                              {"pass", inv.pass}}}};
  ArtifactWriter w(c, out);
  w.csv("tame_constants.csv", tame_constants_csv(tc));
  w.csv("injectivity.csv", injectivity_csv(inj));
  w.finish(result, pass);
  log << "tame-probe: tame constants " << (tame_stable ? "stable" : "UNSTABLE") << ", injectivity "
      << (inj_stable ? "stable" : "UNSTABLE") << ", inverse residual "
      << format_double(std::max(inv.worst_left, inv.worst_right)) << "\n";
  return pass ? kExitPass : kExitNegative;
}

// ---- reparam-demo ----------------------------------------------------------

int cmd_reparam_demo(const ExperimentConfig& c, const fs::path& out, std::ostream& log) {
  const double shift = c.shift_fraction * 2.0 * std::numbers::pi;
  const ContinuityReport cont =
      uniform_continuity_failure_experiment(c.level, shift, c.bandwidth, c.n_min, c.n_max);
  const DerivativeLossReport loss = derivative_loss_probe(c.loss_level, default_loss_ts(), c.seed);

  bool any_beyond = false;
  for (const auto& row : cont.rows) any_beyond = any_beyond || (row.resolved && row.n >= cont.n_threshold);
  const bool continuity_pass = any_beyond && cont.min_distance_beyond >= c.continuity_floor &&
                               cont.max_overlap_beyond <= c.overlap_ceiling;
  const bool loss_pass = loss.smooth_slope >= c.slope_min && loss.smooth_slope <= c.slope_max &&
                         loss.rough_min >= c.loss_floor;
  const bool pass = continuity_pass && loss_pass;

  json result = {{"continuity",
                  {{"level", cont.level},
                   {"shift", json_number(cont.shift)},
                   {"n_threshold", cont.n_threshold},
                   {"parameter_offset", json_number(cont.parameter_offset)},
                   {"u_offset", json_number(cont.u_offset)},
                   {"min_distance_beyond", json_number(cont.min_distance_beyond)},
                   {"max_overlap_beyond", json_number(cont.max_overlap_beyond)},
                   {"pass", continuity_pass}}},
                 {"derivative_loss",
                  {{"level", loss.level},
                   {"smooth_slope", json_number(loss.smooth_slope)},
                   {"rough_min", json_number(loss.rough_min)},
                   {"loss_floor", c.loss_floor},
                   {"pass", loss_pass}}}};
  ArtifactWriter w(c, out);
  w.csv("continuity.csv", continuity_csv(cont));
  w.csv("derivative_loss.csv", derivative_loss_csv(loss));
  w.finish(result, pass);
  log << "reparam-demo: min d_n beyond n = " << cont.n_threshold << " is "
      << format_double(cont.min_distance_beyond) << ", smooth slope " << format_double(loss.smooth_slope)
      << ", rough floor " << format_double(loss.rough_min) << ", " << (pass ? "pass" : "FAIL") << "\n";
  return pass ? kExitPass : kExitNegative;
}

// ---- reduce ----------------------------------------------------------------

int cmd_reduce(const ExperimentConfig& c, const fs::path& out, std::ostream& log) {
  const RankOneFixture fx = make_rank_one_burgers_fixture(c.epsilon, c.bandwidth, c.seed, c.x0_norm);
  ReductionConfig rc;
  rc.samples = c.samples;
  rc.sample_radius = c.sample_radius;
  rc.stencil_h = c.stencil_h;
  rc.stencil_directions = c.stencil_directions;
  rc.inner_tol = c.inner_tol;
  rc.rank_tol = c.rank_tol;
  rc.seed = derive_seed(c.seed, 3);
  const ReductionReport rep = finite_dim_reduction(fx.f, fx.x0, rc);

  CsvTable table({"sample", "k_norm_0", "off_c"});
  for (std::size_t i = 0; i < rep.off_c.size(); ++i) {
    table.add_row({std::to_string(i), format_double(rep.k_norms[i]), format_double(rep.off_c[i])});
  }
  json result = {{"bundle", fx.f.name},
                 {"dim_ker", rep.dim_ker},
                 {"dim_coker", rep.dim_coker},
                 {"max_off_c", json_number(rep.max_off_c)},
                 {"k_at_x0", json_number(rep.k_at_x0)},
                 {"dk_stencil", json_number(rep.dk_stencil)},
                 {"thresholds", {{"off_c", kOffCTol}, {"k_at_x0", kKAtX0Tol}, {"dk", kDkTol}}}};
  ArtifactWriter w(c, out);
  w.csv("reduction.csv", table.str());
  w.finish(result, rep.pass);
  log << "reduce: ker " << rep.dim_ker << ", coker " << rep.dim_coker << ", max off-C residual "
      << format_double(rep.max_off_c) << ", " << (rep.pass ? "pass" : "FAIL") << "\n";
  return rep.pass ? kExitPass : kExitNegative;
}

// ---- report ----------------------------------------------------------------

struct Artifact {
  fs::path dir;
  std::string file;
  json meta;
};

SolverTrace trace_from_csv(const std::string& text, const json& y_norms) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw IoError("empty trace");
  const auto& header = rows.front();
  std::vector<int> z_cols;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i].rfind("z_norm_", 0) == 0) z_cols.push_back(static_cast<int>(i));
  }
  SolverTrace tr;
  tr.y_norms.resize(static_cast<Eigen::Index>(y_norms.size()));
  for (std::size_t j = 0; j < y_norms.size(); ++j) {
    tr.y_norms(static_cast<Eigen::Index>(j)) = y_norms[j].is_number() ? y_norms[j].get<double>() : 0.0;
  }
  for (std::size_t i = 1; i < rows.size(); ++i) {
    TraceRow row;
    row.r = std::stoi(rows[i].at(0));
    row.t = std::stod(rows[i].at(1));
    row.z_norms.resize(static_cast<Eigen::Index>(z_cols.size()));
    for (std::size_t j = 0; j < z_cols.size(); ++j) {
      row.z_norms(static_cast<Eigen::Index>(j)) = std::stod(rows[i].at(z_cols[j]));
    }
    tr.rows.push_back(std::move(row));
  }
  return tr;
}

std::string yes_no(bool b) { return b ? "pass" : "FAIL"; }

json summarize(const Artifact& a, std::ostream& text) {
  const std::string& cmd = a.meta.at("command").get_ref<const std::string&>();
  const json& r = a.meta.at("result");
  const bool pass = a.meta.value("pass", false);
  json s = {{"command", cmd}, {"source", (a.dir / a.file).generic_string()},
            {"config_sha256", a.meta.at("config_sha256")}, {"pass", pass}};
  text << "[" << cmd << "] " << (a.dir / a.file).generic_string() << ": " << yes_no(pass) << "\n";
  if (cmd == "solve") {
    const SolverTrace tr = trace_from_csv(read_text_file(a.dir / "trace.csv"), r.at("y_norms"));
    json fits = json::array();
    for (Eigen::Index j = 0; j < tr.y_norms.size(); ++j) {
      const DecayRateFit fit = fit_decay(tr, static_cast<int>(j));
      fits.push_back(fit_json(fit));
      text << "  fit_decay level " << j << ": slope " << format_double(fit.slope) << ", r2 "
           << format_double(fit.r2) << " (" << fit.rows_used << " rows)\n";
    }
    s["status"] = r.at("status");
    s["steps"] = r.at("steps");
    s["final_residual_0"] = r.at("final_residual_0");
    s["reference_rate"] = r.at("reference_rate");
    s["slope"] = fits.empty() ? json(nullptr) : fits[0]["slope"];
    s["fit_decay"] = fits;
    text << "  status " << r.at("status").get<std::string>() << ", " << r.at("steps").get<int>()
         << " steps, reference rate " << r.at("reference_rate").dump() << "\n";
  } else if (cmd == "fredholm") {
    s["operators"] = r.at("operators");
    s["index_law_violations"] = r.at("index_law_violations");
    for (const auto& op : r.at("operators")) {
      text << "  " << op.at("operator").get<std::string>() << ": ker " << op.at("dim_ker").get<int>()
           << ", coker " << op.at("dim_coker").get<int>() << ", index " << op.at("index").get<int>()
           << "\n";
    }
  } else if (cmd == "tame-probe") {
    const auto rows = parse_csv(read_text_file(a.dir / "tame_constants.csv"));
    json consts = json::array();
    for (std::size_t i = 1; i < rows.size(); ++i) {
      consts.push_back({{"j", rows[i].at(1)}, {"a", rows[i].at(2)}, {"b", rows[i].at(3)},
                        {"c", rows[i].at(4)}, {"d", rows[i].at(5)}, {"stable", rows[i].at(6)}});
    }
    s["tame_constants"] = consts;
    s["injectivity_c0"] = r.at("injectivity_c0");
    s["inverse"] = r.at("inverse");
    text << "  " << consts.size() << " levels of tame constants, injectivity c0 "
         << r.at("injectivity_c0").dump() << "\n";
  } else {
    s["result"] = r;
    text << "  " << r.dump() << "\n";
  }
  return s;
}

// ---- command line ----------------------------------------------------------

struct SubcommandState {
  ExperimentConfig cfg;
  std::string config_path;
  std::string out = ".";
  std::string smoothing = "sharp";
  CLI::App* app = nullptr;
};

void add_common(CLI::App* sub, SubcommandState& st) {
  sub->add_option("--config", st.config_path, "JSON config; its keys override flags");
  sub->add_option("--out", st.out, "Output directory")->capture_default_str();
  sub->add_option("--bandwidth", st.cfg.bandwidth, "Bandwidth N")->capture_default_str();
  sub->add_option("--max-level", st.cfg.max_level, "Highest norm level K")->capture_default_str();
  sub->add_option("--seed", st.cfg.seed, "Seed")->capture_default_str();
}

void add_solver_flags(CLI::App* sub, SubcommandState& st) {
  SolverConfig& s = st.cfg.solver;
  sub->add_option("--epsilon", st.cfg.epsilon, "Nonlinearity strength")->capture_default_str();
  sub->add_option("--y-decay", st.cfg.y_decay, "Decay exponent of the target")->capture_default_str();
  sub->add_option("--y-norm", st.cfg.y_norm, "Level-0 norm of the target (0 for y = 0)")
      ->capture_default_str();
  sub->add_flag("--plain", st.cfg.plain, "Plain Newton (no smoothing)");
  sub->add_option("--p", s.p, "Smoothing exponent p")->capture_default_str();
  sub->add_option("--k0", s.k0, "Level offset k0")->capture_default_str();
  sub->add_option("--mu", s.mu, "Rate constant mu (0: 16 rho)")->capture_default_str();
  sub->add_option("--base", s.base, "Schedule base b, t_r = b^r")->capture_default_str();
  sub->add_option("--max-iter", s.max_iter, "Iteration cap")->capture_default_str();
  sub->add_option("--tol", s.tol, "Residual tolerance at level 0")->capture_default_str();
  sub->add_option("--guard", s.guard, "Divergence guard on |x|_0")->capture_default_str();
  sub->add_option("--trace-levels", s.levels, "Norm levels recorded in the trace")->capture_default_str();
  sub->add_option("--smoothing", st.smoothing, "Cutoff: sharp, ramp or none")->capture_default_str();
}

}  // namespace

// ---- config ------------------------------------------------------------------

void ExperimentConfig::validate() const {
  require(std::find(kCommands.begin(), kCommands.end(), command) != kCommands.end(),
          "unknown command '" + command + "'");
  require(bandwidth >= 1 && bandwidth <= (1 << 16), "bandwidth must lie in [1, 65536]");
  require(max_level >= 0 && max_level <= kDefaultMaxLevel,
          "max_level must lie in [0, " + std::to_string(kDefaultMaxLevel) + "]");

  if (command == "verify-smoothing") {
    require(cutoff == "sharp" || cutoff == "ramp", "cutoff must be sharp or ramp");
    require(p >= 0, "p must be nonnegative");
    require(levels >= 0 && levels <= max_level, "levels must lie in [0, max_level]");
    require(trials >= 1, "trials must be positive");
    require(t_points >= 2, "t_points must be at least 2");
  } else if (command == "fredholm") {
    const auto names = catalog_operator_names();
    for (const auto& op : operators) {
      require(std::find(names.begin(), names.end(), op) != names.end(), "unknown operator '" + op + "'");
    }
    require(bandwidth >= 2 && bandwidth <= 512, "fredholm bandwidth must lie in [2, 512]");
    require(rank_tol > 0.0 && rank_tol < 1.0, "rank_tol must lie in (0, 1)");
    require(perturbations >= 0 && composition_pairs >= 0, "counts must be nonnegative");
    require(perturbation_rank >= 1 && perturbation_rank <= 2 * bandwidth + 1, "bad perturbation rank");
    require(perturbation_scale >= 0.0, "perturbation_scale must be nonnegative");
  } else if (command == "solve") {
    try {
      solver.validate();
    } catch (const std::invalid_argument& e) {
      throw UsageError(e.what());
    }
    require(solver.levels <= max_level, "trace levels exceed max_level");
    require(epsilon >= 0.0, "epsilon must be nonnegative");
    require(y_norm >= 0.0, "y_norm must be nonnegative");
    require(bandwidth <= 1024, "solve bandwidth must be at most 1024");
  } else if (command == "tame-probe") {
    require(levels >= 0 && levels + 1 <= max_level, "levels + 1 must not exceed max_level");
    require(trials >= 16, "trials must be at least 16");
    require(pairs >= 32, "pairs must be at least 32");
    require(epsilon >= 0.0, "epsilon must be nonnegative");
    require(bandwidth <= 512, "tame-probe bandwidth must be at most 512");
  } else if (command == "reparam-demo") {
    require(level >= 0 && level <= max_level, "level must lie in [0, max_level]");
    require(loss_level >= 0 && loss_level + 1 <= max_level, "loss_level + 1 must not exceed max_level");
    require(shift_fraction > 0.0 && shift_fraction < 1.0, "shift_fraction must lie in (0, 1)");
    require(n_min >= 1 && n_min <= n_max, "need 1 <= n_min <= n_max");
  } else if (command == "reduce") {
    require(samples >= 1, "samples must be positive");
    require(sample_radius > 0.0 && stencil_h > 0.0 && inner_tol > 0.0, "radii and tolerances must be positive");
    require(stencil_directions >= 1, "stencil_directions must be positive");
    require(rank_tol > 0.0 && rank_tol < 1.0, "rank_tol must lie in (0, 1)");
    require(bandwidth <= 256, "reduce bandwidth must be at most 256");
  }
}

void to_json(json& j, const ExperimentConfig& c) {
  j = json{{"command", c.command},
           {"bandwidth", c.bandwidth},
           {"max_level", c.max_level},
           {"seed", c.seed},
           {"epsilon", c.epsilon},
           {"y_decay", c.y_decay},
           {"y_norm", c.y_norm},
           {"plain", c.plain},
           {"solver", c.solver},
           {"cutoff", c.cutoff},
           {"p", c.p},
           {"levels", c.levels},
           {"trials", c.trials},
           {"t_points", c.t_points},
           {"operators", c.operators},
           {"rank_tol", c.rank_tol},
           {"perturbations", c.perturbations},
           {"perturbation_rank", c.perturbation_rank},
           {"perturbation_scale", c.perturbation_scale},
           {"composition_pairs", c.composition_pairs},
           {"pairs", c.pairs},
           {"level", c.level},
           {"shift_fraction", c.shift_fraction},
           {"n_min", c.n_min},
           {"n_max", c.n_max},
           {"loss_level", c.loss_level},
           {"continuity_floor", c.continuity_floor},
           {"overlap_ceiling", c.overlap_ceiling},
           {"loss_floor", c.loss_floor},
           {"slope_min", c.slope_min},
           {"slope_max", c.slope_max},
           {"x0_norm", c.x0_norm},
           {"samples", c.samples},
           {"sample_radius", c.sample_radius},
           {"stencil_h", c.stencil_h},
           {"stencil_directions", c.stencil_directions},
           {"inner_tol", c.inner_tol}};
}

void from_json(const json& j, ExperimentConfig& c) {
  if (!j.is_object()) throw UsageError("config must be a JSON object");
  const json known = ExperimentConfig{};
  for (const auto& [key, value] : j.items()) {
    if (key == "config_sha256") continue;
    if (!known.contains(key)) throw UsageError("unknown config key '" + key + "'");
  }
  try {
    read_key(j, "command", c.command);
    read_key(j, "bandwidth", c.bandwidth);
    read_key(j, "max_level", c.max_level);
    read_key(j, "seed", c.seed);
    read_key(j, "epsilon", c.epsilon);
    read_key(j, "y_decay", c.y_decay);
    read_key(j, "y_norm", c.y_norm);
    read_key(j, "plain", c.plain);
    if (j.contains("solver")) from_json(j.at("solver"), c.solver);
    read_key(j, "cutoff", c.cutoff);
    read_key(j, "p", c.p);
    read_key(j, "levels", c.levels);
    read_key(j, "trials", c.trials);
    read_key(j, "t_points", c.t_points);
    read_key(j, "operators", c.operators);
    read_key(j, "rank_tol", c.rank_tol);
    read_key(j, "perturbations", c.perturbations);
    read_key(j, "perturbation_rank", c.perturbation_rank);
    read_key(j, "perturbation_scale", c.perturbation_scale);
    read_key(j, "composition_pairs", c.composition_pairs);
    read_key(j, "pairs", c.pairs);
    read_key(j, "level", c.level);
    read_key(j, "shift_fraction", c.shift_fraction);
    read_key(j, "n_min", c.n_min);
    read_key(j, "n_max", c.n_max);
    read_key(j, "loss_level", c.loss_level);
    read_key(j, "continuity_floor", c.continuity_floor);
    read_key(j, "overlap_ceiling", c.overlap_ceiling);
    read_key(j, "loss_floor", c.loss_floor);
    read_key(j, "slope_min", c.slope_min);
    read_key(j, "slope_max", c.slope_max);
    read_key(j, "x0_norm", c.x0_norm);
    read_key(j, "samples", c.samples);
    read_key(j, "sample_radius", c.sample_radius);
    read_key(j, "stencil_h", c.stencil_h);
    read_key(j, "stencil_directions", c.stencil_directions);
    read_key(j, "inner_tol", c.inner_tol);
  } catch (const json::exception& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  } catch (const std::invalid_argument& e) {
    throw UsageError(std::string("bad config value: ") + e.what());
  }
}

ExperimentConfig default_config(const std::string& command) {
  require(std::find(kCommands.begin(), kCommands.end(), command) != kCommands.end(),
          "unknown command '" + command + "'");
  ExperimentConfig c;
  c.command = command;
  if (command == "verify-smoothing") {
    c.bandwidth = 128;
    c.seed = 1;
  } else if (command == "fredholm") {
    c.bandwidth = 32;
    c.seed = 3;
    c.operators = catalog_operator_names();
  } else if (command == "tame-probe") {
    c.seed = 99;
    c.levels = 4;
    c.trials = 64;
  } else if (command == "reparam-demo") {
    c.bandwidth = 512;
    c.seed = 11;
  } else if (command == "reduce") {
    c.seed = 31;
  }
  return c;
}

ExperimentConfig apply_overrides(const ExperimentConfig& base, const json& overrides) {
  if (!overrides.is_object()) throw UsageError("config must be a JSON object");
  if (overrides.contains("command") && overrides.at("command") != base.command) {
    throw UsageError("config is for command " + overrides.at("command").dump() + ", not " + base.command);
  }
  ExperimentConfig out = base;
  from_json(overrides, out);
  return out;
}

ExperimentConfig load_config_file(const fs::path& path) {
  const std::string text = read_text_file(path);
  json j;
  try {
    j = json::parse(text);
  } catch (const json::parse_error& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
  if (!j.is_object() || !j.contains("command")) throw UsageError(path.string() + ": missing command");
  return apply_overrides(default_config(j.at("command").get<std::string>()), j);
}

std::string canonical_json(const ExperimentConfig& c) { return json(c).dump(); }

std::string sha256_hex(const std::string& data) {
  unsigned char md[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  if (EVP_Digest(data.data(), data.size(), md, &len, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("SHA-256 digest failed");
  }
  return to_lower_hex(md, len);
}

std::string config_hash(const ExperimentConfig& c) { return sha256_hex(canonical_json(c)); }

GradedVector solve_target(const ExperimentConfig& c) {
  return scaled_random_vector(c.seed, c.bandwidth, c.y_decay, c.y_norm);
}

int run_command(const ExperimentConfig& c, const fs::path& out, std::ostream& log) {
  c.validate();
  if (c.command == "verify-smoothing") return cmd_verify_smoothing(c, out, log);
  if (c.command == "fredholm") return cmd_fredholm(c, out, log);
  if (c.command == "solve") return cmd_solve(c, out, log);
  if (c.command == "tame-probe") return cmd_tame_probe(c, out, log);
  if (c.command == "reparam-demo") return cmd_reparam_demo(c, out, log);
  return cmd_reduce(c, out, log);
}

int run_report(const std::vector<fs::path>& inputs, const fs::path& out, std::ostream& log) {
  std::vector<Artifact> artifacts;
  std::set<std::string> hashed;
  json input_files = json::array();
  auto record = [&](const fs::path& p, const std::string& content) {
    const std::string key = p.generic_string();
    if (!hashed.insert(key).second) return;
    input_files.push_back({{"file", key}, {"sha256", sha256_hex(content)}});
  };

  for (const auto& dir : inputs) {
    if (!fs::is_directory(dir)) throw IoError(dir.string() + " is not a directory");
    std::vector<fs::path> entries;
    for (const auto& e : fs::directory_iterator(dir)) {
      if (e.is_regular_file()) entries.push_back(e.path());
    }
    std::sort(entries.begin(), entries.end());
    for (const auto& p : entries) {
      const std::string name = p.filename().string();
      if (p.extension() != ".json" || name == "report.json") continue;
      if (name.size() > 12 && name.ends_with(".config.json")) continue;
      const std::string text = read_text_file(p);
      json meta = json::parse(text, nullptr, false);
      if (meta.is_discarded() || !meta.is_object() || !meta.contains("command") ||
          !meta.contains("config_sha256") || !meta.contains("result")) {
        continue;
      }
      record(dir / name, text);
      const std::string cfg_name = meta.value("config_file", std::string());
      if (!cfg_name.empty()) record(dir / cfg_name, read_text_file(dir / cfg_name));
      for (const auto& [file, info] : meta.at("files").items()) {
        const std::string content = read_text_file(dir / file);
        if (sha256_hex(content) != info.at("sha256").get<std::string>()) {
          throw IoError((dir / file).string() + " does not match its recorded hash");
        }
        record(dir / file, content);
      }
      artifacts.push_back({dir, name, std::move(meta)});
    }
  }
  if (artifacts.empty()) throw IoError("no run artifacts found");

  std::ostringstream text;
  text << "nmscale report\n\ninputs:\n";
  for (const auto& f : input_files) {
    text << "  " << f.at("sha256").get<std::string>() << "  " << f.at("file").get<std::string>() << "\n";
  }
  text << "\n";
  json sections = json::array();
  bool all_pass = true;
  for (const auto& a : artifacts) {
    sections.push_back(summarize(a, text));
    all_pass = all_pass && a.meta.value("pass", false);
  }
  const json report = {{"inputs", input_files}, {"sections", sections}, {"all_pass", all_pass}};
  write_text_file(out / "report.txt", text.str());
  write_text_file(out / "report.json", dump_json(report));
  log << "report: " << artifacts.size() << " artifacts, " << input_files.size() << " input files\n";
  return kExitPass;
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Graded-scale Nash-Moser experiments"};
  app.name("nmscale");
  app.require_subcommand(1);

  const std::map<std::string, std::string> descriptions = {
      {"verify-smoothing", "Check both smoothing inequalities on random vectors"},
      {"fredholm", "Kernel, cokernel and index of the operator catalog, plus index laws"},
      {"solve", "Modified Newton solve of the Burgers-type map"},
      {"tame-probe", "Tame and injectivity constants of the Burgers-type map"},
      {"reparam-demo", "Continuity failure and derivative loss of the rotation action"},
      {"reduce", "Finite-dimensional reduction on the rank-one perturbed fixture"}};

  std::map<std::string, std::unique_ptr<SubcommandState>> states;
  for (const auto& name : kCommands) {
    auto st = std::make_unique<SubcommandState>();
    st->cfg = default_config(name);
    CLI::App* sub = app.add_subcommand(name, descriptions.at(name));
    st->app = sub;
    add_common(sub, *st);
    ExperimentConfig& c = st->cfg;
    if (name == "verify-smoothing") {
      sub->add_option("--cutoff", c.cutoff, "sharp or ramp")->capture_default_str();
      sub->add_option("--p", c.p, "Exponent p of the smoothing inequalities")->capture_default_str();
      sub->add_option("--levels", c.levels, "Largest level m, n checked")->capture_default_str();
      sub->add_option("--trials", c.trials, "Random vectors per (m, n, t)")->capture_default_str();
      sub->add_option("--t-points", c.t_points, "Uniform t-values before adding thresholds")
          ->capture_default_str();
    } else if (name == "fredholm") {
      sub->add_option("--operators", c.operators, "Catalog operators (comma separated)")
          ->delimiter(',');
      sub->add_option("--rank-tol", c.rank_tol, "Relative singular value cut")->capture_default_str();
      sub->add_option("--perturbations", c.perturbations, "Strongly smoothing K per operator")
          ->capture_default_str();
      sub->add_option("--perturbation-rank", c.perturbation_rank, "Rank of each K")->capture_default_str();
      sub->add_option("--perturbation-scale", c.perturbation_scale, "Level-0 norm of each K")
          ->capture_default_str();
      sub->add_option("--composition-pairs", c.composition_pairs, "Seeded pairs for ind(AB)")
          ->capture_default_str();
    } else if (name == "solve") {
      add_solver_flags(sub, *st);
    } else if (name == "tame-probe") {
      sub->add_option("--epsilon", c.epsilon, "Nonlinearity strength")->capture_default_str();
      sub->add_option("--levels", c.levels, "Largest level j")->capture_default_str();
      sub->add_option("--trials", c.trials, "Samples (doubled for the stability check)")
          ->capture_default_str();
      sub->add_option("--pairs", c.pairs, "Injectivity pairs (doubled for the stability check)")
          ->capture_default_str();
    } else if (name == "reparam-demo") {
      sub->add_option("--level", c.level, "Level k of the continuity experiment")->capture_default_str();
      sub->add_option("--shift", c.shift_fraction, "Shift t in units of 2 pi")->capture_default_str();
      sub->add_option("--n-min", c.n_min, "Smallest bump index")->capture_default_str();
      sub->add_option("--n-max", c.n_max, "Largest bump index")->capture_default_str();
      sub->add_option("--loss-level", c.loss_level, "Level j of the derivative-loss probe")
          ->capture_default_str();
      sub->add_option("--continuity-floor", c.continuity_floor, "Required lower bound on d_n")
          ->capture_default_str();
      sub->add_option("--loss-floor", c.loss_floor, "Required lower bound on the rough remainder")
          ->capture_default_str();
    } else if (name == "reduce") {
      sub->add_option("--epsilon", c.epsilon, "Nonlinearity strength")->capture_default_str();
      sub->add_option("--x0-norm", c.x0_norm, "Level-0 norm of the base point")->capture_default_str();
      sub->add_option("--samples", c.samples, "Sampled points")->capture_default_str();
      sub->add_option("--sample-radius", c.sample_radius, "Level-0 distance of samples from x0")
          ->capture_default_str();
      sub->add_option("--stencil-h", c.stencil_h, "Finite-difference step")->capture_default_str();
      sub->add_option("--rank-tol", c.rank_tol, "Relative singular value cut")->capture_default_str();
    }
    states[name] = std::move(st);
  }

  std::vector<std::string> report_in;
  std::string report_out;
  CLI::App* report = app.add_subcommand("report", "Summarize run artifacts from one or more directories");
  report->add_option("--in", report_in, "Directory with run artifacts")->required();
  report->add_option("--out", report_out, "Output directory (default: first --in)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitPass : kExitUsage;
  }

  try {
    if (report->parsed()) {
      std::vector<fs::path> dirs(report_in.begin(), report_in.end());
      return run_report(dirs, report_out.empty() ? dirs.front() : fs::path(report_out), out);
    }
    for (auto& [name, st] : states) {
      if (!st->app->parsed()) continue;
      ExperimentConfig cfg = st->cfg;
      if (name == "solve") cfg.solver.smoothing = cutoff_from_string(st->smoothing);
      if (!st->config_path.empty()) {
        const std::string text = read_text_file(st->config_path);
        json j;
        try {
          j = json::parse(text);
        } catch (const json::parse_error& e) {
          throw UsageError(st->config_path + ": " + e.what());
        }
        cfg = apply_overrides(cfg, j);
      }
      return run_command(cfg, st->out, out);
    }
  } catch (const UsageError& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const IoError& e) {
    err << "io error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const fs::filesystem_error& e) {
    err << "io error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const json::exception& e) {
    err << "io error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::invalid_argument& e) {
    err << "usage error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "experiment failed: " << e.what() << "\n";
    return kExitNegative;
  }
  return kExitUsage;
}

}  // namespace nmscale::cli
