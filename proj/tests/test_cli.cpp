#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <filesystem>
#include <sstream>
#include <string>
#include <vector>

#include "nmscale/cli.hpp"
#include "nmscale/io.hpp"

using namespace nmscale;
using namespace nmscale::cli;
namespace fs = std::filesystem;

namespace {

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "nmscale");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  return run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("nmscale_test_cli_" + name);
  fs::remove_all(p);
  return p;
}

nlohmann::json read_json(const fs::path& p) { return nlohmann::json::parse(read_text_file(p)); }

}  // namespace

TEST_CASE("SHA-256 known vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("config JSON") {
  const ExperimentConfig c = default_config("solve");
  const ExperimentConfig back = nlohmann::json(c).get<ExperimentConfig>();
  CHECK(canonical_json(back) == canonical_json(c));
  CHECK(config_hash(back) == config_hash(c));

  nlohmann::json bad = c;
  bad["bogus"] = 1;
  CHECK_THROWS_AS(bad.get<ExperimentConfig>(), UsageError);

  const ExperimentConfig o = apply_overrides(c, {{"seed", 5}});
  CHECK(o.seed == 5);
  CHECK(config_hash(o) != config_hash(c));
  CHECK_THROWS_AS(default_config("nope"), UsageError);
}

TEST_CASE("exit codes") {
  CHECK(run({"--help"}) == kExitPass);
  CHECK(run({}) == kExitUsage);
  CHECK(run({"solve", "--bogus"}) == kExitUsage);
  CHECK(run({"verify-smoothing", "--levels", "13", "--out", scratch("lv").string()}) == kExitUsage);
  CHECK(run({"verify-smoothing", "--trials", "0", "--out", scratch("tr").string()}) == kExitUsage);
  CHECK(run({"solve", "--bandwidth", "16", "--guard", "0", "--out", scratch("guard").string()}) == kExitNegative);
  CHECK(run({"report", "--in", scratch("empty").string()}) == kExitUsage);
  const fs::path empty = scratch("empty2");
  fs::create_directories(empty);
  CHECK(run({"report", "--in", empty.string()}) == kExitUsage);
}

TEST_CASE("solve artifacts, determinism and report") {
  const fs::path a = scratch("a");
  const fs::path b = scratch("b");
  const std::vector<std::string> args = {"solve", "--bandwidth", "32", "--tol", "1e-12"};
  auto with_out = [&](const fs::path& p) {
    auto v = args;
    v.push_back("--out");
    v.push_back(p.string());
    return v;
  };
  REQUIRE(run(with_out(a)) == kExitPass);
  REQUIRE(run(with_out(b)) == kExitPass);
  for (const char* f : {"solve.json", "solve.config.json", "trace.csv"}) {
    REQUIRE(fs::exists(a / f));
    CHECK(read_text_file(a / f) == read_text_file(b / f));
  }
  const nlohmann::json meta = read_json(a / "solve.json");
  CHECK(meta.at("pass") == true);
  CHECK(meta.at("files").at("trace.csv").at("sha256") == sha256_hex(read_text_file(a / "trace.csv")));

  // Rerun from the written config reproduces the outputs.
  const fs::path c = scratch("c");
  REQUIRE(run({"solve", "--config", (a / "solve.config.json").string(), "--out", c.string()}) == kExitPass);
  CHECK(read_text_file(c / "trace.csv") == read_text_file(a / "trace.csv"));

  REQUIRE(run({"report", "--in", a.string()}) == kExitPass);
  const nlohmann::json rep = read_json(a / "report.json");
  REQUIRE(rep.at("sections").size() == 1);
  const auto& s = rep.at("sections")[0];
  CHECK(s.at("command") == "solve");
  CHECK(s.at("slope").is_number());
  CHECK(s.at("slope").get<double>() < 0.0);
  CHECK(rep.at("all_pass") == true);
  CHECK(fs::exists(a / "report.txt"));

  // A tampered artifact is rejected.
  write_text_file(b / "trace.csv", read_text_file(b / "trace.csv") + "\n");
  CHECK(run({"report", "--in", b.string()}) == kExitUsage);
}

TEST_CASE("config file takes precedence over flags") {
  const fs::path dir = scratch("prec");
  fs::create_directories(dir);
  write_text_file(dir / "cfg.json", R"({"command": "solve", "seed": 9, "bandwidth": 16})");
  REQUIRE(run({"solve", "--seed", "5", "--config", (dir / "cfg.json").string(), "--out", (dir / "o").string()}) ==
          kExitPass);
  const nlohmann::json cfg = read_json(dir / "o" / "solve.config.json");
  CHECK(cfg.at("seed") == 9);
  CHECK(cfg.at("bandwidth") == 16);

  write_text_file(dir / "bad.json", R"({"command": "solve", "sed": 9})");
  CHECK(run({"solve", "--config", (dir / "bad.json").string(), "--out", (dir / "o2").string()}) == kExitUsage);
  write_text_file(dir / "broken.json", "{");
  CHECK(run({"solve", "--config", (dir / "broken.json").string(), "--out", (dir / "o3").string()}) == kExitUsage);
}
