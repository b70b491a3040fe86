#include "doctest.h"

#include "confdyn/config.hpp"
#include "confdyn/error.hpp"
#include "confdyn/verify.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <sstream>

using namespace confdyn;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("confdyn_test_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::ostringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

int run(const std::string& text, const fs::path& dir, std::string* err_out = nullptr, bool timestamp = false) {
  RunOptions opt;
  opt.out_dir = dir.string();
  opt.timestamp = timestamp;
  std::ostringstream log, err;
  const int code = [&] {
    try {
      return run_config(RunConfig::parse(text), opt, log, err);
    } catch (const Error& e) {
      err << e.what();
      return 1;
    }
  }();
  if (err_out) *err_out = err.str();
  return code;
}

}  // namespace

TEST_CASE("config parsing") {
  const auto cfg = RunConfig::parse(
      "# header\n"
      "operation = simulate   # trailing\n"
      "model = circle-linear\n"
      "[model]\n"
      "alpha = 0.5\n"
      "[run]\n"
      "x0 = (0.25, 1)\n"
      "t = 5\n"
      "[output]\n"
      "name = \"a # b\"\n");
  CHECK(cfg.operation() == "simulate");
  CHECK(cfg.model_name() == "circle-linear");
  CHECK(cfg.num("model.alpha") == 0.5);
  CHECK(cfg.vec("run.x0") == std::vector<double>{0.25, 1.0});
  CHECK(cfg.str("output.name") == "a # b");
  CHECK(cfg.model().alpha == 0.5);
  CHECK(cfg.integer("run.samples", 3) == 3);

  const auto pts = RunConfig::parse("[basin]\ntargets = (0, 0), (0.5, 0)\n").points("basin.targets");
  REQUIRE(pts.size() == 2);
  CHECK(pts[1] == std::vector<double>{0.5, 0.0});

  auto message = [](const std::string& text) {
    try {
      RunConfig::parse(text, "f.conf");
    } catch (const Error& e) {
      CHECK(e.code() == ErrorCode::Config);
      return std::string(e.what());
    }
    return std::string();
  };
  CHECK(message("operation = simulate\n\n[run]\nspeed = 1\n").find("f.conf:4: unknown key 'run.speed'") !=
        std::string::npos);
  CHECK(message("model = circle-linear\n[model]\nbeta = 1\n").find("f.conf:3") != std::string::npos);
  CHECK(message("model = nope\n").find("unknown model") != std::string::npos);
  CHECK(message("operation = dance\n").find("unknown operation") != std::string::npos);
  CHECK(message("[run]\nt = 1\nt = 2\n").find("duplicate") != std::string::npos);
  CHECK(message("just words\n").find("f.conf:1") != std::string::npos);
  CHECK(message("[run\n").find("section") != std::string::npos);
  CHECK(message("[model]\nalpha = 1\n").find("without 'model'") != std::string::npos);

  const auto bad = RunConfig::parse("[run]\nt = five\nx0 = (1, b)\nsteps = 1.5\n", "g.conf");
  CHECK_THROWS_WITH_AS(bad.num("run.t"), doctest::Contains("g.conf:2"), Error);
  CHECK_THROWS_AS(bad.vec("run.x0"), Error);
  CHECK_THROWS_AS(bad.integer("run.steps", 0), Error);
  CHECK_THROWS_AS(bad.num("run.missing"), Error);
  CHECK_THROWS_AS(RunConfig::parse("[integrator]\nmethod = euler\n").integrator(), Error);
}

TEST_CASE("run_config: simulate echoes the initial condition") {
  const auto dir = scratch_dir("simulate");
  const int code = run("operation = simulate\nmodel = circle-linear\n[model]\nalpha = 1\n"
                       "[run]\nt = 5\nx0 = (0.25, 1)\n",
                       dir);
  CHECK(code == 0);
  std::istringstream csv(slurp(dir / "trajectory.csv"));
  std::string header, first;
  std::getline(csv, header);
  std::getline(csv, first);
  CHECK(header == "t,x0,x1");
  CHECK(first == "0,0.25,1");
}

TEST_CASE("run_config: conformality of the non-exact map") {
  const auto dir = scratch_dir("diagnose");
  const int code = run("operation = diagnose\nmodel = nonexact-linear\n[diagnose]\ncheck = conformality\n", dir);
  CHECK(code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j["schema"] == 1);
  CHECK_FALSE(j.contains("generated_at"));
  const auto& c = j["checks"][0];
  CHECK(c["verdict"] == "PASS");
  CHECK(c["residual"].get<double>() < 1e-12);
  CHECK(std::abs(c["values"]["ratio"].get<double>() - (7.0 - 3.0 * std::sqrt(5.0)) / 2.0) < 1e-12);

  // the literal scale fails the same check: exit 2
  CHECK(run("operation = diagnose\nmodel = nonexact-linear\n[model]\nr_scale = 0.3819660112501051\n"
            "[diagnose]\ncheck = conformality\n",
            dir) == 2);
}

TEST_CASE("run_config: errors exit 1") {
  const auto dir = scratch_dir("errors");
  std::string err;
  CHECK(run("operation = simulate\nmodel = no-such-model\n", dir, &err) == 1);
  CHECK(err.find("unknown model") != std::string::npos);
  CHECK(run("operation = verify\n[verify]\nscope = unknown-scope\n", dir, &err) == 1);
  CHECK(err.find("unknown-scope") != std::string::npos);
  CHECK(run("operation = simulate\nmodel = circle-linear\n[run]\nt = 1\n", dir, &err) == 1);
  CHECK(err.find("run.x0") != std::string::npos);
  CHECK(run("operation = simulate\nmodel = circle-linear\n[run]\nt = 1\nx0 = (1, 2, 3)\n", dir) == 1);
  CHECK(run("operation = diagnose\nmodel = circle-linear\n[diagnose]\ncheck = magic\n", dir) == 1);
  // a basin grid needs targets
  CHECK(run("operation = basin\nmodel = circle-linear\n[basin]\nlo = (0, -1)\nhi = (1, 1)\n", dir, &err) == 1);
  CHECK(err.find("basin.targets") != std::string::npos);
  std::ostringstream log, err2;
  CHECK(run_config_file("/nonexistent/x.conf", {}, log, err2) == 1);
}

TEST_CASE("run_config: outputs are reproducible") {
  const auto a = scratch_dir("repro_a");
  const auto b = scratch_dir("repro_b");
  const std::string text =
      "operation = classify\nmodel = t2-pair-theta2\n[run]\nstarts = 12\nseed = 3\nt = 5\n";
  RunOptions o1, o4;
  o1.out_dir = a.string();
  o1.timestamp = false;
  o1.jobs = 1;
  o4 = o1;
  o4.out_dir = b.string();
  o4.jobs = 4;
  std::ostringstream log, err;
  const auto cfg = RunConfig::parse(text);
  REQUIRE(run_config(cfg, o1, log, err) == 0);
  REQUIRE(run_config(cfg, o4, log, err) == 0);
  CHECK(slurp(a / "classify.csv") == slurp(b / "classify.csv"));

  // the seed flag overrides run.seed
  o4.seed = 4;
  REQUIRE(run_config(cfg, o4, log, err) == 0);
  CHECK(slurp(a / "classify.csv") != slurp(b / "classify.csv"));

  // timestamped output differs only in its first line
  o1.timestamp = true;
  REQUIRE(run_config(cfg, o1, log, err) == 0);
  const std::string stamped = slurp(a / "classify.csv");
  CHECK(stamped.rfind("# generated ", 0) == 0);
  o1.timestamp = false;
  REQUIRE(run_config(cfg, o1, log, err) == 0);
  CHECK(stamped.substr(stamped.find('\n') + 1) == slurp(a / "classify.csv"));
  CHECK_FALSE(fs::exists(a / "classify.csv.tmp"));
}

TEST_CASE("run_config: periodic and list-models") {
  const auto dir = scratch_dir("periodic");
  CHECK(run("operation = periodic\nmodel = t2-pair-theta2\n[run]\nx0 = (0, 0.02)\n", dir) == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "periodic.json"));
  CHECK(std::abs(j["checks"][0]["values"]["period"].get<double>() - 1.0 / (2.0 * std::numbers::pi)) < 1e-8);
  CHECK(fs::exists(dir / "periodic_orbit.csv"));
  std::ostringstream log, err;
  CHECK(run_config(RunConfig::parse("operation = list-models\n"), {}, log, err) == 0);
  CHECK(log.str().find("damped-mechanical  [d, alpha, V0, V]") != std::string::npos);
}

TEST_CASE("verify suite") {
  CHECK(verify_checks().size() >= 18);
  for (const auto& c : verify_checks()) {
    const auto& scopes = verify_scopes();
    CHECK(std::find(scopes.begin() + 1, scopes.end(), c.scope) != scopes.end());
  }
  CHECK_THROWS_AS(verify_suite("unknown-scope"), Error);

  const auto r = verify_suite("diagnostics-negative-controls");
  REQUIRE(r.entries.size() >= 2);
  bool found = false;
  for (const auto& e : r.entries) {
    CHECK(e.verdict == Verdict::NegativeControl);
    if (e.check == "recurrence-rational-beta") {
      found = true;
      CHECK(e.values.at("min_return_dist") < 1e-6);
    }
  }
  CHECK(found);

  const auto g = verify_suite("geometry");
  CHECK(g.all_passed());
  CHECK(g.entries.size() == 3);
}
