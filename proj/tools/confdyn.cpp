#include "confdyn/config.hpp"
#include "confdyn/error.hpp"

#include "CLI11.hpp"

#include <iostream>

int main(int argc, char** argv) {
  CLI::App app{"Conformal dynamics simulator and certificate suite"};
  std::string config_path;
  std::string verify_scope;
  bool list_models = false;
  confdyn::RunOptions opt;
  std::uint64_t seed = 0;
  std::string out_dir;
  unsigned jobs = 1;
  bool no_timestamp = false;

  app.add_option("--config", config_path, "run description (key = value file)")->check(CLI::ExistingFile);
  auto* seed_opt = app.add_option("--seed", seed, "overrides run.seed");
  auto* out_opt = app.add_option("--out", out_dir, "output directory, overrides output.dir");
  auto* jobs_opt = app.add_option("--jobs", jobs, "worker threads (0 = all cores)");
  app.add_flag("--no-timestamp", no_timestamp, "omit the generated-at line and JSON field");
  app.add_option("--verify", verify_scope, "run the certificate suite for a scope (all, geometry, models, "
                                           "flow-engine, diagnostics, diagnostics-negative-controls)");
  app.add_flag("--list-models", list_models, "print registered models and their parameters");
  CLI11_PARSE(app, argc, argv);

  if (*seed_opt) opt.seed = seed;
  if (*out_opt) opt.out_dir = out_dir;
  if (*jobs_opt) opt.jobs = jobs;
  opt.timestamp = !no_timestamp;

  const int chosen = int(!config_path.empty()) + int(!verify_scope.empty()) + int(list_models);
  if (chosen != 1) {
    std::cerr << "error: give exactly one of --config, --verify, --list-models\n" << app.help();
    return 1;
  }
  if (!config_path.empty()) return confdyn::run_config_file(config_path, opt, std::cout, std::cerr);

  confdyn::RunConfig cfg = confdyn::RunConfig::parse("");
  if (list_models) {
    cfg.set("operation", "list-models");
  } else {
    cfg.set("operation", "verify");
    cfg.set("verify.scope", verify_scope);
  }
  return confdyn::run_config(cfg, opt, std::cout, std::cerr);
}
