#include <cstdint>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "mpmcd/cli/commands.hpp"

using namespace mpmcd;

namespace {

cli::ExperimentConfig load_config(const std::string& path) {
  if (path.empty()) return {};
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return cli::config_from_string(ss.str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Differentiable MPM soft-robot co-design toolkit"};
  app.require_subcommand(1);

  std::string config_path;
  std::string out = "run";
  std::uint64_t seed = 0;
  bool deterministic = false;
  int threads = 1;
  app.add_option("--seed", seed, "Master seed")->envname("MPMCD_SEED");
  app.add_flag("--deterministic", deterministic, "Fixed reduction order (forces one thread)")
      ->envname("MPMCD_DETERMINISTIC");
  app.add_option("--threads", threads, "Worker threads")->envname("MPMCD_THREADS")->check(CLI::PositiveNumber);

  auto with_io = [&](CLI::App* sub) {
    sub->add_option("--config", config_path, "Experiment config (JSON)")->envname("MPMCD_CONFIG");
    sub->add_option("--out", out, "Output directory")->envname("MPMCD_OUT");
    sub->fallthrough();
    return sub;
  };
  auto* simulate = with_io(app.add_subcommand("simulate", "Forward rollout with trajectory export"));
  auto* optimize = with_io(app.add_subcommand("optimize", "Run the configured optimizer"));
  auto* codesign = with_io(app.add_subcommand("codesign", "Joint design and control optimization"));
  auto* sweep = with_io(app.add_subcommand("sweep", "One-parameter loss landscape"));
  auto* gradcheck = with_io(app.add_subcommand("gradcheck", "Adjoint vs finite differences"));
  Real threshold = 1e-4;
  gradcheck->add_option("--threshold", threshold, "Max relative error to pass");
  auto* validate = app.add_subcommand("validate", "Check a run directory against the artifact schema");
  std::string dir;
  validate->add_option("dir", dir, "Run directory")->required();
  auto* dump = app.add_subcommand("config", "Print the effective config as JSON");
  dump->add_option("--config", config_path, "Experiment config (JSON)")->envname("MPMCD_CONFIG");

  CLI11_PARSE(app, argc, argv);

  if (validate->parsed()) return cli::cmd_validate(dir);

  cli::RunOptions opt;
  opt.out = out;
  opt.seed = seed;
  opt.deterministic = deterministic || threads == 1;
  opt.threads = deterministic ? 1 : threads;

  cli::ExperimentConfig config;
  try {
    config = load_config(config_path);
  } catch (const Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return cli::kExitConfig;
  }
  if (dump->parsed()) {
    std::cout << cli::to_json(config).dump(2) << '\n';
    return cli::kExitOk;
  }
  if (simulate->parsed()) return cli::cmd_simulate(config, opt);
  if (optimize->parsed()) return cli::cmd_optimize(config, opt);
  if (codesign->parsed()) return cli::cmd_codesign(config, opt);
  if (sweep->parsed()) return cli::cmd_sweep(config, opt);
  if (gradcheck->parsed()) return cli::cmd_gradcheck(config, opt, threshold);
  return cli::kExitConfig;
}
