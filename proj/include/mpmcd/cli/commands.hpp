#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "mpmcd/autodiff/grad_check.hpp"
#include "mpmcd/cli/config.hpp"
#include "mpmcd/control/open_loop.hpp"
#include "mpmcd/control/sine.hpp"
#include "mpmcd/design/annotate.hpp"
#include "mpmcd/design/io.hpp"
#include "mpmcd/design/networks.hpp"
#include "mpmcd/design/particle_voxel.hpp"
#include "mpmcd/design/sdf_lerp.hpp"
#include "mpmcd/environment/sampling.hpp"
#include "mpmcd/optimize/artifacts.hpp"
#include "mpmcd/optimize/multiseed.hpp"
#include "mpmcd/optimize/sweep.hpp"
#include "mpmcd/tasks/path.hpp"
#include "mpmcd/tasks/rewards.hpp"

namespace mpmcd::cli {

namespace fs = std::filesystem;

inline constexpr int kExitOk = 0;
inline constexpr int kExitConfig = 1;
inline constexpr int kExitSimulation = 2;
inline constexpr int kExitCheckFailed = 3;

struct RunOptions {
  fs::path out = "run";
  std::uint64_t seed = 0;
  bool deterministic = true;
  int threads = 1;
  std::ostream* log = &std::cerr;
};

/// Everything a command needs, built from a config and one seed.
struct Experiment {
  CodesignEnv<2> env;
  std::vector<Vec<2>> base;
  Real m0 = 0;
  std::unique_ptr<DesignDecoder<2>> decoder;
  std::unique_ptr<Controller<2>> controller;
  std::uint64_t cmaes_seed = 0;
};

namespace detail {

inline Vec<2> vec(const Pair& p) { return Vec<2>(p[0], p[1]); }

inline std::vector<DesignPrimitive<2>> default_primitives(const std::vector<Vec<2>>& base, const DesignConfig& d,
                                                          std::uint64_t seed) {
  // Full box and a shrunken box, each with its own k-means muscle layout.
  const Vec<2> lo = vec(d.lo), hi = vec(d.hi);
  const Vec<2> c = 0.5 * (lo + hi), half = 0.5 * (hi - lo);
  std::vector<DesignPrimitive<2>> out;
  for (int i = 0; i < 2; ++i) {
    VecX r0 = VecX::Zero(d.actuators);
    r0[0] = 1;
    auto p = box_primitive<2>(base, c, i == 0 ? half : Vec<2>(0.75 * half), 1.0, r0);
    const auto ann = annotate_muscles<2>(base, d.actuators, canonical_heading<2>(), seed + i);
    p.r = ann.r;
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace detail

inline Experiment build_experiment(const ExperimentConfig& c, std::uint64_t seed, bool deterministic = true,
                                   int threads = 1) {
  validate(c);
  std::mt19937_64 rng(seed);
  Experiment ex;
  auto& env = ex.env;
  env.cfg = c.sim_config(deterministic, threads);
  env.biome = default_biome(biome_from_string(c.scene.biome), c.scene.ground_height);
  if (c.scene.fluid_level >= 0) env.biome.fluid_level = c.scene.fluid_level;
  const std::uint64_t terrain_seed = rng();
  if (c.scene.terrain == "flat") {
    env.terrain = TerrainSDF<2>::flat(c.scene.ground_height, env.cfg.domain);
  } else if (c.scene.terrain == "perlin") {
    env.terrain = gen_heightmap<2>(terrain_seed, c.scene.heightmap);
  }
  env.placement.offset = detail::vec(c.scene.offset);
  env.placement.drop_to_ground = c.scene.drop_to_ground;
  env.placement.clearance = c.scene.clearance;
  env.scene.robot_material = MaterialParams::from_youngs(MaterialModel::NeoHookean, c.scene.youngs, c.scene.poisson);
  env.scene.stiffness_floor = c.scene.stiffness_floor;
  env.T = c.optimizer.substeps;
  env.N = c.optimizer.checkpoint;

  const auto& t = c.task;
  if (t.type == "speed") {
    const Vec<2> dir = detail::vec(t.direction);
    if (!(dir.norm() > 0)) throw ConfigError("task.direction must be nonzero");
    env.task = SpeedTask<2>{dir.normalized()};
  } else if (t.type == "turning") {
    env.task = TurningTask<2>{};
  } else {
    const Vec<2> z = Vec<2>::Zero();
    env.task = WaypointTask<2>{quintic_fit<2>(detail::vec(t.start), z, z, detail::vec(t.target), z, z, t.duration)};
  }

  const auto& d = c.design;
  const Real h = d.spacing > 0 ? d.spacing : 0.5 * env.cfg.dx();
  ex.base = sample_box<2>(detail::vec(d.lo), detail::vec(d.hi), h);
  if (ex.base.size() < static_cast<std::size_t>(d.actuators)) throw ConfigError("design box holds too few particles");
  ex.m0 = h * h;
  const int K = d.actuators;
  const std::uint64_t design_seed = rng();
  if (d.representation == "box") {
    auto spec = DesignSpec<2>::uniform(ex.base, K, ex.m0, 1.0);
    const auto ann = annotate_muscles<2>(ex.base, K, canonical_heading<2>(), design_seed);
    spec.r = ann.r;
    spec.f = ann.f;
    ex.decoder = std::make_unique<FixedDesignDecoder<2>>(std::move(spec));
  } else if (d.representation == "particle") {
    ex.decoder = std::make_unique<ParticleDecoder<2>>(ex.base, K, ex.m0, 1.0);
  } else if (d.representation == "implicit" || d.representation == "cppn") {
    auto dec = d.representation == "implicit" ? make_implicit_decoder<2>(ex.base, K, ex.m0, 1.0)
                                              : make_cppn_decoder<2>(ex.base, K, ex.m0, 1.0);
    std::mt19937_64 wrng(design_seed);
    dec.randomize(wrng, 1.0);
    ex.decoder = std::make_unique<NetworkDecoder<2>>(std::move(dec));
  } else {
    std::vector<DesignPrimitive<2>> prims;
    for (const auto& path : d.primitives) prims.push_back(load_primitive<2>(path));
    if (prims.empty()) prims = detail::default_primitives(ex.base, d, design_seed);
    ex.decoder = std::make_unique<SdfLerpDecoder<2>>(ex.base, std::move(prims), K, ex.m0, 1.0);
  }

  const std::uint64_t control_seed = rng();
  if (c.controller.type == "sine") {
    std::mt19937_64 crng(control_seed);
    ex.controller = std::make_unique<SineController<2>>(SineControllerParams::random(K, crng, c.controller.scale));
  } else if (c.controller.type == "zero") {
    ex.controller = std::make_unique<SineController<2>>(SineControllerParams::zeros(K));
  } else {
    const long L = env.cfg.substeps_per_control;
    const int steps = static_cast<int>(std::max<long>(1, (env.T + L - 1) / L));
    ex.controller = std::make_unique<OpenLoopController<2>>(steps, K);
  }
  ex.cmaes_seed = rng();

  if (!d.params.empty()) {
    const auto p = read_params(d.params);
    if (p.design.size() > 0) ex.decoder->set_params(p.design);
    if (p.control.size() > 0) ex.controller->set_params(p.control);
  }
  return ex;
}

/// Maps library errors to exit codes: runtime failures of the simulation or
/// optimizer give 2, everything else (bad input) gives 1.
template <class F>
int guarded(std::ostream& log, F&& body) {
  try {
    return body();
  } catch (const NonInvertibleF& e) {
    log << "simulation error: " << e.what() << '\n';
    return kExitSimulation;
  } catch (const SimulationDiverged& e) {
    log << "simulation error: " << e.what() << '\n';
    return kExitSimulation;
  } catch (const NonFiniteGradient& e) {
    log << "optimization error: " << e.what() << '\n';
    return kExitSimulation;
  } catch (const AllRunsFailed& e) {
    log << "optimization error: " << e.what() << '\n';
    return kExitSimulation;
  } catch (const Error& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const nlohmann::json::exception& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const fs::filesystem_error& e) {
    log << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
}

inline void freeze_config(const fs::path& out, const ExperimentConfig& c, const RunOptions& opt) {
  auto j = to_json(c);
  j["scene"]["seed"] = opt.seed;
  write_json(out / "config.json", j);
}

inline ExperimentConfig with_seed(ExperimentConfig c, const RunOptions& opt) {
  c.scene.seed = opt.seed;
  return c;
}

// ---- simulate --------------------------------------------------------------

inline void write_snapshot_rows(std::ostream& out, const ParticleSystem<2>& ps, long step) {
  for (std::size_t p = 0; p < ps.size(); ++p) {
    out << step << ',' << p << ',' << (ps.label[p] == ParticleLabel::Robot ? "robot" : "cover") << ','
        << ps.x[p][0] << ',' << ps.x[p][1] << ',' << ps.v[p][0] << ',' << ps.v[p][1] << ',' << ps.m[p] << '\n';
  }
}

/// Forward rollout of the configured robot. Writes trajectory.csv (one block
/// of rows per control step plus the initial and final states), rewards.csv
/// and summary.json.
inline int cmd_simulate(const ExperimentConfig& config, const RunOptions& opt) {
  return guarded(*opt.log, [&] {
    const auto c = with_seed(config, opt);
    auto ex = build_experiment(c, opt.seed, opt.deterministic, opt.threads);
    const auto scene = ex.env.build(ex.decoder->decode());
    freeze_config(opt.out, c, opt);
    auto traj = open_output(opt.out / "trajectory.csv");
    traj.precision(17);
    traj << "step,particle,label,x,y,vx,vy,m\n";
    write_snapshot_rows(traj, scene.ps, 0);
    const long T = ex.env.T;
    const int L = ex.env.cfg.substeps_per_control;
    RewardLog rewards;
    const Vec<2> c0 = robot_centroid(scene.ps);
    Vec<2> c1 = c0;
    if (T > 0) {
      const TaskObjective<2> obj(ex.env.task, ex.env.cfg.dt);
      auto grid = GridField<2>::make(ex.env.cfg, ex.env.terrain);
      ParticleSystem<2> fin;
      rollout_loss<2>(
          scene.ps, *ex.controller, nullptr, grid, ex.env.cfg, T,
          [&](const ParticleSystem<2>& ps, long k) {
            if (is_eval_step(k, T, L)) rewards.add(k, -obj.evaluate(ps, k, k == T));
            if (k % L == 0 || k == T) write_snapshot_rows(traj, ps, k);
          },
          &fin);
      c1 = robot_centroid(fin);
    }
    rewards.write_csv((opt.out / "rewards.csv").string());
    write_json(opt.out / "summary.json",
               {{"substeps", T},
                {"mean_reward", rewards.mean()},
                {"centroid_initial", {c0[0], c0[1]}},
                {"centroid_final", {c1[0], c1[1]}},
                {"displacement", (c1 - c0).norm()}});
    *opt.log << "simulated " << T << " substeps, mean reward " << rewards.mean() << '\n';
    return kExitOk;
  });
}

// ---- optimize / codesign ----------------------------------------------------

namespace detail {

inline CodesignResult optimize_once(Experiment& ex, const ExperimentConfig& c, const fs::path& dir) {
  const auto mode = codesign_mode_from_string(c.optimizer.mode);
  if (c.optimizer.algorithm == "cmaes") {
    CmaesOptions co;
    co.mode = mode;
    co.rollout_budget = c.optimizer.budget;
    co.sigma0 = c.optimizer.sigma0;
    co.lambda = c.optimizer.lambda;
    co.seed = ex.cmaes_seed;
    return run_cmaes<2>(ex.env, *ex.decoder, *ex.controller, co);
  }
  CodesignOptions co;
  co.mode = mode;
  co.budget = c.optimizer.budget;
  co.lr = c.optimizer.lr;
  if (c.optimizer.snapshot_every > 0) {
    co.on_iteration = [&, every = c.optimizer.snapshot_every](int it) {
      if (it % every != 0) return;
      std::ostringstream name;
      name << "design_" << it << ".json";
      write_json(dir / "snapshots" / name.str(), design_json(ex.decoder->decode()));
    };
  }
  return run_codesign<2>(ex.env, *ex.decoder, *ex.controller, co);
}

}  // namespace detail

/// Runs the configured optimizer (optimizer.mode, optimizer.algorithm). With
/// optimizer.seeds > 1 every seed gets its own run under seed_<k>/ and the
/// best one is reported at the top level.
inline int cmd_optimize(const ExperimentConfig& config, const RunOptions& opt) {
  return guarded(*opt.log, [&] {
    const auto c = with_seed(config, opt);
    validate(c);
    freeze_config(opt.out, c, opt);
    const int n = c.optimizer.seeds;
    auto run = [&](std::uint64_t s) {
      const fs::path dir = n > 1 ? opt.out / ("seed_" + std::to_string(s - opt.seed)) : opt.out;
      auto ex = build_experiment(c, s, opt.deterministic, opt.threads);
      auto res = detail::optimize_once(ex, c, dir);
      if (n > 1) write_run(dir, res);
      return res;
    };
    const auto best = multi_seed_best<CodesignResult>(
        run, [](const CodesignResult& r) { return r.loss(); }, n, opt.seed);
    for (std::size_t i = 0; i < best.errors.size(); ++i) {
      if (!best.errors[i].empty()) *opt.log << "seed " << best.seeds[i] << " failed: " << best.errors[i] << '\n';
    }
    const auto& res = best.best();
    write_run(opt.out, res);
    *opt.log << "best reward " << res.best_reward << " after " << res.rollouts << " rollouts\n";
    return kExitOk;
  });
}

inline int cmd_codesign(ExperimentConfig config, const RunOptions& opt) {
  config.optimizer.mode = to_string(CodesignMode::Codesign);
  return cmd_optimize(config, opt);
}

// ---- sweep --------------------------------------------------------------------

/// Episode loss along one parameter (optimizer.sweep); writes sweep.csv with
/// one row per grid value and sweep.json with the strict interior minima.
inline int cmd_sweep(const ExperimentConfig& config, const RunOptions& opt) {
  return guarded(*opt.log, [&] {
    const auto c = with_seed(config, opt);
    auto ex = build_experiment(c, opt.seed, opt.deterministic, opt.threads);
    const auto& sw = c.optimizer.sweep;
    const bool design = sw.group == "design";
    const VecX p0 = design ? ex.decoder->params() : ex.controller->params();
    if (sw.index < 0 || sw.index >= p0.size()) {
      throw ConfigError("optimizer.sweep.index " + std::to_string(sw.index) + " outside the " + sw.group +
                        " parameters (" + std::to_string(p0.size()) + ")");
    }
    freeze_config(opt.out, c, opt);
    const auto res = sweep_1d(
        [&](Real v) {
          VecX p = p0;
          p[sw.index] = v;
          if (design) ex.decoder->set_params(p);
          else ex.controller->set_params(p);
          return evaluate_episode<2>(ex.env, *ex.decoder, *ex.controller, false).loss;
        },
        linspace(sw.lo, sw.hi, sw.points));
    auto out = open_output(opt.out / "sweep.csv");
    out.precision(17);
    out << "value,loss\n";
    for (std::size_t i = 0; i < res.values.size(); ++i) out << res.values[i] << ',' << res.losses[i] << '\n';
    write_json(opt.out / "sweep.json", {{"points", res.values.size()}, {"minima", res.minima}});
    *opt.log << res.num_minima() << " strict interior minima over " << res.values.size() << " points\n";
    return kExitOk;
  });
}

// ---- gradcheck ----------------------------------------------------------------

struct GradCheckSummary {
  Real max_rel_error = 0;
  Eigen::Index worst = -1;
  Eigen::Index num_control = 0;
  Eigen::Index num_stiffness = 0;
};

/// Adjoint vs central differences (h = 1e-5) of the final mean robot height
/// over `T` substeps, with respect to every controller parameter and the
/// stiffness of the first `n_stiffness` robot particles.
inline GradCheckSummary gradcheck_probe(const ParticleSystem<2>& ps0, const Controller<2>& ctl,
                                        GridField<2>& grid, const SimConfig<2>& cfg, long T, int N,
                                        std::size_t n_stiffness = 16) {
  const auto robot = ps0.robot_indices();
  const LambdaObjective<2> obj(
      [&](const ParticleSystem<2>& ps, long, bool final) {
        if (!final) return 0.0;
        Real y = 0;
        for (auto p : robot) y += ps.x[p][1];
        return y / static_cast<Real>(robot.size());
      },
      [&](const ParticleSystem<2>&, long, bool final, Real scale, ParticleAdjoint<2>& adj) {
        if (!final) return;
        for (auto p : robot) adj.x[p][1] += scale / static_cast<Real>(robot.size());
      });
  const std::size_t ns = std::min(n_stiffness, robot.size());
  const Eigen::Index nc = ctl.num_params();
  const auto res = rollout_grad<2>(ps0, ctl, obj, grid, cfg, T, std::min<long>(N, T));
  VecX analytic(nc + static_cast<Eigen::Index>(ns)), p0(analytic.size());
  analytic.head(nc) = res.controller_grad;
  p0.head(nc) = ctl.params();
  for (std::size_t i = 0; i < ns; ++i) {
    analytic[nc + static_cast<Eigen::Index>(i)] = res.adjoint.s[robot[i]];
    p0[nc + static_cast<Eigen::Index>(i)] = ps0.s[robot[i]];
  }
  auto f = [&](const VecX& p) {
    auto c = ctl.clone();
    c->set_params(p.head(nc));
    auto ps = ps0;
    for (std::size_t i = 0; i < ns; ++i) ps.s[robot[i]] = p[nc + static_cast<Eigen::Index>(i)];
    return rollout_loss<2>(ps, *c, &obj, grid, cfg, T);
  };
  const auto rep = grad_check_report(f, p0, analytic, 1e-5);
  return {rep.max_rel_error, rep.worst, nc, static_cast<Eigen::Index>(ns)};
}

/// Gradient check of the configured scene over optimizer.substeps; exit 3 if
/// the max relative error exceeds `threshold`.
inline int cmd_gradcheck(const ExperimentConfig& config, const RunOptions& opt, Real threshold = 1e-4) {
  return guarded(*opt.log, [&] {
    const auto c = with_seed(config, opt);
    auto ex = build_experiment(c, opt.seed, opt.deterministic, opt.threads);
    if (ex.env.T < 1) throw ConfigError("gradcheck needs optimizer.substeps >= 1");
    const auto scene = ex.env.build(ex.decoder->decode());
    freeze_config(opt.out, c, opt);
    auto grid = GridField<2>::make(ex.env.cfg, ex.env.terrain);
    const auto g = gradcheck_probe(scene.ps, *ex.controller, grid, ex.env.cfg, ex.env.T, ex.env.N);
    const bool pass = g.max_rel_error <= threshold;
    write_json(opt.out / "gradcheck.json", {{"max_rel_error", g.max_rel_error},
                                            {"worst_entry", g.worst},
                                            {"control_params", g.num_control},
                                            {"stiffness_params", g.num_stiffness},
                                            {"threshold", threshold},
                                            {"pass", pass}});
    std::cout << "max relative error " << g.max_rel_error << " (threshold " << threshold << "): "
              << (pass ? "PASS" : "FAIL") << '\n';
    return pass ? kExitOk : kExitCheckFailed;
  });
}

// ---- validate -------------------------------------------------------------------

namespace detail {

inline std::vector<std::string> split(const std::string& line) {
  std::vector<std::string> out;
  std::stringstream ss(line);
  std::string cell;
  while (std::getline(ss, cell, ',')) out.push_back(cell);
  return out;
}

/// Checks the header and that every row has the same number of numeric
/// cells (columns listed in `text_cols` may hold text). Returns data rows.
inline long check_csv(const fs::path& path, const std::string& header, std::vector<std::string>& problems,
                      const std::vector<std::size_t>& text_cols = {}) {
  std::ifstream in(path);
  std::string line;
  if (!std::getline(in, line) || line != header) {
    problems.push_back(path.filename().string() + ": expected header '" + header + "'");
    return -1;
  }
  const std::size_t ncol = split(header).size();
  long rows = 0;
  while (std::getline(in, line)) {
    ++rows;
    const auto cells = split(line);
    bool ok = cells.size() == ncol;
    for (std::size_t i = 0; ok && i < cells.size(); ++i) {
      if (std::find(text_cols.begin(), text_cols.end(), i) != text_cols.end()) continue;
      char* end = nullptr;
      std::strtod(cells[i].c_str(), &end);
      ok = end && *end == '\0' && !cells[i].empty();
    }
    if (!ok) {
      problems.push_back(path.filename().string() + ": malformed row " + std::to_string(rows));
      return rows;
    }
  }
  return rows;
}

}  // namespace detail

/// Validates a run directory: config.json must parse strictly and every
/// known artifact present must match its schema. Prints each problem.
inline int cmd_validate(const fs::path& dir, std::ostream& log = std::cerr) {
  std::vector<std::string> problems;
  if (!fs::is_directory(dir)) {
    log << "not a directory: " << dir.string() << '\n';
    return kExitConfig;
  }
  ExperimentConfig c;
  if (!fs::exists(dir / "config.json")) {
    problems.push_back("config.json missing");
  } else {
    try {
      c = config_from_json(read_json(dir / "config.json"));
    } catch (const Error& e) {
      problems.push_back(std::string("config.json: ") + e.what());
    }
  }
  if (fs::exists(dir / "log.csv")) {
    detail::check_csv(dir / "log.csv", "iter,reward,wall_time", problems);
    if (!fs::exists(dir / "params_best.json")) problems.push_back("params_best.json missing");
  }
  if (fs::exists(dir / "params_best.json")) {
    try {
      const auto j = read_json(dir / "params_best.json");
      for (const char* k : {"reward", "design", "control"}) {
        if (!j.contains(k)) problems.push_back(std::string("params_best.json: missing '") + k + "'");
      }
      if (j.contains("design") && !j["design"].is_array()) problems.push_back("params_best.json: design not an array");
      if (j.contains("control") && !j["control"].is_array()) problems.push_back("params_best.json: control not an array");
    } catch (const Error& e) {
      problems.push_back(e.what());
    }
  }
  if (fs::exists(dir / "trajectory.csv")) {
    detail::check_csv(dir / "trajectory.csv", "step,particle,label,x,y,vx,vy,m", problems, {2});
  }
  if (fs::exists(dir / "rewards.csv")) detail::check_csv(dir / "rewards.csv", "step,reward,cumulative", problems);
  if (fs::exists(dir / "sweep.csv")) {
    const long rows = detail::check_csv(dir / "sweep.csv", "value,loss", problems);
    if (rows >= 0 && rows != c.optimizer.sweep.points) {
      problems.push_back("sweep.csv: " + std::to_string(rows) + " rows, config asks for " +
                         std::to_string(c.optimizer.sweep.points));
    }
  }
  for (const auto& p : problems) log << p << '\n';
  if (problems.empty()) log << dir.string() << ": ok\n";
  return problems.empty() ? kExitOk : kExitConfig;
}

}  // namespace mpmcd::cli
