#pragma once

#include <chrono>
#include <cmath>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mpmcd/autodiff/rollout.hpp"
#include "mpmcd/control/controller.hpp"
#include "mpmcd/design/decoder.hpp"
#include "mpmcd/environment/scene.hpp"
#include "mpmcd/optimize/adam.hpp"
#include "mpmcd/optimize/cmaes.hpp"
#include "mpmcd/tasks/task.hpp"

namespace mpmcd {

enum class CodesignMode { ControlOnly, DesignOnly, Codesign };

inline const char* to_string(CodesignMode m) {
  switch (m) {
    case CodesignMode::ControlOnly: return "control_only";
    case CodesignMode::DesignOnly: return "design_only";
    case CodesignMode::Codesign: return "codesign";
  }
  return "?";
}

inline CodesignMode codesign_mode_from_string(const std::string& s) {
  for (auto m : {CodesignMode::ControlOnly, CodesignMode::DesignOnly, CodesignMode::Codesign}) {
    if (s == to_string(m)) return m;
  }
  throw ConfigError("unknown optimizer mode '" + s + "'");
}

inline bool optimizes_design(CodesignMode m) { return m != CodesignMode::ControlOnly; }
inline bool optimizes_control(CodesignMode m) { return m != CodesignMode::DesignOnly; }

/// Everything about an episode except the design and the controller.
template <int D>
struct CodesignEnv {
  BiomeSpec biome;
  TerrainSDF<D> terrain;
  Placement<D> placement;
  SceneOptions<D> scene;
  SimConfig<D> cfg;
  TaskSpec<D> task = SpeedTask<D>{};
  long T = 100;
  int N = 16;  // checkpoint interval

  Scene<D> build(const DesignSpec<D>& design) const {
    return assemble_scene<D>(biome, design, placement, terrain, cfg, scene);
  }
  long num_eval_steps() const {
    long n = 0;
    for (long k = 1; k <= T; ++k) n += is_eval_step(k, T, cfg.substeps_per_control) ? 1 : 0;
    return n;
  }
};

struct Evaluation {
  Real loss = 0;
  Real reward = 0;  // mean per-step reward
  VecX design_grad;
  VecX control_grad;
};

/// Pulls robot-particle design cotangents back onto the design fields.
template <int D>
DesignGrad<D> design_grad_from_adjoint(const Scene<D>& scene, const ParticleAdjoint<D>& adj,
                                       std::size_t n_design, int K, Real stiffness_floor = 0) {
  auto g = DesignGrad<D>::zeros(n_design, K);
  for (std::size_t p = 0; p < scene.num_robot; ++p) {
    const std::size_t i = scene.robot_to_design[p];
    g.m[i] += adj.m[p];
    g.s[i] += (1 - stiffness_floor) * adj.s[p];
    if (K > 0) g.r.col(static_cast<Eigen::Index>(i)) += adj.r.col(static_cast<Eigen::Index>(p));
    g.f[i] += adj.f[p];
  }
  return g;
}

/// Decodes, assembles and rolls out one episode; with_grad adds the design
/// and controller parameter gradients of the loss.
template <int D>
Evaluation evaluate_episode(const CodesignEnv<D>& env, const DesignDecoder<D>& decoder,
                            const Controller<D>& controller, bool with_grad) {
  const auto design = decoder.decode();
  const auto scene = env.build(design);
  const TaskObjective<D> objective(env.task, env.cfg.dt);
  auto grid = GridField<D>::make(env.cfg, scene.terrain);
  Evaluation ev;
  if (with_grad) {
    const auto res = rollout_grad<D>(scene.ps, controller, objective, grid, env.cfg, env.T, env.N);
    ev.loss = res.loss;
    ev.control_grad = res.controller_grad;
    const auto g = design_grad_from_adjoint<D>(scene, res.adjoint, design.size(),
                                                design.num_actuators(), env.scene.stiffness_floor);
    ev.design_grad = decoder.vjp(g);
  } else {
    ev.loss = rollout_loss<D>(scene.ps, controller, &objective, grid, env.cfg, env.T);
  }
  ev.reward = -ev.loss / static_cast<Real>(env.num_eval_steps());
  return ev;
}

struct CodesignOptions {
  CodesignMode mode = CodesignMode::Codesign;
  int budget = 250;  // gradient iterations
  Real lr = 0.01;
  // Called after each iteration is logged, before its update.
  std::function<void(int)> on_iteration;
};

struct IterationRecord {
  int iter = 0;
  Real reward = 0;
  double wall_time = 0;  // seconds since the run started
};

struct CodesignResult {
  std::vector<IterationRecord> log;
  std::vector<std::string> events;
  Real initial_reward = 0;
  Real final_reward = 0;  // reward of the parameters after the last update
  Real best_reward = 0;   // best over every evaluated parameter set
  VecX best_design;
  VecX best_control;
  int rollouts = 0;

  Real loss() const { return -best_reward; }
};

/// Joint Adam on the active parameter groups. Iteration i evaluates the
/// current parameters with gradients, logs the reward and takes one step; a
/// closing forward rollout scores the last parameters. A non-finite gradient
/// skips the step and records an event.
template <int D>
CodesignResult run_codesign(const CodesignEnv<D>& env, DesignDecoder<D>& decoder,
                            Controller<D>& controller, const CodesignOptions& opt) {
  if (opt.budget < 0) throw ConfigError("budget must be nonnegative");
  const bool do_design = optimizes_design(opt.mode);
  const bool do_control = optimizes_control(opt.mode);
  const Eigen::Index nd = do_design ? decoder.num_params() : 0;
  const Eigen::Index nc = do_control ? controller.num_params() : 0;
  AdamState adam = AdamState::for_size(nd + nc, opt.lr);

  CodesignResult res;
  const auto start = std::chrono::steady_clock::now();
  auto consider = [&](Real reward) {
    if (res.rollouts == 1 || reward > res.best_reward) {
      res.best_reward = reward;
      res.best_design = decoder.params();
      res.best_control = controller.params();
    }
  };

  for (int it = 0; it < opt.budget; ++it) {
    const auto ev = evaluate_episode<D>(env, decoder, controller, nd + nc > 0);
    ++res.rollouts;
    if (it == 0) res.initial_reward = ev.reward;
    consider(ev.reward);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.log.push_back({it, ev.reward, wall});
    if (opt.on_iteration) opt.on_iteration(it);
    if (nd + nc == 0) continue;

    VecX grad(nd + nc);
    if (do_design) grad.head(nd) = ev.design_grad;
    if (do_control) grad.tail(nc) = ev.control_grad;
    if (!grad.allFinite()) {
      res.events.push_back("iteration " + std::to_string(it) + ": non-finite gradient, step skipped");
      continue;
    }
    VecX p(nd + nc);
    if (do_design) p.head(nd) = decoder.params();
    if (do_control) p.tail(nc) = controller.params();
    adam_step(adam, p, grad);
    if (do_design) decoder.set_params(p.head(nd));
    if (do_control) controller.set_params(p.tail(nc));
  }

  const auto last = evaluate_episode<D>(env, decoder, controller, false);
  ++res.rollouts;
  if (opt.budget == 0) res.initial_reward = last.reward;
  res.final_reward = last.reward;
  consider(last.reward);
  return res;
}

struct CmaesOptions {
  CodesignMode mode = CodesignMode::Codesign;
  int rollout_budget = 250;
  Real sigma0 = 0.1;
  int lambda = 10;
  std::uint64_t seed = 0;
};

/// Gradient-free baseline over the same parameter groups: the initial mean
/// is scored first, then whole generations run while the rollout budget
/// allows. Reports the best evaluated parameters.
template <int D>
CodesignResult run_cmaes(const CodesignEnv<D>& env, DesignDecoder<D>& decoder,
                         Controller<D>& controller, const CmaesOptions& opt) {
  const bool do_design = optimizes_design(opt.mode);
  const bool do_control = optimizes_control(opt.mode);
  const Eigen::Index nd = do_design ? decoder.num_params() : 0;
  const Eigen::Index nc = do_control ? controller.num_params() : 0;
  VecX x0(nd + nc);
  if (do_design) x0.head(nd) = decoder.params();
  if (do_control) x0.tail(nc) = controller.params();
  auto apply = [&](const VecX& x) {
    if (do_design) decoder.set_params(x.head(nd));
    if (do_control) controller.set_params(x.tail(nc));
  };

  CodesignResult res;
  const auto start = std::chrono::steady_clock::now();
  VecX best_x = x0;
  auto score = [&](const VecX& x) {
    apply(x);
    Real reward;
    try {
      reward = evaluate_episode<D>(env, decoder, controller, false).reward;
    } catch (const SimulationDiverged& e) {
      res.events.push_back(std::string("rollout diverged: ") + e.what());
      reward = -std::numeric_limits<Real>::infinity();
    }
    ++res.rollouts;
    if (res.rollouts == 1 || reward > res.best_reward) {
      res.best_reward = reward;
      best_x = x;
    }
    return reward;
  };

  res.initial_reward = score(x0);
  res.log.push_back({0, res.initial_reward, 0.0});
  std::mt19937_64 rng(opt.seed);
  auto es = CmaEsState::init(x0, opt.sigma0, opt.lambda);
  int gen = 0;
  while (res.rollouts + opt.lambda <= std::max(opt.rollout_budget, 1)) {
    const auto xs = es.ask(rng);
    std::vector<Real> fit;
    for (const auto& x : xs) fit.push_back(-score(x));
    es.tell(xs, fit);
    const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    res.log.push_back({++gen, res.best_reward, wall});
  }
  apply(best_x);
  res.final_reward = res.best_reward;
  res.best_design = decoder.params();
  res.best_control = controller.params();
  return res;
}

}  // namespace mpmcd
