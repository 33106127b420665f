#pragma once

#include <algorithm>
#include <functional>
#include <string>
#include <vector>

#include "mpmcd/autodiff/adjoint.hpp"
#include "mpmcd/control/controller.hpp"
#include "mpmcd/core/errors.hpp"
#include "mpmcd/sim/stepper.hpp"

namespace mpmcd {

/// Scalar objective accumulated over a rollout. It is evaluated on the state
/// after every control step and on the final state; `final` marks the last.
template <int D>
class Objective {
 public:
  virtual ~Objective() = default;
  virtual Real evaluate(const ParticleSystem<D>& ps, long step, bool final) const = 0;
  /// Adds scale * d(evaluate)/d(state, design) into adj.
  virtual void accumulate_gradient(const ParticleSystem<D>& ps, long step, bool final, Real scale,
                                   ParticleAdjoint<D>& adj) const = 0;
};

/// Objective from a pair of callables, mostly for tests.
template <int D>
class LambdaObjective final : public Objective<D> {
 public:
  using Eval = std::function<Real(const ParticleSystem<D>&, long, bool)>;
  using Grad = std::function<void(const ParticleSystem<D>&, long, bool, Real, ParticleAdjoint<D>&)>;
  LambdaObjective(Eval e, Grad g) : eval_(std::move(e)), grad_(std::move(g)) {}
  Real evaluate(const ParticleSystem<D>& ps, long step, bool final) const override {
    return eval_(ps, step, final);
  }
  void accumulate_gradient(const ParticleSystem<D>& ps, long step, bool final, Real scale,
                           ParticleAdjoint<D>& adj) const override {
    grad_(ps, step, final, scale, adj);
  }

 private:
  Eval eval_;
  Grad grad_;
};

/// Whether the objective is evaluated on the state after substep `k`.
inline bool is_eval_step(long k, long T, int substeps_per_control) {
  return k > 0 && (k == T || k % substeps_per_control == 0);
}

struct MemoryStats {
  std::size_t snapshots = 0;       // currently held
  std::size_t peak_snapshots = 0;
  std::size_t bytes = 0;
  std::size_t peak_bytes = 0;

  void hold(std::size_t b) {
    ++snapshots;
    bytes += b;
    peak_snapshots = std::max(peak_snapshots, snapshots);
    peak_bytes = std::max(peak_bytes, bytes);
  }
  void release(std::size_t b) {
    --snapshots;
    bytes -= b;
  }
};

/// Sparse forward record: full snapshots every N substeps plus the action of
/// every control step. Intermediate states are recomputed segment by segment.
template <int D>
struct RolloutTape {
  int N = 16;
  long T = 0;
  std::vector<ParticleSystem<D>> checkpoints;  // state at k = 0, N, 2N, ... (< T)
  ParticleSystem<D> final_state;
  std::vector<VecX> actions;                   // one per control step
  MemoryStats memory;
};

template <int D>
struct RolloutResult {
  Real loss = 0;
  VecX controller_grad;
  /// Cotangents w.r.t. the initial state (x, v, F, C) and the design fields
  /// (m, s, r, f).
  ParticleAdjoint<D> adjoint;
  MemoryStats memory;
  ParticleSystem<D> final_state;
};

/// Called after every substep with the new state and its substep index.
template <int D>
using StepCallback = std::function<void(const ParticleSystem<D>&, long)>;

namespace detail {

template <int D>
void check_rollout_args(long T, int N) {
  if (T < 1) throw ConfigError("rollout needs at least one substep");
  if (N < 1 || N > T) throw ConfigError("checkpoint interval must lie in [1, T]");
}

}  // namespace detail

/// Forward-only rollout. Returns the accumulated objective (0 if null).
template <int D>
Real rollout_loss(ParticleSystem<D> ps, const Controller<D>& controller,
                  const Objective<D>* objective, GridField<D>& grid, const SimConfig<D>& cfg,
                  long T, const StepCallback<D>& on_step = {},
                  ParticleSystem<D>* final_out = nullptr) {
  const int L = cfg.substeps_per_control;
  Real loss = 0;
  std::vector<Real> act;
  for (long k = 0; k < T; ++k) {
    if (k % L == 0) {
      const VecX u = controller.act(static_cast<int>(k / L), k * cfg.dt, ps);
      act = actuation_from_action<D>(ps, u);
    }
    sim_substep_actuated<D>(ps, grid, act, cfg, k);
    if (on_step) on_step(ps, k + 1);
    if (objective && is_eval_step(k + 1, T, L)) loss += objective->evaluate(ps, k + 1, k + 1 == T);
  }
  if (final_out) *final_out = ps;
  return loss;
}

/// Forward pass that fills a tape. Loss accumulation order matches
/// rollout_loss exactly.
template <int D>
Real record_rollout(const ParticleSystem<D>& initial, const Controller<D>& controller,
                    const Objective<D>& objective, GridField<D>& grid, const SimConfig<D>& cfg,
                    long T, int N, RolloutTape<D>& tape) {
  detail::check_rollout_args<D>(T, N);
  const int L = cfg.substeps_per_control;
  tape = RolloutTape<D>{};
  tape.N = N;
  tape.T = T;
  ParticleSystem<D> ps = initial;
  const std::size_t snap = ps.state_bytes();
  Real loss = 0;
  std::vector<Real> act;
  for (long k = 0; k < T; ++k) {
    if (k % N == 0) {
      tape.checkpoints.push_back(ps);
      tape.memory.hold(snap);
    }
    if (k % L == 0) {
      tape.actions.push_back(controller.act(static_cast<int>(k / L), k * cfg.dt, ps));
      act = actuation_from_action<D>(ps, tape.actions.back());
    }
    sim_substep_actuated<D>(ps, grid, act, cfg, k);
    if (is_eval_step(k + 1, T, L)) loss += objective.evaluate(ps, k + 1, k + 1 == T);
  }
  tape.final_state = std::move(ps);
  tape.memory.hold(snap);
  return loss;
}

/// Loss and reverse-mode gradients of a T-substep rollout with checkpoints
/// every N substeps. Gradients do not depend on N.
template <int D>
RolloutResult<D> rollout_grad(const ParticleSystem<D>& initial, const Controller<D>& controller,
                              const Objective<D>& objective, GridField<D>& grid,
                              const SimConfig<D>& cfg, long T, int N) {
  RolloutTape<D> tape;
  RolloutResult<D> res;
  res.loss = record_rollout<D>(initial, controller, objective, grid, cfg, T, N, tape);

  const int L = cfg.substeps_per_control;
  const std::size_t snap = initial.state_bytes();
  res.controller_grad = VecX::Zero(controller.num_params());
  auto& adj = res.adjoint;
  adj = ParticleAdjoint<D>::zeros_like(initial);
  VecX ubar = VecX::Zero(controller.num_actuators());

  std::vector<ParticleSystem<D>> segment;
  const long num_segments = static_cast<long>(tape.checkpoints.size());
  for (long j = num_segments - 1; j >= 0; --j) {
    const long start = j * N;
    const long end = std::min<long>(start + N, T);

    // Recompute s_start .. s_{end-1}.
    segment.clear();
    segment.push_back(tape.checkpoints[j]);
    tape.memory.hold(snap);
    for (long k = start; k + 1 < end; ++k) {
      ParticleSystem<D> next = segment.back();
      const auto act = actuation_from_action<D>(next, tape.actions[k / L]);
      sim_substep_actuated<D>(next, grid, act, cfg, k);
      segment.push_back(std::move(next));
      tape.memory.hold(snap);
    }

    for (long k = end; k > start; --k) {
      const ParticleSystem<D>& s_k =
          (k == T) ? tape.final_state
                   : (k == end ? tape.checkpoints[j + 1] : segment[k - start]);
      if (is_eval_step(k, T, L)) objective.accumulate_gradient(s_k, k, k == T, 1.0, adj);

      const ParticleSystem<D>& s_prev = segment[k - 1 - start];
      const VecX& u = tape.actions[(k - 1) / L];
      const auto act = actuation_from_action<D>(s_prev, u);
      const auto abar = backward_substep<D>(s_prev, act, adj, grid, cfg);
      for (std::size_t p = 0; p < s_prev.size(); ++p) {
        if (abar[p] == 0.0) continue;
        const auto col = static_cast<Eigen::Index>(p);
        ubar += abar[p] * s_prev.r.col(col);
        adj.r.col(col) += abar[p] * u;
      }
      if ((k - 1) % L == 0) {
        const int c = static_cast<int>((k - 1) / L);
        controller.act_vjp(c, (k - 1) * cfg.dt, s_prev, ubar, res.controller_grad, &adj);
        ubar.setZero();
      }
    }
    for (std::size_t i = 0; i < segment.size(); ++i) tape.memory.release(snap);
  }
  res.memory = tape.memory;
  res.final_state = std::move(tape.final_state);
  return res;
}

}  // namespace mpmcd
