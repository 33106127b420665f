#pragma once

#include <fstream>
#include <ostream>
#include <string>
#include <variant>
#include <vector>

#include "mpmcd/autodiff/rollout.hpp"
#include "mpmcd/core/errors.hpp"
#include "mpmcd/tasks/path.hpp"
#include "mpmcd/tasks/rewards.hpp"

namespace mpmcd {

template <int D>
struct SpeedTask {
  Vec<D> direction = canonical_heading<D>();
};

template <int D>
struct TurningTask {
  Vec<D> up = Vec<D>::UnitY();
};

template <int D>
struct VelocityTrackingTask {
  QuinticPath<D> path;
  TrackingWeights weights;
  std::vector<std::size_t> head, tail;
};

template <int D>
struct WaypointTask {
  QuinticPath<D> path;
};

template <int D>
using TaskSpec = std::variant<SpeedTask<D>, TurningTask<D>, VelocityTrackingTask<D>, WaypointTask<D>>;

template <int D>
std::string task_name(const TaskSpec<D>& t) {
  static const char* names[] = {"speed", "turning", "velocity_tracking", "waypoint"};
  return names[t.index()];
}

template <int D>
void validate_task(const TaskSpec<D>& t) {
  auto unit = [](const Vec<D>& v, const char* what) {
    if (std::abs(v.norm() - 1.0) > 1e-9) throw ConfigError(std::string(what) + " must be a unit vector");
  };
  if (auto* s = std::get_if<SpeedTask<D>>(&t)) unit(s->direction, "speed direction");
  if (auto* s = std::get_if<TurningTask<D>>(&t)) unit(s->up, "turning axis");
}

/// Per-step reward of the task at time t.
template <int D>
Real task_reward(const TaskSpec<D>& task, const ParticleSystem<D>& ps, Real t) {
  return std::visit(
      [&](const auto& k) -> Real {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, SpeedTask<D>>) {
          return reward_speed(ps, k.direction);
        } else if constexpr (std::is_same_v<K, TurningTask<D>>) {
          return reward_turning(ps, k.up);
        } else if constexpr (std::is_same_v<K, VelocityTrackingTask<D>>) {
          return reward_velocity_tracking(ps, k.path.velocity(t), k.head, k.tail, k.weights);
        } else {
          return reward_waypoint(ps, k.path.position(t));
        }
      },
      task);
}

template <int D>
void task_reward_grad(const TaskSpec<D>& task, const ParticleSystem<D>& ps, Real t, Real scale,
                      ParticleAdjoint<D>& adj) {
  std::visit(
      [&](const auto& k) {
        using K = std::decay_t<decltype(k)>;
        if constexpr (std::is_same_v<K, SpeedTask<D>>) {
          reward_speed_grad(ps, k.direction, scale, adj);
        } else if constexpr (std::is_same_v<K, TurningTask<D>>) {
          reward_turning_grad(ps, k.up, scale, adj);
        } else if constexpr (std::is_same_v<K, VelocityTrackingTask<D>>) {
          reward_velocity_tracking_grad(ps, k.path.velocity(t), k.head, k.tail, k.weights, scale, adj);
        } else {
          reward_waypoint_grad(ps, k.path.position(t), scale, adj);
        }
      },
      task);
}

/// Loss = -(sum of per-step rewards) over the evaluation steps of a rollout.
template <int D>
class TaskObjective final : public Objective<D> {
 public:
  TaskObjective(TaskSpec<D> task, Real dt) : task_(std::move(task)), dt_(dt) { validate_task(task_); }

  Real evaluate(const ParticleSystem<D>& ps, long step, bool) const override {
    return -task_reward(task_, ps, step * dt_);
  }
  void accumulate_gradient(const ParticleSystem<D>& ps, long step, bool, Real scale,
                           ParticleAdjoint<D>& adj) const override {
    task_reward_grad(task_, ps, step * dt_, -scale, adj);
  }
  const TaskSpec<D>& task() const { return task_; }

 private:
  TaskSpec<D> task_;
  Real dt_;
};

struct RewardLog {
  std::vector<long> step;
  std::vector<Real> reward;

  void add(long s, Real r) {
    step.push_back(s);
    reward.push_back(r);
  }
  Real total() const {
    Real acc = 0;
    for (Real r : reward) acc += r;
    return acc;
  }
  Real mean() const { return reward.empty() ? 0.0 : total() / static_cast<Real>(reward.size()); }

  void write_csv(std::ostream& out) const {
    out << "step,reward,cumulative\n";
    Real cum = 0;
    out.precision(17);
    for (std::size_t i = 0; i < step.size(); ++i) {
      cum += reward[i];
      out << step[i] << ',' << reward[i] << ',' << cum << '\n';
    }
  }
  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write " + path);
    write_csv(out);
  }
};

}  // namespace mpmcd
