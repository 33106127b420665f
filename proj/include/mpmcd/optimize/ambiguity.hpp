#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "mpmcd/autodiff/rollout.hpp"
#include "mpmcd/control/open_loop.hpp"
#include "mpmcd/control/sine.hpp"
#include "mpmcd/design/annotate.hpp"
#include "mpmcd/environment/sampling.hpp"
#include "mpmcd/environment/scene.hpp"
#include "mpmcd/optimize/adam.hpp"
#include "mpmcd/optimize/experiments.hpp"
#include "mpmcd/tasks/emd.hpp"

namespace mpmcd {

enum class AmbiguityKind { Stiffness, Placement };

inline const char* to_string(AmbiguityKind k) {
  return k == AmbiguityKind::Stiffness ? "stiffness" : "placement";
}

inline AmbiguityKind ambiguity_kind_from_string(const std::string& s) {
  if (s == "stiffness") return AmbiguityKind::Stiffness;
  if (s == "placement") return AmbiguityKind::Placement;
  throw ConfigError("unknown ambiguity experiment '" + s + "'");
}

struct AmbiguityConfig {
  int frames = 10;          // control steps recorded
  int substeps_per_frame = 50;
  int reference_actuators = 3;
  int fit_iters = 200;
  Real lr = 0.1;
  Real lr_decay = 1.0;  // per iteration
  Real controller_scale = 1.0;
  Real youngs = 100;  // robot material at unit stiffness
  // Stiffness variant scales the muscle stiffness; false scales the passive
  // material instead.
  bool scale_muscle = false;
  bool grounded = false;  // true: resting on flat ground under gravity
  bool match_all_frames = false;  // true: every recorded frame
  std::vector<Real> multipliers{1.0, 2.0, 4.0};
  std::vector<int> actuator_counts{1, 2, 4, 8};
  int seeds = 5;
  std::uint64_t base_seed = 0;
};

struct AmbiguityRow {
  Real setting = 0;          // stiffness multiplier or actuator count
  std::vector<Real> errors;  // one per seed
  Real median = 0;
};

struct AmbiguityTable {
  AmbiguityKind kind = AmbiguityKind::Stiffness;
  std::vector<AmbiguityRow> rows;
};

/// Small elastic block, free-floating by default.
struct AmbiguityScene {
  SimConfig<2> cfg;
  TerrainSDF<2> terrain;
  std::vector<Vec<2>> base;
  Real m0 = 0;
  SceneOptions<2> opt;
  bool grounded = true;

  static AmbiguityScene make(const AmbiguityConfig& ac) {
    AmbiguityScene s;
    s.cfg.grid_cells = 32;
    s.cfg.dt = 2e-4;
    s.cfg.substeps_per_control = ac.substeps_per_frame;
    s.grounded = ac.grounded;
    if (ac.grounded) {
      s.cfg.gravity = Vec<2>(0, -9.8);
      s.terrain = TerrainSDF<2>::flat(0.12, 1.0);
    } else {
      s.terrain = TerrainSDF<2>::none();
    }
    const Real h = 0.5 * s.cfg.dx();
    s.base = sample_box<2>(Vec<2>(-0.1, -0.04), Vec<2>(0.1, 0.04), h);
    s.m0 = h * h;
    s.opt.robot_material = MaterialParams::from_youngs(MaterialModel::NeoHookean, ac.youngs, 0.3);
    return s;
  }

  long substeps(const AmbiguityConfig& ac) const { return static_cast<long>(ac.frames) * ac.substeps_per_frame; }

  /// Robot with K muscle groups from k-means over the base (seeded).
  ParticleSystem<2> robot(int K, std::uint64_t placement_seed, Real stiffness) const {
    const auto ann = annotate_muscles<2>(base, K, canonical_heading<2>(), placement_seed);
    auto d = DesignSpec<2>::uniform(base, K, m0, 1.0);
    d.r = ann.r;
    d.f = ann.f;
    Placement<2> pl;
    pl.offset = Vec<2>(0.5, grounded ? 0.0 : 0.5);
    pl.drop_to_ground = grounded;
    auto sc = assemble_scene<2>(default_biome(Biome::Ground), d, pl, terrain, cfg, opt);
    for (auto& s : sc.ps.s) s *= stiffness;
    return sc.ps;
  }
};

namespace detail {

/// Positions after each control step (or only the last).
inline std::vector<std::vector<Vec<2>>> record_frames(const AmbiguityScene& sc,
                                                      const ParticleSystem<2>& ps,
                                                      const Controller<2>& ctl,
                                                      const AmbiguityConfig& ac) {
  std::vector<std::vector<Vec<2>>> frames;
  auto grid = GridField<2>::make(sc.cfg, sc.terrain);
  rollout_loss<2>(ps, ctl, nullptr, grid, sc.cfg, sc.substeps(ac),
                  [&](const ParticleSystem<2>& s, long k) {
                    if (k % ac.substeps_per_frame == 0) frames.push_back(s.x);
                  });
  return frames;
}

/// Matching objective: EMD to the reference at the last frame (or at every
/// frame), with the locally constant assignment for the gradient.
class EmdMatchObjective final : public Objective<2> {
 public:
  // Costs are divided by unit^2; measuring in grid cells keeps the gradient
  // well above Adam's epsilon.
  EmdMatchObjective(std::vector<std::vector<Vec<2>>> ref, int L, bool all_frames, Real unit = 1)
      : ref_(std::move(ref)), L_(L), all_(all_frames), w_(1.0 / (unit * unit)) {}

  Real evaluate(const ParticleSystem<2>& ps, long step, bool final) const override {
    const auto* target = target_for(step, final);
    return target ? w_ * emd_exact<2>(ps.x, *target).value : 0.0;
  }
  void accumulate_gradient(const ParticleSystem<2>& ps, long step, bool final, Real scale,
                           ParticleAdjoint<2>& adj) const override {
    const auto* target = target_for(step, final);
    if (!target) return;
    const auto res = emd_exact<2>(ps.x, *target);
    const auto g = emd_exact_grad<2>(ps.x, *target, res.assignment);
    for (std::size_t p = 0; p < g.size(); ++p) adj.x[p] += scale * w_ * g[p];
  }

 private:
  const std::vector<Vec<2>>* target_for(long step, bool final) const {
    if (final) return &ref_.back();
    if (!all_ || step % L_ != 0) return nullptr;
    const long f = step / L_ - 1;
    return f >= 0 && f < static_cast<long>(ref_.size()) ? &ref_[f] : nullptr;
  }

  std::vector<std::vector<Vec<2>>> ref_;
  int L_;
  bool all_;
  Real w_;
};

}  // namespace detail

/// Fits an open-loop controller to the reference frames by Adam and returns
/// the best last-frame EMD seen.
inline Real fit_open_loop(const AmbiguityScene& sc, const ParticleSystem<2>& robot, int K,
                          const std::vector<std::vector<Vec<2>>>& ref, const AmbiguityConfig& ac,
                          Real muscle_multiplier = 1) {
  auto cfg = sc.cfg;
  cfg.muscle_stiffness *= muscle_multiplier;
  OpenLoopController<2> ctl(ac.frames, K);
  const detail::EmdMatchObjective obj(ref, ac.substeps_per_frame, ac.match_all_frames, sc.cfg.dx());
  const detail::EmdMatchObjective last(ref, ac.substeps_per_frame, false);
  auto grid = GridField<2>::make(cfg, sc.terrain);
  const long T = sc.substeps(ac);
  auto adam = AdamState::for_size(ctl.params().size(), ac.lr);
  Real best = std::numeric_limits<Real>::infinity();
  for (int it = 0; it <= ac.fit_iters; ++it) {
    if (it == ac.fit_iters) {
      ParticleSystem<2> fin;
      rollout_loss<2>(robot, ctl, nullptr, grid, cfg, T, {}, &fin);
      best = std::min(best, last.evaluate(fin, T, true));
      break;
    }
    const auto res = rollout_grad<2>(robot, ctl, obj, grid, cfg, T, std::min<long>(T, 20));
    best = std::min(best, last.evaluate(res.final_state, T, true));
    VecX p = ctl.params();
    adam.lr = ac.lr * std::pow(ac.lr_decay, it);
    adam_step(adam, p, res.controller_grad);
    ctl.set_params(p);
  }
  return best;
}

/// For each seed, records a reference robot (K = reference_actuators,
/// unit stiffness, random sine controller), then fits open-loop controllers
/// of perturbed robots to its final frame: stiffness multiplied by each
/// multiplier, or muscle groups re-drawn with each actuator count.
inline AmbiguityTable ambiguity_experiment(AmbiguityKind kind, const AmbiguityConfig& ac = {}) {
  const auto sc = AmbiguityScene::make(ac);
  AmbiguityTable table;
  table.kind = kind;
  const std::size_t nrows = kind == AmbiguityKind::Stiffness ? ac.multipliers.size() : ac.actuator_counts.size();
  table.rows.resize(nrows);
  for (std::size_t i = 0; i < nrows; ++i) {
    table.rows[i].setting = kind == AmbiguityKind::Stiffness ? ac.multipliers[i] : ac.actuator_counts[i];
  }
  for (int s = 0; s < ac.seeds; ++s) {
    const std::uint64_t seed = ac.base_seed + static_cast<std::uint64_t>(s);
    std::mt19937_64 rng(seed);
    const SineController<2> ref_ctl(SineControllerParams::random(ac.reference_actuators, rng, ac.controller_scale));
    const auto ref_robot = sc.robot(ac.reference_actuators, seed, 1.0);
    const auto frames = detail::record_frames(sc, ref_robot, ref_ctl, ac);
    for (std::size_t i = 0; i < nrows; ++i) {
      Real err;
      if (kind == AmbiguityKind::Stiffness) {
        const Real mult = ac.multipliers[i];
        const auto robot = sc.robot(ac.reference_actuators, seed, ac.scale_muscle ? 1.0 : mult);
        err = fit_open_loop(sc, robot, ac.reference_actuators, frames, ac, ac.scale_muscle ? mult : 1.0);
      } else {
        const int K = ac.actuator_counts[i];
        const auto robot = sc.robot(K, seed + 1000, 1.0);
        err = fit_open_loop(sc, robot, K, frames, ac);
      }
      table.rows[i].errors.push_back(err);
    }
  }
  for (auto& r : table.rows) r.median = median(r.errors);
  return table;
}

/// Spearman rank correlation (average ranks for ties).
inline Real spearman(const std::vector<Real>& a, const std::vector<Real>& b) {
  if (a.size() != b.size() || a.size() < 2) throw SizeMismatch("spearman needs paired samples");
  auto ranks = [](const std::vector<Real>& v) {
    std::vector<std::size_t> idx(v.size());
    for (std::size_t i = 0; i < v.size(); ++i) idx[i] = i;
    std::sort(idx.begin(), idx.end(), [&](std::size_t x, std::size_t y) { return v[x] < v[y]; });
    std::vector<Real> r(v.size());
    for (std::size_t i = 0; i < idx.size();) {
      std::size_t j = i;
      while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
      for (std::size_t k = i; k <= j; ++k) r[idx[k]] = 0.5 * static_cast<Real>(i + j);
      i = j + 1;
    }
    return r;
  };
  const auto ra = ranks(a), rb = ranks(b);
  const Real n = static_cast<Real>(a.size());
  Real ma = 0, mb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ma += ra[i] / n;
    mb += rb[i] / n;
  }
  Real sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  return saa > 0 && sbb > 0 ? sab / std::sqrt(saa * sbb) : 0.0;
}

/// Spearman correlation between the setting and the error over every
/// (row, seed) pair.
inline Real table_spearman(const AmbiguityTable& t) {
  std::vector<Real> x, y;
  for (const auto& r : t.rows) {
    for (Real e : r.errors) {
      x.push_back(r.setting);
      y.push_back(e);
    }
  }
  return spearman(x, y);
}

}  // namespace mpmcd
