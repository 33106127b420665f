#pragma once

#include <memory>
#include <random>
#include <string>
#include <vector>

#include "mpmcd/control/sine.hpp"
#include "mpmcd/design/networks.hpp"
#include "mpmcd/design/particle_voxel.hpp"
#include "mpmcd/design/sdf_lerp.hpp"
#include "mpmcd/environment/sampling.hpp"
#include "mpmcd/optimize/codesign.hpp"
#include "mpmcd/optimize/sweep.hpp"

namespace mpmcd {

/// Small 2D scenes sized for single-core runs of the optimization loops.
struct DeskAquatic {
  static constexpr int K = 2;

  CodesignEnv<2> env;
  std::vector<Vec<2>> base;  // robot frame
  Real m0 = 0;
  Real s0 = 1.0;
  Real controller_scale = 0.5;

  /// Zero-gravity fluid tank with a 0.3 x 0.08 swimmer suspended mid-depth,
  /// rewarded for mean velocity along +x.
  static DeskAquatic make() {
    DeskAquatic d;
    auto& cfg = d.env.cfg;
    cfg.grid_cells = 32;
    cfg.dt = 5e-4;
    cfg.substeps_per_control = 10;
    cfg.gravity = Vec<2>::Zero();
    d.env.biome = default_biome(Biome::Ocean);
    d.env.biome.fluid_level = 0.45;
    d.env.terrain = TerrainSDF<2>::none();
    d.env.placement.offset = Vec<2>(0.5, 0.27);
    d.env.placement.drop_to_ground = false;
    d.env.task = SpeedTask<2>{Vec<2>::UnitX()};
    d.env.T = 400;
    d.env.N = 20;
    d.env.scene.stiffness_floor = 0.3;
    const Real h = 0.5 * cfg.dx();
    d.base = sample_box<2>(Vec<2>(-0.15, -0.04), Vec<2>(0.15, 0.04), h);
    d.m0 = h * h;
    return d;
  }

  enum class Muscles { BellyStrip, HeadBelly, Halves };

  /// Soft fish-like body tapering toward +x: the top edge drops linearly by
  /// `drop` over the body length. Muscle 1 drives the belly strip (whole
  /// length or the blunt half only) or the lower half; muscle 0 the rest.
  DesignPrimitive<2> fish(Real drop, Muscles layout) const {
    VecX r0(K);
    r0 << 1, 0;
    auto p = box_primitive<2>(base, Vec<2>::Zero(), Vec<2>(0.15, 0.04), 0.0, r0);
    for (std::size_t i = 0; i < base.size(); ++i) {
      const Vec<2>& x = base[i];
      const Real top = 0.04 - drop * (x[0] + 0.15) / 0.3;
      p.sdf[i] = std::max(p.sdf[i], x[1] - top);
      bool one = false;
      switch (layout) {
        case Muscles::BellyStrip: one = x[1] < -0.025; break;
        case Muscles::HeadBelly: one = x[1] < -0.025 && x[0] < 0; break;
        case Muscles::Halves: one = x[1] < 0.5 * (top - 0.04); break;
      }
      p.r.col(static_cast<Eigen::Index>(i)).setZero();
      p.r(one ? 1 : 0, static_cast<Eigen::Index>(i)) = 1;
    }
    return p;
  }

  std::vector<DesignPrimitive<2>> primitives() const {
    return {fish(0.075, Muscles::BellyStrip), fish(0.075, Muscles::HeadBelly),
            fish(0.04, Muscles::Halves), fish(0.075, Muscles::Halves)};
  }

  /// A fish outside the primitive set, used to train the fixed controller of
  /// design-only runs.
  DesignSpec<2> reference_fish() const {
    SdfLerpDecoder<2> one(base, {fish(0.055, Muscles::Halves)}, K, m0, s0);
    return one.decode();
  }

  /// Decoder by representation name; network weights are drawn from `seed`.
  std::unique_ptr<DesignDecoder<2>> decoder(const std::string& kind, std::uint64_t seed) const {
    std::mt19937_64 rng(seed ^ 0x5eedULL);
    if (kind == "sdf_lerp") return std::make_unique<SdfLerpDecoder<2>>(base, primitives(), K, m0, s0);
    if (kind == "particle") return std::make_unique<ParticleDecoder<2>>(base, K, m0, s0);
    if (kind == "implicit") {
      auto dec = make_implicit_decoder<2>(base, K, m0, s0);
      dec.randomize(rng, 1.0);
      return std::make_unique<NetworkDecoder<2>>(std::move(dec));
    }
    if (kind == "cppn") {
      auto dec = make_cppn_decoder<2>(base, K, m0, s0);
      dec.randomize(rng, 1.0);
      return std::make_unique<NetworkDecoder<2>>(std::move(dec));
    }
    throw ConfigError("unknown desk representation '" + kind + "'");
  }

  std::unique_ptr<Controller<2>> controller(std::uint64_t seed) const {
    std::mt19937_64 rng(seed);
    return std::make_unique<SineController<2>>(SineControllerParams::random(K, rng, controller_scale));
  }
};

/// Two-legged walker on flat ground with two muscle groups. Membership is
/// blended between two layouts by a scalar w in [0, 1]: w = 1 puts the front
/// leg and the torso on muscle 0 and the back leg on muscle 1; w = 0 swaps
/// them. The controller is fixed.
struct DeskWalker {
  static constexpr int K = 2;

  CodesignEnv<2> env;
  std::vector<Vec<2>> base;
  std::vector<int> part;  // 0 torso, 1 back leg, 2 front leg
  Real m0 = 0;
  std::uint64_t controller_seed = 0;
  Real controller_scale = 1.0;

  static DeskWalker make() {
    DeskWalker w;
    auto& cfg = w.env.cfg;
    cfg.grid_cells = 32;
    cfg.dt = 5e-4;
    cfg.substeps_per_control = 10;
    cfg.gravity = Vec<2>(0, -9.8);
    w.env.biome = default_biome(Biome::Ground);
    w.env.terrain = TerrainSDF<2>::flat(0.1, 1.0);
    w.env.placement.offset = Vec<2>(0.4, 0);
    w.env.task = SpeedTask<2>{Vec<2>::UnitX()};
    w.env.T = 600;
    w.env.N = 20;
    const Real h = 0.5 * cfg.dx();
    w.m0 = h * h;
    auto add = [&](Vec<2> lo, Vec<2> hi, int id) {
      for (const auto& x : sample_box<2>(lo, hi, h)) {
        w.base.push_back(x);
        w.part.push_back(id);
      }
    };
    add(Vec<2>(-0.15, 0.06), Vec<2>(0.15, 0.12), 0);
    add(Vec<2>(-0.15, 0.0), Vec<2>(-0.07, 0.055), 1);
    add(Vec<2>(0.07, 0.0), Vec<2>(0.15, 0.055), 2);
    return w;
  }

  DesignSpec<2> design(Real membership) const {
    auto d = DesignSpec<2>::uniform(base, K, m0, 1.0);
    for (std::size_t i = 0; i < base.size(); ++i) {
      const bool on_zero = part[i] != 1;  // layout at w = 1
      const auto c = static_cast<Eigen::Index>(i);
      d.r(0, c) = on_zero ? membership : 1 - membership;
      d.r(1, c) = 1 - d.r(0, c);
      d.f[i] = part[i] == 0 ? Vec<2>::UnitX() : Vec<2>::UnitY();
    }
    return d;
  }

  std::unique_ptr<Controller<2>> controller() const {
    std::mt19937_64 rng(controller_seed);
    return std::make_unique<SineController<2>>(SineControllerParams::random(K, rng, controller_scale));
  }

  /// Episode loss (negative summed reward) at membership w.
  Real loss(Real membership) const {
    const FixedDesignDecoder<2> dec(design(membership));
    return evaluate_episode<2>(env, dec, *controller(), false).loss;
  }

  SweepResult sweep(int points = 64) const {
    return sweep_1d([this](Real w) { return loss(w); }, linspace(0, 1, points));
  }
};

}  // namespace mpmcd
