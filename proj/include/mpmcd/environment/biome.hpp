#pragma once

#include <array>
#include <optional>
#include <string>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/sim/material.hpp"

namespace mpmcd {

enum class Biome { Ground, Desert, Wetland, Clay, Ice, Snow, ShallowWater, Ocean };

inline constexpr std::array<Biome, 8> kAllBiomes = {
    Biome::Ground, Biome::Desert, Biome::Wetland,      Biome::Clay,
    Biome::Ice,    Biome::Snow,   Biome::ShallowWater, Biome::Ocean};

inline const char* to_string(Biome b) {
  switch (b) {
    case Biome::Ground: return "Ground";
    case Biome::Desert: return "Desert";
    case Biome::Wetland: return "Wetland";
    case Biome::Clay: return "Clay";
    case Biome::Ice: return "Ice";
    case Biome::Snow: return "Snow";
    case Biome::ShallowWater: return "ShallowWater";
    case Biome::Ocean: return "Ocean";
  }
  return "?";
}

inline Biome biome_from_string(const std::string& s) {
  for (Biome b : kAllBiomes) {
    if (s == to_string(b)) return b;
  }
  throw ConfigError("unknown biome '" + s + "'");
}

struct CoverLayer {
  MaterialParams material;
  Real depth = 0.04;  // thickness above the terrain surface
};

/// Physical makeup of one environment: base terrain friction, an optional
/// granular/plastic cover layer and an optional fluid fill. Fluid levels are
/// absolute heights.
struct BiomeSpec {
  Biome name = Biome::Ground;
  Real terrain_friction = 0.5;
  std::optional<CoverLayer> cover;
  std::optional<MaterialParams> fluid;
  Real fluid_level = 0.0;

  bool has_elasticity() const { return cover.has_value(); }
  bool has_plasticity() const { return cover && cover->material.is_plastic(); }
  bool has_fluid() const { return fluid.has_value(); }
};

inline constexpr Real kHighFriction = 0.5;
inline constexpr Real kLowFriction = 0.02;

/// Default biome table. Desert, Clay and Snow share a composition
/// (elastoplastic cover) and differ by plasticity model and parameters.
inline BiomeSpec default_biome(Biome b, Real ground_height = 0.1) {
  BiomeSpec s;
  s.name = b;
  s.terrain_friction = kHighFriction;
  auto sand = [](Real angle, Real E, Real density) {
    auto m = MaterialParams::from_youngs(MaterialModel::DruckerPragerSand, E, 0.3, density);
    m.friction_angle = angle;
    return m;
  };
  auto snowlike = [](Real tc, Real ts, Real E, Real density) {
    auto m = MaterialParams::from_youngs(MaterialModel::SnowElastoplastic, E, 0.25, density);
    m.theta_c = tc;
    m.theta_s = ts;
    return m;
  };
  switch (b) {
    case Biome::Ground: break;
    case Biome::Ice: s.terrain_friction = kLowFriction; break;
    case Biome::Desert: s.cover = CoverLayer{sand(30.0, 3e3, 1.5), 0.04}; break;
    case Biome::Clay: s.cover = CoverLayer{snowlike(1e-2, 4e-3, 2e3, 1.8), 0.04}; break;
    case Biome::Snow: s.cover = CoverLayer{snowlike(2.5e-2, 7.5e-3, 1.4e3, 0.4), 0.05}; break;
    case Biome::Wetland:
      s.cover = CoverLayer{sand(15.0, 1.5e3, 1.6), 0.03};
      s.fluid = MaterialParams::fluid(500.0, 1.0);
      s.fluid_level = ground_height + 0.05;
      break;
    case Biome::ShallowWater:
      s.fluid = MaterialParams::fluid(500.0, 1.0);
      s.fluid_level = ground_height + 0.06;
      break;
    case Biome::Ocean:
      s.fluid = MaterialParams::fluid(500.0, 1.0);
      s.fluid_level = ground_height + 0.45;
      break;
  }
  return s;
}

}  // namespace mpmcd
