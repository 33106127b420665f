#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/design/spec.hpp"
#include "mpmcd/environment/biome.hpp"
#include "mpmcd/environment/sampling.hpp"
#include "mpmcd/environment/terrain.hpp"
#include "mpmcd/sim/config.hpp"
#include "mpmcd/sim/particles.hpp"

namespace mpmcd {

enum class Semantic : std::uint8_t { Free = 0, Terrain = 1, TerrainMaterial = 2, Robot = 3 };

/// Per-cell labels over the simulation grid cells. A cell takes the highest
/// label present, so robot > terrain material > terrain > free.
template <int D>
struct SemanticOccupancyMap {
  IVec<D> dims = IVec<D>::Zero();
  Real dx = 1.0;
  std::vector<Semantic> labels;

  std::size_t index(const IVec<D>& c) const {
    std::size_t idx = 0;
    for (int a = 0; a < D; ++a) idx = idx * dims[a] + c[a];
    return idx;
  }

  bool contains(const IVec<D>& c) const {
    for (int a = 0; a < D; ++a) {
      if (c[a] < 0 || c[a] >= dims[a]) return false;
    }
    return true;
  }

  IVec<D> cell_of(const Vec<D>& x) const {
    IVec<D> c;
    for (int a = 0; a < D; ++a) c[a] = static_cast<int>(std::floor(x[a] / dx));
    return c;
  }

  Semantic at(const Vec<D>& x) const {
    const IVec<D> c = cell_of(x);
    return contains(c) ? labels[index(c)] : Semantic::Free;
  }

  void raise(const IVec<D>& c, Semantic s) {
    if (!contains(c)) return;
    auto& l = labels[index(c)];
    if (static_cast<int>(s) > static_cast<int>(l)) l = s;
  }

  std::size_t count(Semantic s) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), s));
  }
};

template <int D>
SemanticOccupancyMap<D> empty_occupancy(const SimConfig<D>& cfg) {
  SemanticOccupancyMap<D> map;
  map.dims = IVec<D>::Constant(cfg.grid_cells);
  map.dx = cfg.dx();
  std::size_t n = 1;
  for (int a = 0; a < D; ++a) n *= static_cast<std::size_t>(map.dims[a]);
  map.labels.assign(n, Semantic::Free);
  return map;
}

template <int D>
void mark_terrain(SemanticOccupancyMap<D>& map, const TerrainSDF<D>& terrain) {
  if (terrain.empty()) return;
  for (std::size_t i = 0; i < map.labels.size(); ++i) {
    IVec<D> c;
    std::size_t rem = i;
    for (int a = D - 1; a >= 0; --a) {
      c[a] = static_cast<int>(rem % map.dims[a]);
      rem /= map.dims[a];
    }
    const Vec<D> center = (c.template cast<Real>().array() + 0.5).matrix() * map.dx;
    if (terrain.sdf(center) <= 0) map.raise(c, Semantic::Terrain);
  }
}

template <int D>
SemanticOccupancyMap<D> build_occupancy(const ParticleSystem<D>& ps, const TerrainSDF<D>& terrain,
                                        const SimConfig<D>& cfg) {
  auto map = empty_occupancy<D>(cfg);
  mark_terrain<D>(map, terrain);
  for (std::size_t p = 0; p < ps.size(); ++p) {
    map.raise(map.cell_of(ps.x[p]),
              ps.label[p] == ParticleLabel::Robot ? Semantic::Robot : Semantic::TerrainMaterial);
  }
  return map;
}

template <int D>
struct Placement {
  Vec<D> offset = Vec<D>::Zero();
  // Replace the vertical offset so the lowest robot particle sits `clearance`
  // above the terrain.
  bool drop_to_ground = true;
  Real clearance = 0.01;
};

template <int D>
struct SceneOptions {
  MaterialParams robot_material = MaterialParams::from_youngs(MaterialModel::NeoHookean, 1e3, 0.3);
  Real particle_spacing = 0;  // cover/fluid lattice; 0 means dx / 2
  // Passive stiffness scale of a robot particle is floor + (1 - floor) * s,
  // keeping fully softened material from losing all shear resistance.
  Real stiffness_floor = 0;

  Real stiffness_scale(Real s) const { return stiffness_floor + (1 - stiffness_floor) * s; }
};

template <int D>
struct Scene {
  ParticleSystem<D> ps;
  TerrainSDF<D> terrain;
  BiomeSpec biome;
  std::vector<std::size_t> robot_to_design;  // robot particle p -> design base index
  std::size_t num_robot = 0;
};

/// Builds the particle system: robot particles first (in design order, after
/// the mass cutoff), then cover, then fluid. Cover and fluid are sampled on a
/// lattice strictly above the terrain, skipping robot-occupied cells.
template <int D>
Scene<D> assemble_scene(const BiomeSpec& biome, const DesignSpec<D>& design,
                        const Placement<D>& placement, const TerrainSDF<D>& terrain,
                        const SimConfig<D>& cfg, const SceneOptions<D>& opt = {}) {
  Scene<D> scene;
  scene.terrain = terrain;
  scene.biome = biome;
  auto& ps = scene.ps;
  ps.materials.push_back(opt.robot_material);
  const int cover_id = biome.cover ? static_cast<int>(ps.materials.size()) : -1;
  if (biome.cover) ps.materials.push_back(biome.cover->material);
  const int fluid_id = biome.fluid ? static_cast<int>(ps.materials.size()) : -1;
  if (biome.fluid) ps.materials.push_back(*biome.fluid);

  const Real dx = cfg.dx();
  const Real lo_bound = (cfg.wall_cells + 0.5) * dx;
  const Real hi_bound = cfg.domain - (cfg.wall_cells + 1.5) * dx;

  // Robot.
  const auto kept = design.kept(cfg.tau_m);
  Vec<D> offset = placement.offset;
  if (placement.drop_to_ground && !kept.empty() && !terrain.empty()) {
    Real lowest = std::numeric_limits<Real>::infinity();
    for (std::size_t i : kept) {
      Vec<D> x = design.base[i] + offset;
      x[1] = design.base[i][1];
      lowest = std::min(lowest, terrain.sdf(x));
    }
    offset[1] = placement.clearance - lowest;
  }
  const int K = design.num_actuators();
  ps.set_num_actuators(K);
  for (std::size_t i : kept) {
    const Vec<D> x = design.base[i] + offset;
    for (int a = 0; a < D; ++a) {
      if (x[a] < lo_bound || x[a] > hi_bound) {
        throw OutOfDomain("robot particle " + std::to_string(i) + " outside the workspace");
      }
    }
    if (terrain.sdf(x) <= 0) {
      throw PlacementCollision("robot particle " + std::to_string(i) + " spawns inside terrain");
    }
    const std::size_t p = ps.add(x, design.m[i], 0, ParticleLabel::Robot, opt.stiffness_scale(design.s[i]));
    if (K > 0) ps.r.col(static_cast<Eigen::Index>(p)) = design.r.col(static_cast<Eigen::Index>(i));
    ps.f[p] = design.f[i];
    scene.robot_to_design.push_back(i);
  }
  scene.num_robot = ps.size();

  if (cover_id < 0 && fluid_id < 0) return scene;

  auto occ = empty_occupancy<D>(cfg);
  for (std::size_t p = 0; p < scene.num_robot; ++p) occ.raise(occ.cell_of(ps.x[p]), Semantic::Robot);

  const Real h = opt.particle_spacing > 0 ? opt.particle_spacing : 0.5 * dx;
  Real top = 0;
  if (biome.cover) {
    Real hmax = 0;
    for (Real v : terrain.heights) hmax = std::max(hmax, v);
    top = hmax + biome.cover->depth;
  }
  if (biome.fluid) top = std::max(top, biome.fluid_level);
  top = std::min(top, hi_bound);
  const Vec<D> lo = Vec<D>::Constant(lo_bound);
  Vec<D> hi = Vec<D>::Constant(hi_bound);
  hi[1] = top;
  for (const auto& x : sample_box<D>(lo, hi, h)) {
    const Real d = terrain.sdf(x);
    if (!(d > 0)) continue;
    if (occ.at(x) == Semantic::Robot) continue;
    if (biome.cover && d <= biome.cover->depth) {
      const auto& mat = ps.materials[cover_id];
      ps.add(x, mat.density * std::pow(h, D), cover_id, ParticleLabel::Cover);
    } else if (biome.fluid && x[1] < biome.fluid_level) {
      const auto& mat = ps.materials[fluid_id];
      ps.add(x, mat.density * std::pow(h, D), fluid_id, ParticleLabel::Cover);
    }
  }
  return scene;
}

/// Robot-level observation.
template <int D>
struct Observation {
  Vec<D> position = Vec<D>::Zero();
  Vec<D> velocity = Vec<D>::Zero();
  std::vector<Vec<D>> part_position;  // per labeled part, when parts are given
  std::vector<Vec<D>> part_velocity;
  SemanticOccupancyMap<D> occupancy;
  VecX task;
};

/// Mass-weighted centroids of the robot (and of each part, where `parts`
/// assigns a part id to every particle; negative ids are ignored).
template <int D>
Observation<D> observe(const ParticleSystem<D>& ps, const TerrainSDF<D>& terrain,
                       const SimConfig<D>& cfg, const VecX& task_payload = VecX(),
                       const std::vector<int>& parts = {}) {
  Observation<D> obs;
  Real M = 0;
  int nparts = 0;
  for (int id : parts) nparts = std::max(nparts, id + 1);
  std::vector<Real> pm(nparts, 0.0);
  obs.part_position.assign(nparts, Vec<D>::Zero());
  obs.part_velocity.assign(nparts, Vec<D>::Zero());
  for (std::size_t p = 0; p < ps.size(); ++p) {
    if (ps.label[p] != ParticleLabel::Robot) continue;
    M += ps.m[p];
    obs.position += ps.m[p] * ps.x[p];
    obs.velocity += ps.m[p] * ps.v[p];
    if (p < parts.size() && parts[p] >= 0) {
      pm[parts[p]] += ps.m[p];
      obs.part_position[parts[p]] += ps.m[p] * ps.x[p];
      obs.part_velocity[parts[p]] += ps.m[p] * ps.v[p];
    }
  }
  if (!(M > 0)) throw EmptyRobot("observation needs at least one robot particle");
  obs.position /= M;
  obs.velocity /= M;
  for (int k = 0; k < nparts; ++k) {
    if (pm[k] > 0) {
      obs.part_position[k] /= pm[k];
      obs.part_velocity[k] /= pm[k];
    }
  }
  obs.occupancy = build_occupancy<D>(ps, terrain, cfg);
  obs.task = task_payload;
  return obs;
}

}  // namespace mpmcd
