#pragma once

#include <cstdint>
#include <vector>

#include "mpmcd/core/types.hpp"
#include "mpmcd/environment/terrain.hpp"
#include "mpmcd/sim/config.hpp"

namespace mpmcd {

/// Eulerian node array. `mom` holds momentum after P2G and velocity after
/// grid_update. Terrain distance and normal are cached per node.
template <int D>
struct GridField {
  IVec<D> dims = IVec<D>::Zero();  // nodes per axis
  Real dx = 1.0;
  int wall_cells = 0;
  std::vector<Real> mass;
  std::vector<Vec<D>> mom;
  std::vector<Real> sdf;
  std::vector<Vec<D>> normal;

  static GridField make(const SimConfig<D>& cfg, const TerrainSDF<D>& terrain) {
    GridField g;
    g.dims = IVec<D>::Constant(cfg.grid_cells + 1);
    g.dx = cfg.dx();
    g.wall_cells = cfg.wall_cells;
    const std::size_t n = g.num_nodes();
    g.mass.assign(n, 0.0);
    g.mom.assign(n, Vec<D>::Zero());
    g.sdf.assign(n, std::numeric_limits<Real>::infinity());
    g.normal.assign(n, Vec<D>::UnitY());
    if (!terrain.empty()) {
      for (std::size_t i = 0; i < n; ++i) {
        const Vec<D> pos = g.node_position(g.coord(i));
        g.sdf[i] = terrain.sdf(pos);
        g.normal[i] = terrain.normal(pos);
      }
    }
    return g;
  }

  std::size_t num_nodes() const {
    std::size_t n = 1;
    for (int a = 0; a < D; ++a) n *= static_cast<std::size_t>(dims[a]);
    return n;
  }

  std::size_t index(const IVec<D>& c) const {
    std::size_t idx = 0;
    for (int a = 0; a < D; ++a) idx = idx * dims[a] + c[a];
    return idx;
  }

  IVec<D> coord(std::size_t idx) const {
    IVec<D> c;
    for (int a = D - 1; a >= 0; --a) {
      c[a] = static_cast<int>(idx % dims[a]);
      idx /= dims[a];
    }
    return c;
  }

  Vec<D> node_position(const IVec<D>& c) const { return c.template cast<Real>() * dx; }

  bool stencil_inside(const IVec<D>& base) const {
    for (int a = 0; a < D; ++a) {
      if (base[a] < 0 || base[a] + 2 >= dims[a]) return false;
    }
    return true;
  }

  void clear() {
    std::fill(mass.begin(), mass.end(), 0.0);
    std::fill(mom.begin(), mom.end(), Vec<D>::Zero());
  }

  Real total_mass() const {
    Real t = 0;
    for (Real m : mass) t += m;
    return t;
  }

  Vec<D> total_momentum() const {
    Vec<D> t = Vec<D>::Zero();
    for (const auto& p : mom) t += p;
    return t;
  }
};

}  // namespace mpmcd
