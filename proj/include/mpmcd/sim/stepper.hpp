#pragma once

#include <atomic>
#include <cmath>
#include <iostream>
#include <string>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/parallel.hpp"
#include "mpmcd/core/types.hpp"
#include "mpmcd/environment/terrain.hpp"
#include "mpmcd/sim/boundary.hpp"
#include "mpmcd/sim/config.hpp"
#include "mpmcd/sim/grid.hpp"
#include "mpmcd/sim/kernel.hpp"
#include "mpmcd/sim/material.hpp"
#include "mpmcd/sim/particles.hpp"

namespace mpmcd {

/// Per-particle actuation a_p = u . r_p. Cover particles get 0.
template <int D>
inline std::vector<Real> actuation_from_action(const ParticleSystem<D>& ps, const VecX& u) {
  std::vector<Real> a(ps.size(), 0.0);
  if (ps.num_actuators() == 0) return a;
  if (u.size() != ps.num_actuators()) {
    throw SizeMismatch("action has " + std::to_string(u.size()) + " entries, design has " +
                       std::to_string(ps.num_actuators()) + " actuators");
  }
  for (std::size_t p = 0; p < ps.size(); ++p) {
    if (ps.is_actuated(p)) a[p] = u.dot(ps.r.col(static_cast<Eigen::Index>(p)));
  }
  return a;
}

/// Total first Piola-Kirchhoff stress of a particle: scaled constitutive
/// stress plus the muscle term for actuated particles.
template <int D>
inline Mat<D> particle_pk1(const ParticleSystem<D>& ps, std::size_t p, Real a_p,
                           const SimConfig<D>& cfg) {
  const auto& mat = ps.materials[ps.material_id[p]];
  Mat<D> P = ps.s[p] * pk1_stress<D>(ps.F[p], mat);
  if (ps.is_actuated(p)) {
    P += muscle_pk1<D>(ps.F[p], ps.f[p], cfg.muscle_stiffness, cfg.actuation_offset + a_p);
  }
  return P;
}

/// MLS-MPM affine momentum term  -(4/dx^2) dt V P F^T + m C.
template <int D>
inline Mat<D> particle_affine(const ParticleSystem<D>& ps, std::size_t p, Real a_p,
                              const SimConfig<D>& cfg) {
  const Real inv_dx = cfg.inv_dx();
  const Mat<D> P = particle_pk1<D>(ps, p, a_p, cfg);
  return -4.0 * inv_dx * inv_dx * cfg.dt * ps.volume(p) * P * ps.F[p].transpose() +
         ps.m[p] * ps.C[p];
}

namespace detail {

template <int D>
inline void scatter_particle(const ParticleSystem<D>& ps, std::size_t p, const Mat<D>& A,
                             const Real inv_dx, const Real dx, std::vector<Real>& mass,
                             std::vector<Vec<D>>& mom, const GridField<D>& grid) {
  const auto st = Stencil<D>::make(ps.x[p], inv_dx);
  if (!grid.stencil_inside(st.base)) {
    throw OutOfDomain("particle " + std::to_string(p) + " left the grid");
  }
  const Real mp = ps.m[p];
  const Vec<D> mv = mp * ps.v[p];
  for (int k = 0; k < Stencil<D>::size(); ++k) {
    const IVec<D> o = Stencil<D>::offset(k);
    const Real w = st.weight(o);
    const Vec<D> dpos = (o.template cast<Real>() - st.frac) * dx;
    const std::size_t idx = grid.index(st.base + o);
    mass[idx] += w * mp;
    mom[idx] += w * (mv + A * dpos);
  }
}

}  // namespace detail

/// Particle-to-grid transfer. Expects a cleared grid.
template <int D>
inline void p2g(const ParticleSystem<D>& ps, GridField<D>& grid, const std::vector<Real>& act,
                const SimConfig<D>& cfg) {
  const Real inv_dx = cfg.inv_dx();
  const Real dx = cfg.dx();
  const std::size_t n = ps.size();
  std::vector<Mat<D>> affine(n);
  parallel_ranges(n, cfg.threads, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t p = b; p < e; ++p) {
      try {
        affine[p] = particle_affine<D>(ps, p, act.empty() ? 0.0 : act[p], cfg);
      } catch (const NonInvertibleF& err) {
        throw NonInvertibleF("particle " + std::to_string(p) + ": " + err.what());
      }
    }
  });
  if (cfg.threads <= 1) {
    for (std::size_t p = 0; p < n; ++p) {
      detail::scatter_particle<D>(ps, p, affine[p], inv_dx, dx, grid.mass, grid.mom, grid);
    }
    return;
  }
  // One private buffer per worker, reduced in worker order.
  const int t = cfg.threads;
  std::vector<std::vector<Real>> mass(t, std::vector<Real>(grid.num_nodes(), 0.0));
  std::vector<std::vector<Vec<D>>> mom(t, std::vector<Vec<D>>(grid.num_nodes(), Vec<D>::Zero()));
  parallel_ranges(n, t, [&](std::size_t b, std::size_t e, int w) {
    for (std::size_t p = b; p < e; ++p) {
      detail::scatter_particle<D>(ps, p, affine[p], inv_dx, dx, mass[w], mom[w], grid);
    }
  });
  for (int w = 0; w < t; ++w) {
    for (std::size_t i = 0; i < grid.num_nodes(); ++i) {
      grid.mass[i] += mass[w][i];
      grid.mom[i] += mom[w][i];
    }
  }
}

/// Normalizes momentum to velocity, adds gravity, applies terrain and wall
/// boundary conditions. Zero-mass nodes are skipped.
template <int D>
inline void grid_update(GridField<D>& grid, const SimConfig<D>& cfg) {
  const std::size_t n = grid.num_nodes();
  for (std::size_t i = 0; i < n; ++i) {
    if (grid.mass[i] <= 0) continue;
    Vec<D> v = grid.mom[i] / grid.mass[i] + cfg.dt * cfg.gravity;
    if (grid.sdf[i] <= 0) {
      v = apply_terrain_bc<D>(v, grid.normal[i], cfg.terrain_bc, cfg.terrain_friction);
    }
    if (grid.wall_cells > 0) {
      const IVec<D> c = grid.coord(i);
      v = apply_wall_mask<D>(v, wall_mask<D>(c, grid.dims, grid.wall_cells, v, cfg.wall_bc));
    }
    grid.mom[i] = v;
  }
}

/// Deformation gradient after the constitutive post-step: plastic return
/// mapping, or volumetric reset for fluids.
template <int D>
inline Mat<D> post_g2p_deformation(const Mat<D>& F, const MaterialParams& mat) {
  if (mat.is_fluid()) {
    const Real J = F.determinant();
    return std::pow(J, 1.0 / D) * Mat<D>::Identity();
  }
  if (mat.is_plastic()) return plastic_project<D>(F, mat);
  return F;
}

/// Grid-to-particle transfer: velocity, affine field, advection and F update.
template <int D>
inline void g2p(const GridField<D>& grid, ParticleSystem<D>& ps, const SimConfig<D>& cfg) {
  const Real inv_dx = cfg.inv_dx();
  const Real dx = cfg.dx();
  const Real dt = cfg.dt;
  parallel_ranges(ps.size(), cfg.threads, [&](std::size_t b, std::size_t e, int) {
    for (std::size_t p = b; p < e; ++p) {
      const auto st = Stencil<D>::make(ps.x[p], inv_dx);
      Vec<D> v = Vec<D>::Zero();
      Mat<D> C = Mat<D>::Zero();
      for (int k = 0; k < Stencil<D>::size(); ++k) {
        const IVec<D> o = Stencil<D>::offset(k);
        const Real w = st.weight(o);
        const Vec<D> dpos = (o.template cast<Real>() - st.frac) * dx;
        const Vec<D>& gv = grid.mom[grid.index(st.base + o)];
        v += w * gv;
        C += (4.0 * inv_dx * inv_dx * w) * gv * dpos.transpose();
      }
      ps.v[p] = v;
      ps.C[p] = C;
      ps.x[p] += dt * v;
      const Mat<D> Fn = (Mat<D>::Identity() + dt * C) * ps.F[p];
      ps.F[p] = post_g2p_deformation<D>(Fn, ps.materials[ps.material_id[p]]);
    }
  });
}

/// True when dt exceeds cfl * dx / max particle speed.
template <int D>
inline bool cfl_violated(const ParticleSystem<D>& ps, const SimConfig<D>& cfg) {
  Real vmax = 0;
  for (const auto& v : ps.v) vmax = std::max(vmax, v.norm());
  return vmax > 0 && cfg.dt > cfg.cfl * cfg.dx() / vmax;
}

namespace detail {
inline std::atomic<bool>& cfl_warned() {
  static std::atomic<bool> flag{false};
  return flag;
}
}  // namespace detail

template <int D>
inline void check_finite_state(const ParticleSystem<D>& ps, long step) {
  for (std::size_t p = 0; p < ps.size(); ++p) {
    if (!ps.x[p].allFinite() || !ps.v[p].allFinite() || !ps.F[p].allFinite() ||
        !ps.C[p].allFinite()) {
      throw SimulationDiverged("non-finite state at step " + std::to_string(step) +
                               ", particle " + std::to_string(p));
    }
  }
}

/// One full substep with per-particle actuation already resolved.
template <int D>
inline void sim_substep_actuated(ParticleSystem<D>& ps, GridField<D>& grid,
                                 const std::vector<Real>& act, const SimConfig<D>& cfg,
                                 long step = 0) {
  if (cfg.check_finite && cfl_violated<D>(ps, cfg) && !detail::cfl_warned().exchange(true)) {
    std::cerr << "warning: CFL bound violated at step " << step << " (dt=" << cfg.dt << ")\n";
  }
  grid.clear();
  p2g<D>(ps, grid, act, cfg);
  grid_update<D>(grid, cfg);
  g2p<D>(grid, ps, cfg);
  if (cfg.check_finite) check_finite_state<D>(ps, step);
}

/// One full substep driven by the action vector u (a_p = u . r_p).
template <int D>
inline void sim_substep(ParticleSystem<D>& ps, GridField<D>& grid, const VecX& u,
                        const SimConfig<D>& cfg, long step = 0) {
  sim_substep_actuated<D>(ps, grid, actuation_from_action<D>(ps, u), cfg, step);
}

/// Convenience overload that builds the grid from the terrain.
template <int D>
inline void sim_substep(ParticleSystem<D>& ps, const TerrainSDF<D>& terrain, const VecX& u,
                        const SimConfig<D>& cfg, long step = 0) {
  auto grid = GridField<D>::make(cfg, terrain);
  sim_substep<D>(ps, grid, u, cfg, step);
}

}  // namespace mpmcd
