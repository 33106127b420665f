#pragma once

#include <cmath>

#include "mpmcd/core/types.hpp"
#include "mpmcd/sim/config.hpp"

namespace mpmcd {

/// Terrain boundary condition on one grid velocity with outward normal n.
template <int D>
inline Vec<D> apply_terrain_bc(const Vec<D>& v, const Vec<D>& n, BoundaryCondition bc, Real mu) {
  switch (bc) {
    case BoundaryCondition::Sticky:
      return Vec<D>::Zero();
    case BoundaryCondition::Slip:
      return v - v.dot(n) * n;
    case BoundaryCondition::Separate: {
      const Real vn = v.dot(n);
      return vn > 0 ? v : Vec<D>(v - vn * n);
    }
    case BoundaryCondition::Friction: {
      const Real vn = v.dot(n);
      if (vn >= 0) return v;
      const Vec<D> vt = v - vn * n;
      const Real k = vt.norm();
      if (k <= -mu * vn || k == 0) return Vec<D>::Zero();
      return vt * (1.0 + mu * vn / k);
    }
  }
  return v;
}

/// VJP of apply_terrain_bc at input v.
template <int D>
inline Vec<D> apply_terrain_bc_vjp(const Vec<D>& v, const Vec<D>& n, BoundaryCondition bc, Real mu,
                                   const Vec<D>& out_bar) {
  switch (bc) {
    case BoundaryCondition::Sticky:
      return Vec<D>::Zero();
    case BoundaryCondition::Slip:
      return out_bar - out_bar.dot(n) * n;
    case BoundaryCondition::Separate: {
      const Real vn = v.dot(n);
      return vn > 0 ? out_bar : Vec<D>(out_bar - out_bar.dot(n) * n);
    }
    case BoundaryCondition::Friction: {
      const Real vn = v.dot(n);
      if (vn >= 0) return out_bar;
      const Vec<D> vt = v - vn * n;
      const Real k = vt.norm();
      if (k <= -mu * vn || k == 0) return Vec<D>::Zero();
      // out = vt + mu vn vt / k
      const Real tdo = vt.dot(out_bar);
      const Vec<D> vt_bar = out_bar + mu * vn * (out_bar / k - vt * (tdo / (k * k * k)));
      const Real vn_bar = mu * tdo / k;
      return vt_bar - vt_bar.dot(n) * n + vn_bar * n;
    }
  }
  return out_bar;
}

/// Which velocity components the domain walls zero at a node. Bit a set
/// means component a is zeroed; all bits set with Sticky walls.
template <int D>
inline unsigned wall_mask(const IVec<D>& c, const IVec<D>& dims, int wall_cells, const Vec<D>& v,
                          BoundaryCondition bc) {
  unsigned mask = 0;
  bool touching = false;
  for (int a = 0; a < D; ++a) {
    const bool lo = c[a] < wall_cells;
    const bool hi = c[a] > dims[a] - 1 - wall_cells;
    if (!lo && !hi) continue;
    touching = true;
    const bool into = (lo && v[a] < 0) || (hi && v[a] > 0);
    if (bc == BoundaryCondition::Slip || into) mask |= 1u << a;
  }
  if (touching && bc == BoundaryCondition::Sticky) mask = (1u << D) - 1;
  return mask;
}

template <int D>
inline Vec<D> apply_wall_mask(Vec<D> v, unsigned mask) {
  for (int a = 0; a < D; ++a) {
    if (mask & (1u << a)) v[a] = 0;
  }
  return v;
}

}  // namespace mpmcd
