#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

/// Height field over the lateral axes with bilinear interpolation.
///
/// In 2D the lateral axis is x; in 3D the lateral axes are (x, z). Samples are
/// spaced `spacing` apart starting at lateral coordinate 0. Signed distance is
/// measured vertically: sdf(p) = p_up - h(p_lateral).
template <int D>
struct TerrainSDF {
  std::vector<Real> heights;  // row-major over (x[, z])
  int nx = 0;
  int nz = 1;
  Real spacing = 1.0;

  bool empty() const { return heights.empty(); }

  static TerrainSDF none() { return {}; }

  static TerrainSDF flat(Real h, Real extent, int samples = 2) {
    TerrainSDF t;
    t.nx = samples;
    t.nz = D == 3 ? samples : 1;
    t.spacing = extent / (samples - 1);
    t.heights.assign(static_cast<std::size_t>(t.nx) * t.nz, h);
    return t;
  }

  Real sample(int i, int k) const {
    i = std::clamp(i, 0, nx - 1);
    k = std::clamp(k, 0, nz - 1);
    return heights[static_cast<std::size_t>(i) * nz + k];
  }

  struct HeightGrad {
    Real h;
    Real dhdx;
    Real dhdz;
  };

  HeightGrad height(Real lx, Real lz) const {
    const Real gx = std::clamp(lx / spacing, 0.0, static_cast<Real>(nx - 1));
    const int i = std::min(static_cast<int>(std::floor(gx)), std::max(nx - 2, 0));
    const Real tx = nx > 1 ? gx - i : 0.0;
    if constexpr (D == 2) {
      const Real h0 = sample(i, 0);
      const Real h1 = sample(i + 1, 0);
      return {h0 + tx * (h1 - h0), nx > 1 ? (h1 - h0) / spacing : 0.0, 0.0};
    } else {
      const Real gz = std::clamp(lz / spacing, 0.0, static_cast<Real>(nz - 1));
      const int k = std::min(static_cast<int>(std::floor(gz)), std::max(nz - 2, 0));
      const Real tz = nz > 1 ? gz - k : 0.0;
      const Real h00 = sample(i, k), h10 = sample(i + 1, k);
      const Real h01 = sample(i, k + 1), h11 = sample(i + 1, k + 1);
      // written so that a flat map reproduces its height exactly
      const Real h = h00 + tx * (h10 - h00) + tz * (h01 - h00) + tx * tz * (h11 - h10 - h01 + h00);
      const Real dx = ((1 - tz) * (h10 - h00) + tz * (h11 - h01)) / spacing;
      const Real dz = ((1 - tx) * (h01 - h00) + tx * (h11 - h10)) / spacing;
      return {h, dx, dz};
    }
  }

  Real sdf(const Vec<D>& p) const {
    if (empty()) return std::numeric_limits<Real>::infinity();
    const Real lz = D == 3 ? p[D - 1] : 0.0;
    return p[1] - height(p[0], lz).h;
  }

  /// Unit outward normal of the surface below p.
  Vec<D> normal(const Vec<D>& p) const {
    Vec<D> n = Vec<D>::Zero();
    n[1] = 1.0;
    if (empty()) return n;
    const Real lz = D == 3 ? p[D - 1] : 0.0;
    const auto hg = height(p[0], lz);
    n[0] = -hg.dhdx;
    if constexpr (D == 3) n[2] = -hg.dhdz;
    return n.normalized();
  }
};

}  // namespace mpmcd
