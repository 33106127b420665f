#pragma once

#include <cmath>
#include <vector>

#include "mpmcd/core/types.hpp"

namespace mpmcd {

/// Lattice points filling the box [lo, hi) at the given spacing, centered in
/// each lattice cell. Ordered with the last axis fastest.
template <int D>
inline std::vector<Vec<D>> sample_box(const Vec<D>& lo, const Vec<D>& hi, Real spacing) {
  IVec<D> count;
  for (int a = 0; a < D; ++a) {
    count[a] = std::max(0, static_cast<int>(std::floor((hi[a] - lo[a]) / spacing + 1e-9)));
  }
  std::vector<Vec<D>> pts;
  std::size_t total = 1;
  for (int a = 0; a < D; ++a) total *= static_cast<std::size_t>(count[a]);
  pts.reserve(total);
  IVec<D> idx = IVec<D>::Zero();
  for (std::size_t k = 0; k < total; ++k) {
    std::size_t rem = k;
    for (int a = D - 1; a >= 0; --a) {
      idx[a] = static_cast<int>(rem % count[a]);
      rem /= count[a];
    }
    pts.push_back(lo + (idx.template cast<Real>().array() + 0.5).matrix() * spacing);
  }
  return pts;
}

}  // namespace mpmcd
