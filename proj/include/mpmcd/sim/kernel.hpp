#pragma once

#include <array>
#include <cmath>

#include "mpmcd/core/types.hpp"

namespace mpmcd {

/// Quadratic B-spline weights for the three nodes around a particle along one
/// axis. `frac` is the particle offset from the lowest node in cell units and
/// lies in [0.5, 1.5).
inline std::array<Real, 3> quadratic_bspline(Real frac) {
  const Real a = 1.5 - frac;
  const Real b = frac - 1.0;
  const Real c = frac - 0.5;
  return {0.5 * a * a, 0.75 - b * b, 0.5 * c * c};
}

/// d(weight)/d(frac) for the three weights of quadratic_bspline.
inline std::array<Real, 3> quadratic_bspline_grad(Real frac) {
  return {-(1.5 - frac), -2.0 * (frac - 1.0), frac - 0.5};
}

/// Per-particle stencil: base node index, in-cell offset and weights per axis.
template <int D>
struct Stencil {
  IVec<D> base;
  Vec<D> frac;
  std::array<std::array<Real, 3>, D> w;
  std::array<std::array<Real, 3>, D> dw;  // d/d(frac)

  static Stencil make(const Vec<D>& x, Real inv_dx) {
    Stencil s;
    for (int a = 0; a < D; ++a) {
      const Real gx = x[a] * inv_dx;
      s.base[a] = static_cast<int>(std::floor(gx - 0.5));
      s.frac[a] = gx - s.base[a];
      s.w[a] = quadratic_bspline(s.frac[a]);
      s.dw[a] = quadratic_bspline_grad(s.frac[a]);
    }
    return s;
  }

  /// Number of nodes in the stencil (3^D).
  static constexpr int size() { return D == 2 ? 9 : 27; }

  /// Offset of the k-th stencil node in {0,1,2}^D.
  static IVec<D> offset(int k) {
    IVec<D> o;
    for (int a = D - 1; a >= 0; --a) {
      o[a] = k % 3;
      k /= 3;
    }
    return o;
  }

  Real weight(const IVec<D>& o) const {
    Real r = 1.0;
    for (int a = 0; a < D; ++a) r *= w[a][o[a]];
    return r;
  }

  /// Gradient of the tensor-product weight with respect to `frac`.
  Vec<D> weight_grad(const IVec<D>& o) const {
    Vec<D> g;
    for (int a = 0; a < D; ++a) {
      Real v = dw[a][o[a]];
      for (int b = 0; b < D; ++b) {
        if (b != a) v *= w[b][o[b]];
      }
      g[a] = v;
    }
    return g;
  }
};

}  // namespace mpmcd
