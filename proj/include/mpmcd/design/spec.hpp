#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

/// Decoded robot morphology over a fixed set of base particles.
///
/// m in [0, m0] is the geometry (a particle with m < tau_m * m0 is pruned at
/// scene assembly), s in [0, s0] scales the passive stiffness, column p of r
/// is the muscle membership of particle p on the K-simplex and f is the unit
/// fiber direction.
template <int D>
struct DesignSpec {
  std::vector<Vec<D>> base;  // base particle positions, robot frame
  std::vector<Real> m;
  std::vector<Real> s;
  MatX r;  // K x n
  std::vector<Vec<D>> f;
  Real m0 = 1.0;
  Real s0 = 1.0;

  std::size_t size() const { return base.size(); }
  int num_actuators() const { return static_cast<int>(r.rows()); }

  static DesignSpec uniform(std::vector<Vec<D>> base, int K, Real m0 = 1.0, Real s0 = 1.0) {
    DesignSpec d;
    const std::size_t n = base.size();
    d.base = std::move(base);
    d.m.assign(n, m0);
    d.s.assign(n, s0);
    d.r = MatX::Constant(K, static_cast<Eigen::Index>(n), K > 0 ? 1.0 / K : 0.0);
    d.f.assign(n, canonical_heading<D>());
    d.m0 = m0;
    d.s0 = s0;
    return d;
  }

  /// Indices of particles that survive the mass cutoff.
  std::vector<std::size_t> kept(Real tau_rel) const {
    std::vector<std::size_t> out;
    for (std::size_t p = 0; p < size(); ++p) {
      if (m[p] >= tau_rel * m0) out.push_back(p);
    }
    return out;
  }

  /// Throws Error naming the first violated invariant.
  void check_invariants(Real tol = 1e-9) const {
    const std::size_t n = size();
    if (m.size() != n || s.size() != n || f.size() != n || static_cast<std::size_t>(r.cols()) != n) {
      throw SizeMismatch("design fields have inconsistent lengths");
    }
    for (std::size_t p = 0; p < n; ++p) {
      if (!(m[p] >= 0 && m[p] <= m0 * (1 + tol))) {
        throw Error("mass out of [0, m0] at particle " + std::to_string(p));
      }
      if (!(s[p] >= 0 && s[p] <= s0 * (1 + tol))) {
        throw Error("stiffness out of [0, s0] at particle " + std::to_string(p));
      }
      if (std::abs(f[p].norm() - 1.0) > tol) {
        throw Error("fiber direction not unit at particle " + std::to_string(p));
      }
      if (r.rows() > 0) {
        const auto col = r.col(static_cast<Eigen::Index>(p));
        if (std::abs(col.sum() - 1.0) > tol || col.minCoeff() < -tol) {
          throw Error("membership off the simplex at particle " + std::to_string(p));
        }
      }
    }
  }
};

/// Cotangent of a DesignSpec's fields (same layout).
template <int D>
struct DesignGrad {
  std::vector<Real> m;
  std::vector<Real> s;
  MatX r;
  std::vector<Vec<D>> f;

  static DesignGrad zeros(std::size_t n, int K) {
    DesignGrad g;
    g.m.assign(n, 0.0);
    g.s.assign(n, 0.0);
    g.r = MatX::Zero(K, static_cast<Eigen::Index>(n));
    g.f.assign(n, Vec<D>::Zero());
    return g;
  }
};

}  // namespace mpmcd
