#pragma once

#include <array>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

/// x(t) = c0 + c1 t + ... + c5 t^5 on [0, T].
template <int D>
struct QuinticPath {
  std::array<Vec<D>, 6> c;
  Real T = 1.0;

  Vec<D> position(Real t) const {
    Vec<D> x = c[5];
    for (int i = 4; i >= 0; --i) x = x * t + c[i];
    return x;
  }
  Vec<D> velocity(Real t) const {
    Vec<D> v = 5 * c[5];
    for (int i = 4; i >= 1; --i) v = v * t + i * c[i];
    return v;
  }
  Vec<D> acceleration(Real t) const {
    Vec<D> a = 20 * c[5];
    for (int i = 4; i >= 2; --i) a = a * t + (i * (i - 1)) * c[i];
    return a;
  }

  /// Waypoints at t = k * dt for k = 1..count.
  std::vector<Vec<D>> sample(int count, Real dt) const {
    std::vector<Vec<D>> out;
    for (int k = 1; k <= count; ++k) out.push_back(position(k * dt));
    return out;
  }
};

/// Quintic matching position, velocity and acceleration at t = 0 and t = T.
template <int D>
QuinticPath<D> quintic_fit(const Vec<D>& xs, const Vec<D>& vs, const Vec<D>& as,
                           const Vec<D>& xt, const Vec<D>& vt, const Vec<D>& at, Real T) {
  if (!(T > 0)) throw SingularSystem("quintic horizon must be positive");
  Eigen::Matrix<Real, 6, 6> A = Eigen::Matrix<Real, 6, 6>::Zero();
  A(0, 0) = 1;
  A(1, 1) = 1;
  A(2, 2) = 2;
  for (int i = 0; i < 6; ++i) {
    A(3, i) = std::pow(T, i);
    if (i >= 1) A(4, i) = i * std::pow(T, i - 1);
    if (i >= 2) A(5, i) = i * (i - 1) * std::pow(T, i - 2);
  }
  Eigen::FullPivLU<Eigen::Matrix<Real, 6, 6>> lu(A);
  if (!lu.isInvertible()) throw SingularSystem("quintic boundary system is singular");
  QuinticPath<D> path;
  path.T = T;
  for (int a = 0; a < D; ++a) {
    Eigen::Matrix<Real, 6, 1> b;
    b << xs[a], vs[a], as[a], xt[a], vt[a], at[a];
    const Eigen::Matrix<Real, 6, 1> coef = lu.solve(b);
    for (int i = 0; i < 6; ++i) path.c[i][a] = coef[i];
  }
  return path;
}

}  // namespace mpmcd
