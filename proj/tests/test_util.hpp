#pragma once

#include <cmath>
#include <functional>
#include <random>

#include "mpmcd/core/types.hpp"
#include "mpmcd/sim/particles.hpp"

namespace mpmcd::testing {

inline std::mt19937_64& rng() {
  static std::mt19937_64 g(12345);
  return g;
}

inline Real uniform(Real lo, Real hi) {
  std::uniform_real_distribution<Real> d(lo, hi);
  return d(rng());
}

template <int D>
inline Vec<D> random_vec(Real lo, Real hi) {
  Vec<D> v;
  for (int a = 0; a < D; ++a) v[a] = uniform(lo, hi);
  return v;
}

/// Random deformation gradient near the identity with positive determinant.
template <int D>
inline Mat<D> random_F(Real spread = 0.3) {
  for (;;) {
    Mat<D> F = Mat<D>::Identity();
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) F(i, j) += uniform(-spread, spread);
    if (F.determinant() > 0.2) return F;
  }
}

template <int D>
inline Mat<D> random_rotation() {
  Mat<D> A;
  for (int i = 0; i < D; ++i)
    for (int j = 0; j < D; ++j) A(i, j) = uniform(-1, 1);
  Eigen::HouseholderQR<Mat<D>> qr(A);
  Mat<D> Q = qr.householderQ();
  if (Q.determinant() < 0) Q.col(0) *= -1;
  return Q;
}

/// Central-difference gradient of a scalar function of a matrix.
template <int D>
inline Mat<D> fd_matrix_gradient(const std::function<Real(const Mat<D>&)>& fn, const Mat<D>& X,
                                 Real h = 1e-6) {
  Mat<D> g;
  for (int i = 0; i < D; ++i) {
    for (int j = 0; j < D; ++j) {
      Mat<D> a = X, b = X;
      a(i, j) += h;
      b(i, j) -= h;
      g(i, j) = (fn(a) - fn(b)) / (2 * h);
    }
  }
  return g;
}

/// Max relative difference between two matrices, normalized by the larger norm.
template <typename A, typename B>
inline Real rel_err(const A& a, const B& b) {
  const Real denom = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / denom;
}

inline Real rel_err_scalar(Real a, Real b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-12});
}

}  // namespace mpmcd::testing
