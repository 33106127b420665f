#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <vector>

namespace mpmcd {

using Real = double;

template <int D>
using Vec = Eigen::Matrix<Real, D, 1>;

template <int D>
using Mat = Eigen::Matrix<Real, D, D>;

template <int D>
using IVec = Eigen::Matrix<int, D, 1>;

using VecX = Eigen::Matrix<Real, Eigen::Dynamic, 1>;
using MatX = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;

/// Frobenius inner product A : B.
template <typename A, typename B>
inline Real ddot(const A& a, const B& b) {
  return (a.array() * b.array()).sum();
}

inline Real sigmoid(Real z) {
  if (z >= 0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const Real e = std::exp(z);
  return e / (1.0 + e);
}

/// Softmax over a contiguous block, max-shifted.
inline VecX softmax(const VecX& z) {
  if (z.size() == 0) return z;
  const Real mx = z.maxCoeff();
  VecX e = (z.array() - mx).exp();
  return e / e.sum();
}

/// VJP of softmax: given y = softmax(z) and ybar, returns zbar.
inline VecX softmax_vjp(const VecX& y, const VecX& ybar) {
  const Real dot = y.dot(ybar);
  return y.array() * (ybar.array() - dot);
}

template <typename Derived>
inline bool all_finite(const Eigen::MatrixBase<Derived>& m) {
  return m.allFinite();
}

/// Canonical heading: +x.
template <int D>
inline Vec<D> canonical_heading() {
  Vec<D> h = Vec<D>::Zero();
  h[0] = 1.0;
  return h;
}

/// Index of the vertical axis.
template <int D>
constexpr int up_axis() {
  return 1;
}

}  // namespace mpmcd
