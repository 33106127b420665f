#pragma once

#include <functional>
#include <vector>

#include "mpmcd/core/types.hpp"

namespace mpmcd {

struct SweepResult {
  std::vector<Real> values;
  std::vector<Real> losses;
  std::vector<std::size_t> minima;  // strict interior local minima

  std::size_t num_minima() const { return minima.size(); }
};

/// Indices i with l[i-1] > l[i] < l[i+1].
inline std::vector<std::size_t> strict_interior_minima(const std::vector<Real>& l) {
  std::vector<std::size_t> out;
  for (std::size_t i = 1; i + 1 < l.size(); ++i) {
    if (l[i] < l[i - 1] && l[i] < l[i + 1]) out.push_back(i);
  }
  return out;
}

inline std::vector<Real> linspace(Real a, Real b, int n) {
  std::vector<Real> out(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out[i] = n == 1 ? a : a + (b - a) * i / (n - 1);
  return out;
}

/// Evaluates loss(value) over the grid.
inline SweepResult sweep_1d(const std::function<Real(Real)>& loss, const std::vector<Real>& grid) {
  SweepResult res;
  res.values = grid;
  res.losses.reserve(grid.size());
  for (Real v : grid) res.losses.push_back(loss(v));
  res.minima = strict_interior_minima(res.losses);
  return res;
}

}  // namespace mpmcd
