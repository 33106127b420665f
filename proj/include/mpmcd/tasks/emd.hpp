#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

/// Minimum-cost perfect assignment of a square cost matrix (Hungarian method
/// with potentials, O(n^3)). Returns col_of_row.
inline std::vector<int> hungarian(const MatX& C) {
  const int n = static_cast<int>(C.rows());
  if (C.cols() != n) throw SizeMismatch("assignment cost must be square");
  const Real inf = std::numeric_limits<Real>::infinity();
  std::vector<Real> u(n + 1, 0), v(n + 1, 0), minv(n + 1);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  std::vector<char> used(n + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      Real delta = inf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const Real cur = C(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> col_of_row(n);
  for (int j = 1; j <= n; ++j) col_of_row[p[j] - 1] = j - 1;
  return col_of_row;
}

template <int D>
MatX squared_distance_matrix(const std::vector<Vec<D>>& A, const std::vector<Vec<D>>& B) {
  MatX C(A.size(), B.size());
  for (std::size_t i = 0; i < A.size(); ++i)
    for (std::size_t j = 0; j < B.size(); ++j) C(i, j) = (A[i] - B[j]).squaredNorm();
  return C;
}

struct EmdResult {
  Real value = 0;
  std::vector<int> assignment;  // exact path only
  Real epsilon = 0;             // entropic path only
  bool exact = true;
};

/// Exact mean squared matching cost.
template <int D>
EmdResult emd_exact(const std::vector<Vec<D>>& A, const std::vector<Vec<D>>& B) {
  if (A.size() != B.size()) throw SizeMismatch("EMD needs equal-size point sets");
  EmdResult res;
  if (A.empty()) return res;
  const MatX C = squared_distance_matrix(A, B);
  res.assignment = hungarian(C);
  for (std::size_t i = 0; i < A.size(); ++i) res.value += C(i, res.assignment[i]);
  res.value /= static_cast<Real>(A.size());
  return res;
}

/// Entropic transport cost <P, C> between uniform measures, log-domain
/// Sinkhorn with epsilon annealed down to `eps_rel * mean(C)`.
template <int D>
EmdResult emd_sinkhorn(const std::vector<Vec<D>>& A, const std::vector<Vec<D>>& B,
                       Real eps_rel = 1e-3, int iters_per_stage = 200) {
  if (A.size() != B.size()) throw SizeMismatch("EMD needs equal-size point sets");
  EmdResult res;
  res.exact = false;
  const int n = static_cast<int>(A.size());
  if (n == 0) return res;
  const MatX C = squared_distance_matrix(A, B);
  const Real scale = std::max(C.mean(), 1e-300);
  const Real eps_final = eps_rel * scale;
  const Real loga = -std::log(static_cast<Real>(n));
  VecX f = VecX::Zero(n), g = VecX::Zero(n);
  auto lse_rows = [&](const VecX& g, Real eps) {
    VecX out(n);
    for (int i = 0; i < n; ++i) {
      Real mx = -std::numeric_limits<Real>::infinity();
      for (int j = 0; j < n; ++j) mx = std::max(mx, (g[j] - C(i, j)) / eps);
      Real s = 0;
      for (int j = 0; j < n; ++j) s += std::exp((g[j] - C(i, j)) / eps - mx);
      out[i] = eps * (mx + std::log(s));
    }
    return out;
  };
  auto lse_cols = [&](const VecX& f, Real eps) {
    VecX out(n);
    for (int j = 0; j < n; ++j) {
      Real mx = -std::numeric_limits<Real>::infinity();
      for (int i = 0; i < n; ++i) mx = std::max(mx, (f[i] - C(i, j)) / eps);
      Real s = 0;
      for (int i = 0; i < n; ++i) s += std::exp((f[i] - C(i, j)) / eps - mx);
      out[j] = eps * (mx + std::log(s));
    }
    return out;
  };
  for (Real eps = scale; ; eps = std::max(eps * 0.5, eps_final)) {
    for (int it = 0; it < iters_per_stage; ++it) {
      f = eps * loga * VecX::Ones(n) - lse_rows(g, eps);
      g = eps * loga * VecX::Ones(n) - lse_cols(f, eps);
    }
    if (eps == eps_final) {
      res.epsilon = eps;
      for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) res.value += std::exp((f[i] + g[j] - C(i, j)) / eps) * C(i, j);
      break;
    }
  }
  return res;
}

/// Exact assignment up to 512 points, entropic above.
template <int D>
EmdResult emd_loss(const std::vector<Vec<D>>& A, const std::vector<Vec<D>>& B) {
  return A.size() <= 512 ? emd_exact(A, B) : emd_sinkhorn(A, B);
}

/// Gradient of the exact matching cost with respect to A (the assignment is
/// locally constant).
template <int D>
std::vector<Vec<D>> emd_exact_grad(const std::vector<Vec<D>>& A, const std::vector<Vec<D>>& B,
                                   const std::vector<int>& assignment) {
  std::vector<Vec<D>> g(A.size());
  const Real inv = A.empty() ? 0.0 : 1.0 / static_cast<Real>(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) g[i] = 2 * inv * (A[i] - B[assignment[i]]);
  return g;
}

}  // namespace mpmcd
