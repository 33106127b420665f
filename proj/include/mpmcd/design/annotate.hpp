#pragma once

#include <cstdint>
#include <limits>
#include <random>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/core/types.hpp"

namespace mpmcd {

template <int D>
struct MuscleAnnotation {
  std::vector<int> cluster;  // per point
  MatX r;                    // K x n one-hot
  std::vector<Vec<D>> f;     // per point, from its cluster
  std::vector<Vec<D>> axis;  // per cluster
};

/// Principal axis of a point cloud, sign-aligned with `heading`. Falls back to
/// the heading when the cloud has fewer than two points or no dominant axis.
template <int D>
Vec<D> principal_axis(const std::vector<Vec<D>>& pts, const Vec<D>& heading) {
  if (pts.size() < 2) return heading;
  Vec<D> mean = Vec<D>::Zero();
  for (const auto& x : pts) mean += x;
  mean /= static_cast<Real>(pts.size());
  Mat<D> cov = Mat<D>::Zero();
  for (const auto& x : pts) cov += (x - mean) * (x - mean).transpose();
  Eigen::SelfAdjointEigenSolver<Mat<D>> es(cov);
  const auto& ev = es.eigenvalues();  // ascending
  if (ev[D - 1] <= 1e-14 || ev[D - 1] - ev[D - 2] <= 1e-9 * ev[D - 1]) return heading;
  Vec<D> a = es.eigenvectors().col(D - 1).normalized();
  return a.dot(heading) < 0 ? Vec<D>(-a) : a;
}

/// K-means (k-means++ seeding, Lloyd iterations) over the points followed by
/// a per-cluster principal axis. Empty clusters are re-seeded from the point
/// farthest from its center; EmptyCluster is thrown when that keeps failing.
template <int D>
MuscleAnnotation<D> annotate_muscles(const std::vector<Vec<D>>& pts, int k,
                                     const Vec<D>& heading = canonical_heading<D>(),
                                     std::uint64_t seed = 0, int max_iters = 100,
                                     int max_reseeds = 10) {
  const int n = static_cast<int>(pts.size());
  if (k < 1 || n < k) throw ConfigError("annotate_muscles needs 1 <= k <= number of points");
  std::mt19937_64 rng(seed);

  std::vector<Vec<D>> centers;
  centers.push_back(pts[std::uniform_int_distribution<int>(0, n - 1)(rng)]);
  std::vector<Real> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    Real total = 0;
    for (int i = 0; i < n; ++i) {
      Real best = std::numeric_limits<Real>::infinity();
      for (const auto& c : centers) best = std::min(best, (pts[i] - c).squaredNorm());
      d2[i] = best;
      total += best;
    }
    int pick = 0;
    if (total > 0) {
      Real u = std::uniform_real_distribution<Real>(0, total)(rng);
      for (pick = 0; pick < n - 1; ++pick) {
        u -= d2[pick];
        if (u <= 0 && d2[pick] > 0) break;
      }
    } else {
      // Duplicated points: take the next unused index.
      pick = static_cast<int>(centers.size());
    }
    centers.push_back(pts[pick]);
  }

  std::vector<int> assign(n, -1);
  int reseeds = 0;
  for (int it = 0; it < max_iters; ++it) {
    bool changed = false;
    for (int i = 0; i < n; ++i) {
      int best = 0;
      Real bd = std::numeric_limits<Real>::infinity();
      for (int c = 0; c < k; ++c) {
        const Real d = (pts[i] - centers[c]).squaredNorm();
        if (d < bd) {
          bd = d;
          best = c;
        }
      }
      if (assign[i] != best) {
        assign[i] = best;
        changed = true;
      }
    }
    std::vector<Vec<D>> sum(k, Vec<D>::Zero());
    std::vector<int> count(k, 0);
    for (int i = 0; i < n; ++i) {
      sum[assign[i]] += pts[i];
      ++count[assign[i]];
    }
    bool empty = false;
    for (int c = 0; c < k; ++c) {
      if (count[c] > 0) {
        centers[c] = sum[c] / count[c];
        continue;
      }
      empty = true;
      if (++reseeds > max_reseeds) {
        throw EmptyCluster("cluster " + std::to_string(c) + " stayed empty after re-seeding");
      }
      int far = 0;
      Real fd = -1;
      for (int i = 0; i < n; ++i) {
        if (count[assign[i]] <= 1) continue;
        const Real d = (pts[i] - centers[assign[i]]).squaredNorm();
        if (d > fd) {
          fd = d;
          far = i;
        }
      }
      centers[c] = pts[far];
      --count[assign[far]];
      assign[far] = c;
      count[c] = 1;
    }
    if (!changed && !empty) break;
  }

  MuscleAnnotation<D> out;
  out.cluster = assign;
  out.r = MatX::Zero(k, n);
  std::vector<std::vector<Vec<D>>> members(k);
  for (int i = 0; i < n; ++i) {
    out.r(assign[i], i) = 1.0;
    members[assign[i]].push_back(pts[i]);
  }
  for (int c = 0; c < k; ++c) out.axis.push_back(principal_axis<D>(members[c], heading));
  for (int i = 0; i < n; ++i) out.f.push_back(out.axis[assign[i]]);
  return out;
}

}  // namespace mpmcd
