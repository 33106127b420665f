#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/design/decoder.hpp"

namespace mpmcd {

/// Per-particle logits: [m~ (n), s~ (n), r~ (K x n, column-major)].
template <int D>
class ParticleDecoder final : public DesignDecoder<D> {
 public:
  ParticleDecoder(std::vector<Vec<D>> base, int K, Real m0 = 1.0, Real s0 = 1.0)
      : base_(std::move(base)), K_(K), m0_(m0), s0_(s0),
        theta_(VecX::Zero(static_cast<Eigen::Index>(base_.size()) * (2 + K))) {}

  std::string kind() const override { return "particle"; }
  VecX params() const override { return theta_; }
  void set_params(const VecX& p) override {
    if (p.size() != theta_.size()) {
      throw SizeMismatch("particle design expects " + std::to_string(theta_.size()) +
                         " parameters, got " + std::to_string(p.size()));
    }
    theta_ = p;
  }

  DesignSpec<D> decode() const override {
    auto d = DesignSpec<D>::uniform(base_, K_, m0_, s0_);
    const auto n = static_cast<Eigen::Index>(base_.size());
    for (Eigen::Index p = 0; p < n; ++p) {
      detail::apply_heads<D>(d, p, theta_[p], theta_[n + p], theta_.segment(2 * n + p * K_, K_));
    }
    return d;
  }

  VecX vjp(const DesignGrad<D>& g) const override {
    const auto d = decode();
    const auto n = static_cast<Eigen::Index>(base_.size());
    VecX out = VecX::Zero(theta_.size());
    for (Eigen::Index p = 0; p < n; ++p) {
      const auto h = detail::head_vjp<D>(d, g, p);
      out[p] = h.zm;
      out[n + p] = h.zs;
      if (K_ > 0) out.segment(2 * n + p * K_, K_) = h.zr;
    }
    return out;
  }

  std::unique_ptr<DesignDecoder<D>> clone() const override {
    return std::make_unique<ParticleDecoder>(*this);
  }

 private:
  std::vector<Vec<D>> base_;
  int K_;
  Real m0_, s0_;
  VecX theta_;
};

/// Free-function form of the particle decoder.
template <int D>
DesignSpec<D> decode_particle(const VecX& params, const std::vector<Vec<D>>& base, int K,
                              Real m0 = 1.0, Real s0 = 1.0) {
  ParticleDecoder<D> dec(base, K, m0, s0);
  dec.set_params(params);
  return dec.decode();
}

/// Assigns each base particle to a cell of a regular voxel grid with `per_axis`
/// cells per axis over the bounding box of the base set.
template <int D>
std::vector<int> voxelize(const std::vector<Vec<D>>& base, const IVec<D>& per_axis) {
  std::vector<int> map(base.size(), -1);
  if (base.empty()) return map;
  Vec<D> lo = base[0], hi = base[0];
  for (const auto& x : base) {
    lo = lo.cwiseMin(x);
    hi = hi.cwiseMax(x);
  }
  for (std::size_t p = 0; p < base.size(); ++p) {
    int idx = 0;
    for (int a = 0; a < D; ++a) {
      const Real ext = hi[a] - lo[a];
      int c = ext > 0 ? static_cast<int>(std::floor((base[p][a] - lo[a]) / ext * per_axis[a])) : 0;
      c = std::clamp(c, 0, per_axis[a] - 1);
      idx = idx * per_axis[a] + c;
    }
    map[p] = idx;
  }
  return map;
}

/// Per-voxel logits [m~ (V), s~ (V), r~ (K x V)], copied to every particle of
/// the voxel before the activations.
template <int D>
class VoxelDecoder final : public DesignDecoder<D> {
 public:
  VoxelDecoder(std::vector<Vec<D>> base, std::vector<int> voxel_of, int num_voxels, int K,
               Real m0 = 1.0, Real s0 = 1.0)
      : base_(std::move(base)), map_(std::move(voxel_of)), V_(num_voxels), K_(K), m0_(m0),
        s0_(s0), theta_(VecX::Zero(static_cast<Eigen::Index>(num_voxels) * (2 + K))) {
    if (map_.size() != base_.size()) throw SizeMismatch("voxel map length");
    for (std::size_t p = 0; p < map_.size(); ++p) {
      if (map_[p] < 0 || map_[p] >= V_) {
        throw UnmappedParticle("base particle " + std::to_string(p) + " has no voxel");
      }
    }
  }

  std::string kind() const override { return "voxel"; }
  int num_voxels() const { return V_; }
  VecX params() const override { return theta_; }
  void set_params(const VecX& p) override {
    if (p.size() != theta_.size()) throw SizeMismatch("voxel design parameter count");
    theta_ = p;
  }

  DesignSpec<D> decode() const override {
    auto d = DesignSpec<D>::uniform(base_, K_, m0_, s0_);
    for (std::size_t p = 0; p < base_.size(); ++p) {
      const int v = map_[p];
      detail::apply_heads<D>(d, p, theta_[v], theta_[V_ + v], theta_.segment(2 * V_ + v * K_, K_));
    }
    return d;
  }

  VecX vjp(const DesignGrad<D>& g) const override {
    const auto d = decode();
    VecX out = VecX::Zero(theta_.size());
    for (std::size_t p = 0; p < base_.size(); ++p) {
      const int v = map_[p];
      const auto h = detail::head_vjp<D>(d, g, p);
      out[v] += h.zm;
      out[V_ + v] += h.zs;
      if (K_ > 0) out.segment(2 * V_ + v * K_, K_) += h.zr;
    }
    return out;
  }

  std::unique_ptr<DesignDecoder<D>> clone() const override {
    return std::make_unique<VoxelDecoder>(*this);
  }

 private:
  std::vector<Vec<D>> base_;
  std::vector<int> map_;
  int V_;
  int K_;
  Real m0_, s0_;
  VecX theta_;
};

}  // namespace mpmcd
