#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/design/particle_voxel.hpp"
#include "mpmcd/design/sdf_lerp.hpp"

namespace mpmcd {

struct SinkhornOptions {
  Real epsilon = 2.0;  // kernel exp(-d^2 / epsilon), d in grid cells
  int max_iters = 500;
  Real tol = 1e-4;  // L1 change of the barycenter between sweeps
  /// When > 0, run exactly this many iterations and skip the residual test.
  int fixed_iters = 0;
};

struct BarycenterResult {
  VecX q;  // barycenter histogram, sums to 1
  int iterations = 0;
  Real residual = 0;
};

namespace detail {

constexpr Real kNegInf = -std::numeric_limits<Real>::infinity();

/// log(K exp(v)) for the separable Gaussian kernel on a regular grid with the
/// last axis fastest.
template <int D>
VecX log_convolve(const VecX& logv, const IVec<D>& dims, Real eps) {
  VecX cur = logv;
  VecX next(cur.size());
  std::vector<Real> line, out;
  int stride = 1;
  for (int a = D - 1; a >= 0; --a) {
    const int L = dims[a];
    const int outer = static_cast<int>(cur.size()) / (L * stride);
    line.resize(L);
    out.resize(L);
    for (int o = 0; o < outer; ++o) {
      for (int in = 0; in < stride; ++in) {
        const int base = o * L * stride + in;
        for (int i = 0; i < L; ++i) line[i] = cur[base + i * stride];
        for (int i = 0; i < L; ++i) {
          Real mx = kNegInf;
          for (int j = 0; j < L; ++j) {
            const Real v = line[j] - (i - j) * (i - j) / eps;
            mx = std::max(mx, v);
          }
          if (mx == kNegInf) {
            out[i] = kNegInf;
            continue;
          }
          Real acc = 0;
          for (int j = 0; j < L; ++j) {
            const Real v = line[j] - (i - j) * (i - j) / eps;
            if (v != kNegInf) acc += std::exp(v - mx);
          }
          out[i] = mx + std::log(acc);
        }
        for (int i = 0; i < L; ++i) next[base + i * stride] = out[i];
      }
    }
    std::swap(cur, next);
    stride *= L;
  }
  return cur;
}

inline VecX safe_log(const VecX& v) {
  VecX out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) out[i] = v[i] > 0 ? std::log(v[i]) : kNegInf;
  return out;
}

}  // namespace detail

/// Debiased entropic Wasserstein barycenter of normalized histograms on a
/// regular grid, computed with log-domain convolutional Sinkhorn iterations.
/// The debiasing potential makes the barycenter of a single input that input
/// itself rather than a blurred copy.
template <int D>
BarycenterResult sinkhorn_barycenter(const std::vector<VecX>& hists, const VecX& weights,
                                     const IVec<D>& dims, const SinkhornOptions& opt = {}) {
  const int N = static_cast<int>(hists.size());
  if (N == 0 || weights.size() != N) throw SizeMismatch("barycenter weights");
  const Eigen::Index G = dims.prod();
  std::vector<int> active;
  std::vector<VecX> logp(N);
  for (int k = 0; k < N; ++k) {
    if (hists[k].size() != G) throw SizeMismatch("histogram does not match the grid");
    if (weights[k] < 0) throw DegenerateWeights("barycenter weights must be nonnegative");
    logp[k] = detail::safe_log(hists[k]);
    if (weights[k] > 0) active.push_back(k);
  }
  if (active.empty()) throw DegenerateWeights("barycenter weights sum to zero");
  BarycenterResult res;
  if (active.size() == 1) {
    // Exact fixed point of the debiased iteration.
    res.q = hists[active[0]] / hists[active[0]].sum();
    return res;
  }
  const Real wsum = weights.sum();

  std::vector<VecX> loga(N), logb(N, VecX::Zero(G)), logKa(N);
  VecX logd = VecX::Zero(G), logq(G), prev_q;
  const int iters = opt.fixed_iters > 0 ? opt.fixed_iters : opt.max_iters;
  for (int it = 0; it < iters; ++it) {
    for (int k : active) {
      loga[k] = logp[k] - detail::log_convolve<D>(logb[k], dims, opt.epsilon);
      logKa[k] = detail::log_convolve<D>(loga[k], dims, opt.epsilon);
    }
    logq = logd;
    for (int k : active) logq += (weights[k] / wsum) * logKa[k];
    for (int k : active) logb[k] = logq - logKa[k];
    const VecX logKd = detail::log_convolve<D>(logd, dims, opt.epsilon);
    logd = 0.5 * (logd + logq - logKd);
    res.iterations = it + 1;
    if (opt.fixed_iters > 0) continue;
    const VecX q = logq.array().exp();
    const Real err = it > 0 ? (q - prev_q).cwiseAbs().sum() : 1.0;
    prev_q = q;
    res.residual = err;
    if (err < opt.tol) break;
    if (it + 1 == iters) {
      throw NonConvergence("Sinkhorn barycenter residual " + std::to_string(err) + " after " +
                           std::to_string(iters) + " iterations");
    }
  }
  res.q = logq.array().exp();
  return res;
}

/// Wasserstein-barycenter decoder. Primitives are rasterized to occupancy
/// histograms over a voxel grid laid on the base particles. Parameters are
/// [logits (N), beta (N), gamma (N), kappa (N)]; the barycenter weights are
/// softmax(logits) so they stay on the simplex. Stiffness, membership and
/// fiber heads are the SDF-Lerp heads. The logit gradient is taken by
/// central differences through a fixed number of Sinkhorn iterations.
template <int D>
class WassersteinDecoder final : public DesignDecoder<D> {
 public:
  WassersteinDecoder(std::vector<Vec<D>> base, std::vector<DesignPrimitive<D>> prims, int K,
                     const IVec<D>& dims, Real m0 = 1.0, Real s0 = 1.0, SinkhornOptions opt = {})
      : base_(std::move(base)), prims_(std::move(prims)), K_(K), dims_(dims), m0_(m0), s0_(s0),
        opt_(opt) {
    if (prims_.empty()) throw ConfigError("barycenter decoder needs at least one primitive");
    for (const auto& p : prims_) p.validate(base_.size(), K_);
    voxel_ = voxelize<D>(base_, dims_);
    const Eigen::Index G = dims_.prod();
    per_voxel_ = VecX::Zero(G);
    for (int v : voxel_) per_voxel_[v] += 1;
    for (const auto& p : prims_) {
      VecX h = VecX::Zero(G);
      for (std::size_t i = 0; i < base_.size(); ++i) {
        if (p.sdf[i] < 0) h[voxel_[i]] += 1;
      }
      counts_.push_back(h.sum());
      hists_.push_back(h / h.sum());
    }
    const int N = num_primitives();
    theta_ = VecX::Zero(4 * N);
    theta_.tail(3 * N).setConstant(1.0 / N);
  }

  std::string kind() const override { return "wasserstein"; }
  int num_primitives() const { return static_cast<int>(prims_.size()); }
  const std::vector<VecX>& histograms() const { return hists_; }
  const IVec<D>& grid_dims() const { return dims_; }
  const std::vector<int>& voxel_of() const { return voxel_; }

  VecX alpha() const { return softmax(theta_.head(num_primitives())); }

  VecX params() const override { return theta_; }
  void set_params(const VecX& p) override {
    if (p.size() != theta_.size()) throw SizeMismatch("barycenter decoder expects 4N parameters");
    theta_ = p;
  }

  BarycenterResult barycenter(const VecX& logits, int fixed_iters = 0) const {
    SinkhornOptions o = opt_;
    o.fixed_iters = fixed_iters;
    return sinkhorn_barycenter<D>(hists_, softmax(logits), dims_, o);
  }

  DesignSpec<D> decode() const override {
    const int N = num_primitives();
    auto d = DesignSpec<D>::uniform(base_, K_, m0_, s0_);
    const auto bc = barycenter(theta_.head(N));
    last_iterations_ = bc.iterations;
    fill_mass(bc.q, theta_.head(N), d.m);
    detail::blend_attributes<D>(prims_, detail::normalized_weights(theta_.segment(N, N), "beta"),
                                detail::normalized_weights(theta_.segment(2 * N, N), "gamma"),
                                detail::normalized_weights(theta_.segment(3 * N, N), "kappa"), d);
    return d;
  }

  VecX vjp(const DesignGrad<D>& g) const override {
    const int N = num_primitives();
    const auto d = decode();
    const int iters = last_iterations_;
    VecX out = VecX::Zero(4 * N);
    const Real h = 1e-5;
    std::vector<Real> m(base_.size());
    auto objective = [&](const VecX& logits) {
      fill_mass(barycenter(logits, iters).q, logits, m);
      Real acc = 0;
      for (std::size_t p = 0; p < m.size(); ++p) acc += g.m[p] * m[p];
      return acc;
    };
    if (N > 1) {
      for (int i = 0; i < N; ++i) {
        VecX lp = theta_.head(N), lm = theta_.head(N);
        lp[i] += h;
        lm[i] -= h;
        out[i] = (objective(lp) - objective(lm)) / (2 * h);
      }
    }
    const VecX bh = detail::normalized_weights(theta_.segment(N, N), "beta");
    const VecX gh = detail::normalized_weights(theta_.segment(2 * N, N), "gamma");
    VecX bh_bar, gh_bar;
    detail::blend_attributes_vjp<D>(prims_, bh, gh, d, g, bh_bar, gh_bar);
    out.segment(N, N) = detail::normalized_weights_vjp(theta_.segment(N, N), bh_bar);
    out.segment(2 * N, N) = detail::normalized_weights_vjp(theta_.segment(2 * N, N), gh_bar);
    return out;
  }

  std::unique_ptr<DesignDecoder<D>> clone() const override {
    return std::make_unique<WassersteinDecoder>(*this);
  }

 private:
  /// m_p = m0 min(1, Mbar q_v / n_v) with Mbar the weighted particle count.
  void fill_mass(const VecX& q, const VecX& logits, std::vector<Real>& m) const {
    const VecX a = softmax(logits);
    Real Mbar = 0;
    for (int i = 0; i < num_primitives(); ++i) Mbar += a[i] * counts_[i];
    for (std::size_t p = 0; p < base_.size(); ++p) {
      const int v = voxel_[p];
      m[p] = m0_ * std::min(1.0, Mbar * q[v] / per_voxel_[v]);
    }
  }

  std::vector<Vec<D>> base_;
  std::vector<DesignPrimitive<D>> prims_;
  int K_;
  IVec<D> dims_;
  Real m0_, s0_;
  SinkhornOptions opt_;
  std::vector<int> voxel_;
  VecX per_voxel_;
  std::vector<VecX> hists_;
  std::vector<Real> counts_;
  VecX theta_;
  mutable int last_iterations_ = 0;
};

}  // namespace mpmcd
