#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <Eigen/SVD>

#include "mpmcd/core/errors.hpp"
#include "mpmcd/design/decoder.hpp"

namespace mpmcd {

/// Number of Euler angles describing a rotation in D dimensions.
template <int D>
constexpr int euler_dim() {
  return D == 2 ? 1 : 3;
}

/// Intrinsic X-Y-Z Euler angles to a rotation matrix: R = Rx(a) Ry(b) Rz(c).
/// In 2D the single angle is a planar rotation.
template <int D>
Mat<D> euler_to_matrix(const Eigen::Matrix<Real, euler_dim<D>(), 1>& e) {
  if constexpr (D == 2) {
    const Real c = std::cos(e[0]), s = std::sin(e[0]);
    Mat<2> R;
    R << c, -s, s, c;
    return R;
  } else {
    return (Eigen::AngleAxisd(e[0], Eigen::Vector3d::UnitX()) *
            Eigen::AngleAxisd(e[1], Eigen::Vector3d::UnitY()) *
            Eigen::AngleAxisd(e[2], Eigen::Vector3d::UnitZ()))
        .toRotationMatrix();
  }
}

template <int D>
Eigen::Matrix<Real, euler_dim<D>(), 1> matrix_to_euler(const Mat<D>& R) {
  Eigen::Matrix<Real, euler_dim<D>(), 1> e;
  if constexpr (D == 2) {
    e[0] = std::atan2(R(1, 0), R(0, 0));
  } else {
    // R(0,2) = sin(b); R(1,2) = -sin(a)cos(b); R(2,2) = cos(a)cos(b);
    // R(0,1) = -cos(b)sin(c); R(0,0) = cos(b)cos(c).
    const Real sb = std::clamp(R(0, 2), -1.0, 1.0);
    e[1] = std::asin(sb);
    if (std::abs(sb) < 1.0 - 1e-12) {
      e[0] = std::atan2(-R(1, 2), R(2, 2));
      e[2] = std::atan2(-R(0, 1), R(0, 0));
    } else {
      // Gimbal lock: fold the whole twist into a.
      e[0] = std::atan2(R(2, 1), R(1, 1));
      e[2] = 0.0;
    }
  }
  return e;
}

/// Weighted projection onto SO(D): R = U diag(1, .., det(U V^T)) V^T of the
/// SVD of M = sum_i w_i R_i. Weights are used as given.
template <int D>
Mat<D> rotation_average(const std::vector<Mat<D>>& rotations, const std::vector<Real>& weights) {
  if (rotations.size() != weights.size() || rotations.empty()) {
    throw SizeMismatch("rotation_average needs one weight per rotation");
  }
  Mat<D> M = Mat<D>::Zero();
  for (std::size_t i = 0; i < rotations.size(); ++i) M += weights[i] * rotations[i];
  Eigen::JacobiSVD<Mat<D>> svd(M, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& sv = svd.singularValues();
  const Real scale = std::max(sv[0], 1e-300);
  // Rank <= D-2 leaves at least two free directions; the projection is not unique.
  if (sv[0] <= 1e-12 || (D >= 2 && sv[D - 2] <= 1e-12 * scale)) {
    throw DegenerateMean("weighted rotation mean is rank deficient");
  }
  const Mat<D> U = svd.matrixU();
  const Mat<D> V = svd.matrixV();
  Mat<D> S = Mat<D>::Identity();
  S(D - 1, D - 1) = (U * V.transpose()).determinant() < 0 ? -1.0 : 1.0;
  return U * S * V.transpose();
}

/// A shape primitive sampled at the base particles: signed distance
/// (negative inside), stiffness, muscle membership (K x n) and fiber
/// orientation as Euler angles.
template <int D>
struct DesignPrimitive {
  using Euler = Eigen::Matrix<Real, euler_dim<D>(), 1>;
  std::vector<Real> sdf;
  std::vector<Real> s;
  MatX r;
  std::vector<Euler> f_euler;

  std::size_t size() const { return sdf.size(); }

  void validate(std::size_t n, int K) const {
    if (sdf.size() != n || s.size() != n || f_euler.size() != n ||
        static_cast<std::size_t>(r.cols()) != n || r.rows() != K) {
      throw SizeMismatch("primitive fields do not match the base particle set");
    }
    bool interior = false;
    for (Real d : sdf) interior = interior || d < 0;
    if (!interior) throw ConfigError("primitive has an empty interior");
  }
};

/// Box primitive: sdf of the axis-aligned box center +- half, uniform
/// stiffness, membership and orientation.
template <int D>
DesignPrimitive<D> box_primitive(const std::vector<Vec<D>>& base, const Vec<D>& center,
                                 const Vec<D>& half, Real s, const VecX& r,
                                 const typename DesignPrimitive<D>::Euler& euler =
                                     DesignPrimitive<D>::Euler::Zero()) {
  DesignPrimitive<D> p;
  const auto n = base.size();
  p.sdf.resize(n);
  p.s.assign(n, s);
  p.r = r.replicate(1, static_cast<Eigen::Index>(n));
  p.f_euler.assign(n, euler);
  for (std::size_t i = 0; i < n; ++i) {
    const Vec<D> q = (base[i] - center).cwiseAbs() - half;
    p.sdf[i] = q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0);
  }
  return p;
}

template <int D>
DesignPrimitive<D> sphere_primitive(const std::vector<Vec<D>>& base, const Vec<D>& center,
                                    Real radius, Real s, const VecX& r,
                                    const typename DesignPrimitive<D>::Euler& euler =
                                        DesignPrimitive<D>::Euler::Zero()) {
  DesignPrimitive<D> p;
  const auto n = base.size();
  p.sdf.resize(n);
  p.s.assign(n, s);
  p.r = r.replicate(1, static_cast<Eigen::Index>(n));
  p.f_euler.assign(n, euler);
  for (std::size_t i = 0; i < n; ++i) p.sdf[i] = (base[i] - center).norm() - radius;
  return p;
}

namespace detail {

inline VecX normalized_weights(const VecX& w, const char* what) {
  const Real sum = w.sum();
  if (!(std::abs(sum) > 1e-12)) {
    throw DegenerateWeights(std::string(what) + " coefficients sum to zero");
  }
  return w / sum;
}

/// d(w/sum w)/dw applied to a cotangent on the normalized weights.
inline VecX normalized_weights_vjp(const VecX& w, const VecX& what_bar) {
  const Real sum = w.sum();
  const VecX wh = w / sum;
  return (what_bar.array() - wh.dot(what_bar)).matrix() / sum;
}

/// Attribute heads shared by the primitive-blending decoders: stiffness and
/// membership interpolation plus rotation-averaged fiber directions.
template <int D>
void blend_attributes(const std::vector<DesignPrimitive<D>>& prims, const VecX& bh,
                      const VecX& gh, const VecX& kh, DesignSpec<D>& d) {
  const std::size_t n = d.size();
  const int N = static_cast<int>(prims.size());
  const int K = d.num_actuators();
  std::vector<Mat<D>> R(N);
  std::vector<Real> kw(kh.data(), kh.data() + N);
  for (std::size_t p = 0; p < n; ++p) {
    Real s = 0;
    for (int i = 0; i < N; ++i) s += bh[i] * prims[i].s[p];
    d.s[p] = std::clamp(s, 0.0, d.s0);

    if (K > 0) {
      VecX r = VecX::Zero(K);
      for (int i = 0; i < N; ++i) r += gh[i] * prims[i].r.col(static_cast<Eigen::Index>(p));
      r = r.cwiseMax(0.0);
      const Real sum = r.sum();
      d.r.col(static_cast<Eigen::Index>(p)) =
          sum > 1e-12 ? VecX(r / sum) : VecX::Constant(K, 1.0 / K);
    }

    for (int i = 0; i < N; ++i) R[i] = euler_to_matrix<D>(prims[i].f_euler[p]);
    Mat<D> Rbar;
    try {
      Rbar = rotation_average<D>(R, kw);
    } catch (const DegenerateMean&) {
      int best = 0;
      for (int i = 1; i < N; ++i) {
        if (kw[i] > kw[best]) best = i;
      }
      Rbar = R[best];
    }
    d.f[p] = (Rbar * canonical_heading<D>()).normalized();
  }
}

/// Cotangents of the normalized beta and gamma weights from the attribute heads.
template <int D>
void blend_attributes_vjp(const std::vector<DesignPrimitive<D>>& prims, const VecX& bh,
                          const VecX& gh, const DesignSpec<D>& d, const DesignGrad<D>& g,
                          VecX& bh_bar, VecX& gh_bar) {
  const std::size_t n = d.size();
  const int N = static_cast<int>(prims.size());
  const int K = d.num_actuators();
  bh_bar = VecX::Zero(N);
  gh_bar = VecX::Zero(N);
  for (std::size_t p = 0; p < n; ++p) {
    Real s = 0;
    for (int i = 0; i < N; ++i) s += bh[i] * prims[i].s[p];
    if (s > 0 && s < d.s0) {
      for (int i = 0; i < N; ++i) bh_bar[i] += g.s[p] * prims[i].s[p];
    }
    if (K > 0) {
      const auto col = static_cast<Eigen::Index>(p);
      VecX raw = VecX::Zero(K);
      for (int i = 0; i < N; ++i) raw += gh[i] * prims[i].r.col(col);
      const VecX clipped = raw.cwiseMax(0.0);
      const Real sum = clipped.sum();
      if (sum <= 1e-12) continue;
      // r = c / sum(c): dr/dc = (I - r 1^T) / sum.
      const VecX r = clipped / sum;
      const VecX gr = g.r.col(col);
      VecX cbar = (gr.array() - r.dot(gr)).matrix() / sum;
      for (int k = 0; k < K; ++k) {
        if (raw[k] <= 0) cbar[k] = 0;
      }
      for (int i = 0; i < N; ++i) gh_bar[i] += cbar.dot(prims[i].r.col(col));
    }
  }
}

}  // namespace detail

/// Blends N primitives. Parameters are [alpha (N), beta (N), gamma (N),
/// kappa (N)], each normalized by its sum. Geometry is a steep logistic of
/// the interpolated signed distance: m = m0 / (1 + exp(-T sum alpha_i sdf_i)).
/// Fiber orientations are blended by projecting the weighted mean rotation
/// onto SO(D); kappa receives no gradient.
template <int D>
class SdfLerpDecoder final : public DesignDecoder<D> {
 public:
  static constexpr Real kTemperature = -1000.0;

  SdfLerpDecoder(std::vector<Vec<D>> base, std::vector<DesignPrimitive<D>> prims, int K,
                 Real m0 = 1.0, Real s0 = 1.0, Real temperature = kTemperature)
      : base_(std::move(base)), prims_(std::move(prims)), K_(K), m0_(m0), s0_(s0),
        T_(temperature) {
    if (prims_.empty()) throw ConfigError("SDF-Lerp needs at least one primitive");
    for (const auto& p : prims_) p.validate(base_.size(), K_);
    const int N = num_primitives();
    theta_ = VecX::Constant(4 * N, 1.0 / N);
  }

  std::string kind() const override { return "sdf_lerp"; }
  int num_primitives() const { return static_cast<int>(prims_.size()); }
  const std::vector<DesignPrimitive<D>>& primitives() const { return prims_; }
  Real temperature() const { return T_; }

  VecX params() const override { return theta_; }
  void set_params(const VecX& p) override {
    if (p.size() != theta_.size()) throw SizeMismatch("SDF-Lerp expects 4N coefficients");
    theta_ = p;
  }

  /// Interpolated signed distance at each base particle.
  std::vector<Real> blended_sdf() const {
    const int N = num_primitives();
    const VecX ah = detail::normalized_weights(theta_.head(N), "alpha");
    std::vector<Real> phi(base_.size(), 0.0);
    for (std::size_t p = 0; p < base_.size(); ++p) {
      for (int i = 0; i < N; ++i) phi[p] += ah[i] * prims_[i].sdf[p];
    }
    return phi;
  }

  DesignSpec<D> decode() const override {
    const int N = num_primitives();
    const VecX bh = detail::normalized_weights(theta_.segment(N, N), "beta");
    const VecX gh = detail::normalized_weights(theta_.segment(2 * N, N), "gamma");
    const VecX kh = detail::normalized_weights(theta_.segment(3 * N, N), "kappa");
    auto d = DesignSpec<D>::uniform(base_, K_, m0_, s0_);
    const auto phi = blended_sdf();
    for (std::size_t p = 0; p < base_.size(); ++p) d.m[p] = m0_ * sigmoid(T_ * phi[p]);
    detail::blend_attributes<D>(prims_, bh, gh, kh, d);
    return d;
  }

  VecX vjp(const DesignGrad<D>& g) const override {
    const int N = num_primitives();
    const auto d = decode();
    VecX ah_bar = VecX::Zero(N);
    for (std::size_t p = 0; p < base_.size(); ++p) {
      const Real sm = d.m[p] / m0_;
      const Real phibar = g.m[p] * m0_ * sm * (1 - sm) * T_;
      for (int i = 0; i < N; ++i) ah_bar[i] += phibar * prims_[i].sdf[p];
    }
    const VecX bh = detail::normalized_weights(theta_.segment(N, N), "beta");
    const VecX gh = detail::normalized_weights(theta_.segment(2 * N, N), "gamma");
    VecX bh_bar, gh_bar;
    detail::blend_attributes_vjp<D>(prims_, bh, gh, d, g, bh_bar, gh_bar);
    VecX out = VecX::Zero(4 * N);
    out.head(N) = detail::normalized_weights_vjp(theta_.head(N), ah_bar);
    out.segment(N, N) = detail::normalized_weights_vjp(theta_.segment(N, N), bh_bar);
    out.segment(2 * N, N) = detail::normalized_weights_vjp(theta_.segment(2 * N, N), gh_bar);
    return out;
  }

  std::unique_ptr<DesignDecoder<D>> clone() const override {
    return std::make_unique<SdfLerpDecoder>(*this);
  }

 private:
  std::vector<Vec<D>> base_;
  std::vector<DesignPrimitive<D>> prims_;
  int K_;
  Real m0_, s0_;
  Real T_;
  VecX theta_;
};

}  // namespace mpmcd
