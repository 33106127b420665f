#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>

#include "mpmcd/control/controller.hpp"
#include "mpmcd/core/errors.hpp"

namespace mpmcd {

/// Per-control-step action table for trajectory optimization. Entries are
/// stored as unconstrained logits theta and emitted as bound * tanh(theta), so
/// every action stays inside the bound. Steps past the end reuse the last row.
template <int D>
class OpenLoopController final : public Controller<D> {
 public:
  OpenLoopController(int steps, int num_actuators, Real bound = kActionBound)
      : theta_(MatX::Zero(num_actuators, steps)), bound_(bound) {}

  std::string kind() const override { return "open_loop"; }
  int num_actuators() const override { return static_cast<int>(theta_.rows()); }
  int steps() const { return static_cast<int>(theta_.cols()); }

  VecX params() const override { return Eigen::Map<const VecX>(theta_.data(), theta_.size()); }
  void set_params(const VecX& p) override {
    if (p.size() != theta_.size()) throw SizeMismatch("open-loop table size");
    theta_ = Eigen::Map<const MatX>(p.data(), theta_.rows(), theta_.cols());
  }

  /// Action table u_t (K x steps).
  MatX table() const { return bound_ * theta_.array().tanh(); }

  VecX act(int control_step, Real, const ParticleSystem<D>&) const override {
    const int c = std::clamp(control_step, 0, steps() - 1);
    return bound_ * theta_.col(c).array().tanh();
  }

  void act_vjp(int control_step, Real, const ParticleSystem<D>&, const VecX& ubar, VecX& grad,
               ParticleAdjoint<D>*) const override {
    const int c = std::clamp(control_step, 0, steps() - 1);
    for (int k = 0; k < num_actuators(); ++k) {
      const Real th = std::tanh(theta_(k, c));
      grad[c * num_actuators() + k] += ubar[k] * bound_ * (1.0 - th * th);
    }
  }

  std::unique_ptr<Controller<D>> clone() const override {
    return std::make_unique<OpenLoopController>(*this);
  }

 private:
  MatX theta_;
  Real bound_;
};

/// Closed-loop controller: a one-hidden-layer tanh MLP over the robot's
/// mass-weighted velocity centroid and a periodic clock, with the same
/// bound * tanh output as the sine controller.
template <int D>
class MlpController final : public Controller<D> {
 public:
  MlpController(int num_actuators, int hidden, Real clock_omega, std::mt19937_64& rng,
                Real init_scale = 0.1, Real bound = kActionBound)
      : K_(num_actuators), H_(hidden), omega_(clock_omega), bound_(bound) {
    std::normal_distribution<Real> nd(0.0, init_scale);
    W1_ = MatX::NullaryExpr(H_, kInputs, [&] { return nd(rng); });
    b1_ = VecX::Zero(H_);
    W2_ = MatX::NullaryExpr(K_, H_, [&] { return nd(rng); });
    b2_ = VecX::Zero(K_);
  }

  static constexpr int kInputs = D + 2;

  std::string kind() const override { return "mlp"; }
  int num_actuators() const override { return K_; }

  VecX params() const override {
    VecX p(W1_.size() + b1_.size() + W2_.size() + b2_.size());
    p << Eigen::Map<const VecX>(W1_.data(), W1_.size()), b1_,
        Eigen::Map<const VecX>(W2_.data(), W2_.size()), b2_;
    return p;
  }

  void set_params(const VecX& p) override {
    if (p.size() != params().size()) throw SizeMismatch("mlp controller parameter count");
    Eigen::Index o = 0;
    W1_ = Eigen::Map<const MatX>(p.data() + o, H_, kInputs);
    o += W1_.size();
    b1_ = p.segment(o, H_);
    o += H_;
    W2_ = Eigen::Map<const MatX>(p.data() + o, K_, H_);
    o += W2_.size();
    b2_ = p.segment(o, K_);
  }

  VecX observe(Real t, const ParticleSystem<D>& ps) const {
    VecX obs = VecX::Zero(kInputs);
    Real M = 0;
    Vec<D> vc = Vec<D>::Zero();
    for (std::size_t p = 0; p < ps.size(); ++p) {
      if (ps.label[p] != ParticleLabel::Robot) continue;
      M += ps.m[p];
      vc += ps.m[p] * ps.v[p];
    }
    if (M > 0) vc /= M;
    obs.head(D) = vc;
    obs[D] = std::sin(omega_ * t);
    obs[D + 1] = std::cos(omega_ * t);
    return obs;
  }

  VecX act(int, Real t, const ParticleSystem<D>& ps) const override {
    const VecX h = (W1_ * observe(t, ps) + b1_).array().tanh();
    return bound_ * (W2_ * h + b2_).array().tanh();
  }

  void act_vjp(int, Real t, const ParticleSystem<D>& ps, const VecX& ubar, VecX& grad,
               ParticleAdjoint<D>* state_bar) const override {
    const VecX obs = observe(t, ps);
    const VecX h = (W1_ * obs + b1_).array().tanh();
    const VecX out = (W2_ * h + b2_).array().tanh();
    const VecX zbar = ubar.array() * bound_ * (1.0 - out.array().square());
    const VecX hbar = W2_.transpose() * zbar;
    const VecX abar = hbar.array() * (1.0 - h.array().square());
    Eigen::Index o = 0;
    const MatX gW1 = abar * obs.transpose();
    grad.segment(o, gW1.size()) += Eigen::Map<const VecX>(gW1.data(), gW1.size());
    o += gW1.size();
    grad.segment(o, H_) += abar;
    o += H_;
    const MatX gW2 = zbar * h.transpose();
    grad.segment(o, gW2.size()) += Eigen::Map<const VecX>(gW2.data(), gW2.size());
    o += gW2.size();
    grad.segment(o, K_) += zbar;

    if (state_bar == nullptr) return;
    const VecX obs_bar = W1_.transpose() * abar;
    const Vec<D> vc_bar = obs_bar.head(D);
    Real M = 0;
    for (std::size_t p = 0; p < ps.size(); ++p) {
      if (ps.label[p] == ParticleLabel::Robot) M += ps.m[p];
    }
    if (M <= 0) return;
    const Vec<D> vc = obs.head(D);
    for (std::size_t p = 0; p < ps.size(); ++p) {
      if (ps.label[p] != ParticleLabel::Robot) continue;
      state_bar->v[p] += (ps.m[p] / M) * vc_bar;
      state_bar->m[p] += (ps.v[p] - vc).dot(vc_bar) / M;
    }
  }

  std::unique_ptr<Controller<D>> clone() const override {
    return std::make_unique<MlpController>(*this);
  }

 private:
  int K_;
  int H_;
  Real omega_;
  Real bound_;
  MatX W1_;
  VecX b1_;
  MatX W2_;
  VecX b2_;
};

}  // namespace mpmcd
