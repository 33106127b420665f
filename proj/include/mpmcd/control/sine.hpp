#pragma once

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "mpmcd/control/controller.hpp"
#include "mpmcd/core/errors.hpp"

namespace mpmcd {

/// Weights of the sine-basis gait controller
///   u_k(t) = c * tanh( sum_ij alpha_ijk sin(omega_i t + phi_j) + beta_ijk ).
/// alpha and beta are flattened as ((i * n_phases) + j) * K + k.
struct SineControllerParams {
  std::vector<Real> omega{20.0, 80.0};
  std::vector<Real> phase{0.0, 0.5 * std::numbers::pi, std::numbers::pi, 1.5 * std::numbers::pi};
  int K = 1;
  VecX alpha;
  VecX beta;
  Real bound = kActionBound;
  bool learn_basis = false;  // when set, omega and phase are trainable too

  static SineControllerParams zeros(int num_actuators) {
    SineControllerParams p;
    p.K = num_actuators;
    p.alpha = VecX::Zero(p.num_weights());
    p.beta = VecX::Zero(p.num_weights());
    return p;
  }

  static SineControllerParams random(int num_actuators, std::mt19937_64& rng, Real scale = 0.1) {
    auto p = zeros(num_actuators);
    std::normal_distribution<Real> nd(0.0, scale);
    for (Eigen::Index i = 0; i < p.alpha.size(); ++i) p.alpha[i] = nd(rng);
    for (Eigen::Index i = 0; i < p.beta.size(); ++i) p.beta[i] = nd(rng);
    return p;
  }

  int num_weights() const { return static_cast<int>(omega.size() * phase.size()) * K; }
  int index(int i, int j, int k) const {
    return (i * static_cast<int>(phase.size()) + j) * K + k;
  }

  int num_params() const {
    return 2 * num_weights() +
           (learn_basis ? static_cast<int>(omega.size() + phase.size()) : 0);
  }

  VecX flat() const {
    VecX out(num_params());
    out << alpha, beta;
    if (learn_basis) {
      int o = 2 * num_weights();
      for (Real w : omega) out[o++] = w;
      for (Real ph : phase) out[o++] = ph;
    }
    return out;
  }

  void set_flat(const VecX& p) {
    if (p.size() != num_params()) throw SizeMismatch("sine controller parameter count");
    const int nw = num_weights();
    alpha = p.head(nw);
    beta = p.segment(nw, nw);
    if (learn_basis) {
      int o = 2 * nw;
      for (Real& w : omega) w = p[o++];
      for (Real& ph : phase) ph = p[o++];
    }
  }
};

/// Pre-activation z_k of the sine basis.
inline VecX sine_preactivation(const SineControllerParams& p, Real t) {
  VecX z = VecX::Zero(p.K);
  for (std::size_t i = 0; i < p.omega.size(); ++i) {
    for (std::size_t j = 0; j < p.phase.size(); ++j) {
      const Real basis = std::sin(p.omega[i] * t + p.phase[j]);
      for (int k = 0; k < p.K; ++k) {
        const int idx = p.index(static_cast<int>(i), static_cast<int>(j), k);
        z[k] += p.alpha[idx] * basis + p.beta[idx];
      }
    }
  }
  return z;
}

inline VecX eval_sine(const SineControllerParams& p, Real t) {
  return p.bound * sine_preactivation(p, t).array().tanh();
}

/// Gradient of ubar . eval_sine(p, t) with respect to the flat parameters.
inline VecX eval_sine_vjp(const SineControllerParams& p, Real t, const VecX& ubar) {
  const VecX z = sine_preactivation(p, t);
  VecX zbar(p.K);
  for (int k = 0; k < p.K; ++k) {
    const Real th = std::tanh(z[k]);
    zbar[k] = ubar[k] * p.bound * (1.0 - th * th);
  }
  VecX g = VecX::Zero(p.num_params());
  const int nw = p.num_weights();
  for (std::size_t i = 0; i < p.omega.size(); ++i) {
    for (std::size_t j = 0; j < p.phase.size(); ++j) {
      const Real arg = p.omega[i] * t + p.phase[j];
      const Real basis = std::sin(arg);
      const Real dbasis = std::cos(arg);
      for (int k = 0; k < p.K; ++k) {
        const int idx = p.index(static_cast<int>(i), static_cast<int>(j), k);
        g[idx] += zbar[k] * basis;
        g[nw + idx] += zbar[k];
        if (p.learn_basis) {
          const Real common = zbar[k] * p.alpha[idx] * dbasis;
          g[2 * nw + static_cast<int>(i)] += common * t;
          g[2 * nw + static_cast<int>(p.omega.size() + j)] += common;
        }
      }
    }
  }
  return g;
}

/// Open-loop sine-basis controller; ignores the state.
template <int D>
class SineController final : public Controller<D> {
 public:
  explicit SineController(SineControllerParams p) : p_(std::move(p)) {}

  std::string kind() const override { return "sine"; }
  int num_actuators() const override { return p_.K; }
  VecX params() const override { return p_.flat(); }
  void set_params(const VecX& p) override { p_.set_flat(p); }
  const SineControllerParams& basis() const { return p_; }

  VecX act(int, Real t, const ParticleSystem<D>&) const override { return eval_sine(p_, t); }

  void act_vjp(int, Real t, const ParticleSystem<D>&, const VecX& ubar, VecX& grad,
               ParticleAdjoint<D>*) const override {
    grad += eval_sine_vjp(p_, t, ubar);
  }

  std::unique_ptr<Controller<D>> clone() const override {
    return std::make_unique<SineController>(*this);
  }

 private:
  SineControllerParams p_;
};

}  // namespace mpmcd
