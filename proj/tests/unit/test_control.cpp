#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "mpmcd/autodiff/grad_check.hpp"
#include "mpmcd/control/open_loop.hpp"
#include "mpmcd/control/sine.hpp"
#include "test_util.hpp"

namespace mpmcd {
namespace {

// Direct transcription of the sine-basis formula, written out per element.
Real sine_oracle(const SineControllerParams& p, Real t, int k) {
  Real z = 0;
  for (std::size_t i = 0; i < p.omega.size(); ++i) {
    for (std::size_t j = 0; j < p.phase.size(); ++j) {
      const int idx = (static_cast<int>(i) * static_cast<int>(p.phase.size()) + static_cast<int>(j)) * p.K + k;
      z += p.alpha[idx] * std::sin(p.omega[i] * t + p.phase[j]) + p.beta[idx];
    }
  }
  return p.bound * std::tanh(z);
}

TEST(Sine, ZeroWeightsGiveZeroAction) {
  const auto p = SineControllerParams::zeros(3);
  for (Real t : {0.0, 0.013, 1.7}) EXPECT_EQ(eval_sine(p, t).norm(), 0.0);
}

TEST(Sine, MatchesFormula) {
  std::mt19937_64 rng(1);
  const auto p = SineControllerParams::random(3, rng, 0.7);
  for (Real t : {0.0, 0.021, 0.4}) {
    const VecX u = eval_sine(p, t);
    for (int k = 0; k < 3; ++k) EXPECT_NEAR(u[k], sine_oracle(p, t, k), 1e-14);
  }
}

TEST(Sine, ActionsStayBounded) {
  std::mt19937_64 rng(2);
  const auto p = SineControllerParams::random(4, rng, 50.0);
  std::uniform_real_distribution<Real> ut(0.0, 10.0);
  for (int i = 0; i < 100000; ++i) {
    const VecX u = eval_sine(p, ut(rng));
    ASSERT_LE(u.cwiseAbs().maxCoeff(), kActionBound);
  }
}

TEST(Sine, PeriodicWithSlowestFrequency) {
  std::mt19937_64 rng(3);
  const auto p = SineControllerParams::random(2, rng, 0.5);
  const Real period = 2 * std::numbers::pi / 20.0;
  EXPECT_NEAR(period, std::numbers::pi / 10.0, 1e-15);
  for (Real t : {0.0, 0.05, 0.31}) {
    EXPECT_LE((eval_sine(p, t) - eval_sine(p, t + period)).norm(), 1e-12);
  }
}

TEST(Sine, VjpMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (bool learn : {false, true}) {
    auto p = SineControllerParams::random(3, rng, 0.4);
    p.learn_basis = learn;
    const Real t = 0.037;
    VecX ubar(3);
    ubar << 0.5, -1.3, 0.8;
    const VecX g = eval_sine_vjp(p, t, ubar);
    auto f = [&](const VecX& flat) {
      auto q = p;
      q.set_flat(flat);
      return ubar.dot(eval_sine(q, t));
    };
    EXPECT_LE(grad_check(f, p.flat(), g, 1e-5), 1e-7);
  }
}

TEST(Sine, VjpIsLinearInCotangent) {
  std::mt19937_64 rng(5);
  const auto p = SineControllerParams::random(2, rng, 0.4);
  VecX a(2), b(2);
  a << 0.3, -0.9;
  b << 1.1, 0.25;
  const VecX lhs = eval_sine_vjp(p, 0.1, 2.0 * a + b);
  const VecX rhs = 2.0 * eval_sine_vjp(p, 0.1, a) + eval_sine_vjp(p, 0.1, b);
  EXPECT_LE((lhs - rhs).norm(), 1e-14 * (1 + lhs.norm()));
}

TEST(Sine, WrongParameterCountThrows) {
  auto p = SineControllerParams::zeros(2);
  EXPECT_THROW(p.set_flat(VecX::Zero(3)), SizeMismatch);
}

TEST(OpenLoop, TableIsBoundedAndClampsPastEnd) {
  ParticleSystem<2> ps;
  OpenLoopController<2> c(5, 3);
  std::mt19937_64 rng(6);
  std::normal_distribution<Real> nd(0, 10);
  VecX p(15);
  for (auto& e : p) e = nd(rng);
  c.set_params(p);
  for (int s = 0; s < 8; ++s) EXPECT_LE(c.act(s, 0, ps).cwiseAbs().maxCoeff(), kActionBound);
  EXPECT_EQ(c.act(4, 0, ps), c.act(9, 0, ps));
}

TEST(OpenLoop, VjpMatchesFiniteDifferences) {
  ParticleSystem<2> ps;
  OpenLoopController<2> c(4, 2);
  std::mt19937_64 rng(7);
  std::normal_distribution<Real> nd(0, 0.8);
  VecX p(8);
  for (auto& e : p) e = nd(rng);
  c.set_params(p);
  VecX ubar(2);
  ubar << 0.7, -0.4;
  VecX g = VecX::Zero(8);
  c.act_vjp(2, 0, ps, ubar, g, nullptr);
  auto f = [&](const VecX& q) {
    auto d = c;
    d.set_params(q);
    return ubar.dot(d.act(2, 0, ps));
  };
  for (int i = 0; i < 8; ++i) {
    if (i / 2 != 2) EXPECT_EQ(g[i], 0.0);
  }
  EXPECT_LE(grad_check(f, p, g, 1e-6), 1e-7);
}

ParticleSystem<2> two_particle_robot() {
  ParticleSystem<2> ps;
  ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 100, 0.3));
  ps.add(Vec<2>(0.4, 0.5), 1.0, 0, ParticleLabel::Robot);
  ps.add(Vec<2>(0.6, 0.5), 3.0, 0, ParticleLabel::Robot);
  ps.add(Vec<2>(0.5, 0.2), 5.0, 0, ParticleLabel::Cover);
  ps.v[0] = Vec<2>(0.3, -0.1);
  ps.v[1] = Vec<2>(-0.2, 0.4);
  ps.v[2] = Vec<2>(9, 9);
  return ps;
}

TEST(Mlp, ObservationUsesRobotVelocityCentroid) {
  std::mt19937_64 rng(8);
  MlpController<2> c(2, 8, 20.0, rng);
  const auto ps = two_particle_robot();
  const VecX obs = c.observe(0.1, ps);
  EXPECT_NEAR(obs[0], (0.3 - 0.6) / 4.0, 1e-15);
  EXPECT_NEAR(obs[1], (-0.1 + 1.2) / 4.0, 1e-15);
  EXPECT_NEAR(obs[2], std::sin(2.0), 1e-15);
}

TEST(Mlp, VjpMatchesFiniteDifferencesForParamsAndState) {
  std::mt19937_64 rng(9);
  MlpController<2> c(2, 6, 20.0, rng, 0.8);
  auto ps = two_particle_robot();
  VecX ubar(2);
  ubar << 1.2, -0.7;
  const Real t = 0.07;
  VecX g = VecX::Zero(c.num_params());
  auto adj = ParticleAdjoint<2>::zeros_like(ps);
  c.act_vjp(0, t, ps, ubar, g, &adj);

  auto f = [&](const VecX& q) {
    auto d = c;
    d.set_params(q);
    return ubar.dot(d.act(0, t, ps));
  };
  EXPECT_LE(grad_check(f, c.params(), g, 1e-6), 1e-6);

  VecX v0(6), vg(6);
  for (int p = 0; p < 2; ++p) {
    v0.segment<2>(2 * p) = ps.v[p];
    vg.segment<2>(2 * p) = adj.v[p];
    v0[4 + p] = ps.m[p];
    vg[4 + p] = adj.m[p];
  }
  auto fs = [&](const VecX& q) {
    auto s = ps;
    for (int p = 0; p < 2; ++p) {
      s.v[p] = q.segment<2>(2 * p);
      s.m[p] = q[4 + p];
    }
    return ubar.dot(c.act(0, t, s));
  };
  EXPECT_LE(grad_check(fs, v0, vg, 1e-6), 1e-6);
  EXPECT_EQ(adj.v[2].norm(), 0.0);
}

}  // namespace
}  // namespace mpmcd
