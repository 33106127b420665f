#include <gtest/gtest.h>

#include <cmath>
#include <functional>

#include "mpmcd/autodiff/grad_check.hpp"
#include "mpmcd/autodiff/rollout.hpp"
#include "mpmcd/control/sine.hpp"
#include "mpmcd/environment/sampling.hpp"
#include "test_util.hpp"

namespace mpmcd {
namespace {

using testing::uniform;

// ---------------------------------------------------------------------------
// Micro-scene: 8 particles on an 8^D grid with random state and design.

struct MicroOptions {
  bool terrain = false;
  MaterialModel model = MaterialModel::NeoHookean;
  BoundaryCondition bc = BoundaryCondition::Friction;
};

template <int D>
struct Micro {
  ParticleSystem<D> ps;
  SimConfig<D> cfg;
  TerrainSDF<D> terrain;
  std::vector<Real> act;
};

template <int D>
Micro<D> make_micro(const MicroOptions& opt) {
  Micro<D> s;
  s.cfg.grid_cells = 8;
  s.cfg.wall_cells = 0;
  s.cfg.dt = 1e-3;
  s.cfg.gravity = Vec<D>::Zero();
  s.cfg.gravity[1] = -9.8;
  s.cfg.terrain_bc = opt.bc;
  s.cfg.terrain_friction = 0.4;
  s.terrain = opt.terrain ? TerrainSDF<D>::flat(0.45, 1.0) : TerrainSDF<D>::none();
  if (opt.model == MaterialModel::WeaklyCompressibleFluid) {
    s.ps.materials.push_back(MaterialParams::fluid(50.0, 1.0));
  } else {
    s.ps.materials.push_back(MaterialParams::from_youngs(opt.model, 200.0, 0.3, 1.0));
  }
  for (int p = 0; p < 8; ++p) {
    s.ps.add(testing::random_vec<D>(0.36, 0.64), uniform(0.5, 1.5) * 1e-2, 0, ParticleLabel::Robot,
             uniform(0.5, 1.5));
  }
  s.ps.set_num_actuators(2);
  for (std::size_t p = 0; p < s.ps.size(); ++p) {
    s.ps.v[p] = testing::random_vec<D>(-0.5, 0.5);
    s.ps.F[p] = opt.model == MaterialModel::WeaklyCompressibleFluid
                    ? std::pow(uniform(0.9, 1.1), 1.0 / D) * Mat<D>::Identity()
                    : testing::random_F<D>(0.1);
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) s.ps.C[p](i, j) = uniform(-1, 1);
    const Real a = uniform(0, 1);
    s.ps.r(0, static_cast<Eigen::Index>(p)) = a;
    s.ps.r(1, static_cast<Eigen::Index>(p)) = 1 - a;
    s.ps.f[p] = testing::random_vec<D>(-1, 1).normalized();
    s.act.push_back(uniform(-0.3, 0.3));
  }
  return s;
}

template <int D>
struct OutputSeed {
  std::vector<Vec<D>> x, v;
  std::vector<Mat<D>> F, C;

  static OutputSeed random(std::size_t n) {
    OutputSeed c;
    for (std::size_t p = 0; p < n; ++p) {
      c.x.push_back(testing::random_vec<D>(-1, 1));
      c.v.push_back(testing::random_vec<D>(-1, 1));
      Mat<D> a, b;
      for (int i = 0; i < D; ++i)
        for (int j = 0; j < D; ++j) {
          a(i, j) = uniform(-1, 1);
          b(i, j) = uniform(-1, 1) * 0.01;
        }
      c.F.push_back(a);
      c.C.push_back(b);
    }
    return c;
  }

  Real dot(const ParticleSystem<D>& ps) const {
    Real out = 0;
    for (std::size_t p = 0; p < ps.size(); ++p) {
      out += x[p].dot(ps.x[p]) + v[p].dot(ps.v[p]) + ddot(F[p], ps.F[p]) + ddot(C[p], ps.C[p]);
    }
    return out;
  }

  ParticleAdjoint<D> as_adjoint(const ParticleSystem<D>& ps) const {
    auto a = ParticleAdjoint<D>::zeros_like(ps);
    a.x = x;
    a.v = v;
    a.F = F;
    a.C = C;
    return a;
  }
};

// A flat view of one input field so grad_check can perturb it.
template <int D>
struct FieldAccess {
  const char* name;
  std::function<Real&(Micro<D>&, int)> get;
  std::function<Real(const ParticleAdjoint<D>&, const std::vector<Real>&, int)> grad;
  int count;
};

template <int D>
std::vector<FieldAccess<D>> fields(int n) {
  std::vector<FieldAccess<D>> out;
  out.push_back({"x", [](Micro<D>& s, int i) -> Real& { return s.ps.x[i / D][i % D]; },
                 [](const ParticleAdjoint<D>& a, const std::vector<Real>&, int i) {
                   return a.x[i / D][i % D];
                 },
                 n * D});
  out.push_back({"v", [](Micro<D>& s, int i) -> Real& { return s.ps.v[i / D][i % D]; },
                 [](const ParticleAdjoint<D>& a, const std::vector<Real>&, int i) {
                   return a.v[i / D][i % D];
                 },
                 n * D});
  out.push_back({"F",
                 [](Micro<D>& s, int i) -> Real& { return s.ps.F[i / (D * D)].data()[i % (D * D)]; },
                 [](const ParticleAdjoint<D>& a, const std::vector<Real>&, int i) {
                   return a.F[i / (D * D)].data()[i % (D * D)];
                 },
                 n * D * D});
  out.push_back({"C",
                 [](Micro<D>& s, int i) -> Real& { return s.ps.C[i / (D * D)].data()[i % (D * D)]; },
                 [](const ParticleAdjoint<D>& a, const std::vector<Real>&, int i) {
                   return a.C[i / (D * D)].data()[i % (D * D)];
                 },
                 n * D * D});
  out.push_back({"m", [](Micro<D>& s, int i) -> Real& { return s.ps.m[i]; },
                 [](const ParticleAdjoint<D>& a, const std::vector<Real>&, int i) { return a.m[i]; },
                 n});
  out.push_back({"s", [](Micro<D>& s, int i) -> Real& { return s.ps.s[i]; },
                 [](const ParticleAdjoint<D>& a, const std::vector<Real>&, int i) { return a.s[i]; },
                 n});
  out.push_back({"f", [](Micro<D>& s, int i) -> Real& { return s.ps.f[i / D][i % D]; },
                 [](const ParticleAdjoint<D>& a, const std::vector<Real>&, int i) {
                   return a.f[i / D][i % D];
                 },
                 n * D});
  out.push_back({"act", [](Micro<D>& s, int i) -> Real& { return s.act[i]; },
                 [](const ParticleAdjoint<D>&, const std::vector<Real>& abar, int i) {
                   return abar[i];
                 },
                 n});
  return out;
}

template <int D>
void check_substep_adjoint(const MicroOptions& opt, Real tol, bool skip_design = false) {
  const Micro<D> base = make_micro<D>(opt);
  const auto seed = OutputSeed<D>::random(base.ps.size());
  auto grid = GridField<D>::make(base.cfg, base.terrain);

  auto adj = seed.as_adjoint(base.ps);
  const auto abar = backward_substep<D>(base.ps, base.act, adj, grid, base.cfg);

  for (const auto& fa : fields<D>(static_cast<int>(base.ps.size()))) {
    if (skip_design && (std::string(fa.name) == "f" || std::string(fa.name) == "act")) continue;
    VecX p0(fa.count), analytic(fa.count);
    Micro<D> probe = base;
    for (int i = 0; i < fa.count; ++i) {
      p0[i] = fa.get(probe, i);
      analytic[i] = fa.grad(adj, abar, i);
    }
    auto fn = [&](const VecX& p) {
      Micro<D> s = base;
      for (int i = 0; i < fa.count; ++i) fa.get(s, i) = p[i];
      auto g = GridField<D>::make(s.cfg, s.terrain);
      sim_substep_actuated<D>(s.ps, g, s.act, s.cfg);
      return seed.dot(s.ps);
    };
    const auto rep = grad_check_report(fn, p0, analytic, 1e-6);
    EXPECT_LE(rep.max_rel_error, tol) << "field " << fa.name << " entry " << rep.worst
                                      << " analytic " << analytic[rep.worst] << " fd "
                                      << rep.central[rep.worst];
  }
}

TEST(BackwardSubstep, MicroScene2D) { check_substep_adjoint<2>({}, 1e-5); }
TEST(BackwardSubstep, MicroScene3D) { check_substep_adjoint<3>({}, 1e-5); }
TEST(BackwardSubstep, MicroSceneFrictionTerrain2D) {
  check_substep_adjoint<2>({.terrain = true}, 1e-5);
}
TEST(BackwardSubstep, MicroSceneSlipTerrain3D) {
  check_substep_adjoint<3>({.terrain = true, .bc = BoundaryCondition::Slip}, 1e-5);
}
TEST(BackwardSubstep, MicroSceneCorotated2D) {
  check_substep_adjoint<2>({.model = MaterialModel::FixedCorotated}, 1e-5);
}
TEST(BackwardSubstep, MicroSceneStVK3D) { check_substep_adjoint<3>({.model = MaterialModel::StVK}, 1e-5); }
TEST(BackwardSubstep, MicroSceneFluid2D) {
  check_substep_adjoint<2>({.model = MaterialModel::WeaklyCompressibleFluid}, 1e-5);
}

TEST(BackwardSubstep, FreeParticlePositionGradientIsDt) {
  SimConfig<2> cfg;
  cfg.grid_cells = 16;
  ParticleSystem<2> ps;
  ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 0.0, 0.3));
  ps.add(Vec<2>(0.5, 0.5), 1.0, 0, ParticleLabel::Robot);
  ps.v[0] = Vec<2>(0.1, -0.2);
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  auto adj = ParticleAdjoint<2>::zeros_like(ps);
  adj.x[0] = Vec<2>(1.0, 0.0);
  backward_substep<2>(ps, {}, adj, grid, cfg);
  EXPECT_NEAR(adj.v[0][0], cfg.dt, 1e-15);
  EXPECT_NEAR(adj.v[0][1], 0.0, 1e-15);
  EXPECT_NEAR(adj.x[0][0], 1.0, 1e-12);
}

TEST(BackwardSubstep, ShapeMismatchThrows) {
  auto s = make_micro<2>({});
  auto grid = GridField<2>::make(s.cfg, s.terrain);
  auto adj = ParticleAdjoint<2>::zeros_like(s.ps);
  adj.x.pop_back();
  EXPECT_THROW(backward_substep<2>(s.ps, s.act, adj, grid, s.cfg), ShapeMismatch);
}

TEST(BackwardSubstep, ZeroSeedGivesZeroAndScalingIsLinear) {
  auto s = make_micro<2>({.terrain = true});
  auto grid = GridField<2>::make(s.cfg, s.terrain);
  auto zero = ParticleAdjoint<2>::zeros_like(s.ps);
  const auto abar0 = backward_substep<2>(s.ps, s.act, zero, grid, s.cfg);
  for (std::size_t p = 0; p < s.ps.size(); ++p) {
    EXPECT_EQ(abar0[p], 0.0);
    EXPECT_EQ(zero.x[p].norm(), 0.0);
    EXPECT_EQ(zero.F[p].norm(), 0.0);
    EXPECT_EQ(zero.s[p], 0.0);
    EXPECT_EQ(zero.m[p], 0.0);
  }

  // Powers of two make the scaling exact in floating point.
  const auto seed = OutputSeed<2>::random(s.ps.size());
  auto a = seed.as_adjoint(s.ps);
  auto b = seed.as_adjoint(s.ps);
  b.scale(4.0);
  const auto abar_a = backward_substep<2>(s.ps, s.act, a, grid, s.cfg);
  const auto abar_b = backward_substep<2>(s.ps, s.act, b, grid, s.cfg);
  for (std::size_t p = 0; p < s.ps.size(); ++p) {
    EXPECT_EQ(4.0 * abar_a[p], abar_b[p]);
    EXPECT_EQ(Vec<2>(4.0 * a.x[p]), b.x[p]);
    EXPECT_EQ(Mat<2>(4.0 * a.F[p]), b.F[p]);
    EXPECT_EQ(4.0 * a.s[p], b.s[p]);
  }
}

// ---------------------------------------------------------------------------
// Rollouts.

struct BlockScene {
  ParticleSystem<2> ps;
  SimConfig<2> cfg;
  TerrainSDF<2> terrain;
};

BlockScene make_block_scene() {
  BlockScene s;
  s.cfg.grid_cells = 32;
  s.cfg.dt = 1e-3;
  s.cfg.substeps_per_control = 4;
  s.cfg.gravity = Vec<2>(0, -9.8);
  s.terrain = TerrainSDF<2>::flat(0.12, 1.0);
  s.ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 300.0, 0.3));
  const auto pts = sample_box<2>(Vec<2>(0.4, 0.13), Vec<2>(0.6, 0.25), 1.0 / 64);
  for (const auto& x : pts) s.ps.add(x, 1.0 / (64.0 * 64.0), 0, ParticleLabel::Robot);
  s.ps.set_num_actuators(2);
  for (std::size_t p = 0; p < s.ps.size(); ++p) {
    const bool left = s.ps.x[p][0] < 0.5;
    s.ps.r(0, static_cast<Eigen::Index>(p)) = left ? 1.0 : 0.0;
    s.ps.r(1, static_cast<Eigen::Index>(p)) = left ? 0.0 : 1.0;
    s.ps.f[p] = Vec<2>(1, 0);
  }
  return s;
}

LambdaObjective<2> final_height_objective() {
  return LambdaObjective<2>(
      [](const ParticleSystem<2>& ps, long, bool final) {
        if (!final) return 0.0;
        Real y = 0;
        for (const auto& x : ps.x) y += x[1];
        return y / static_cast<Real>(ps.size());
      },
      [](const ParticleSystem<2>& ps, long, bool final, Real scale, ParticleAdjoint<2>& adj) {
        if (!final) return;
        for (auto& xb : adj.x) xb[1] += scale / static_cast<Real>(ps.size());
      });
}

// Sum over control steps of centroid height plus the squared x-velocity of
// the right half, to exercise intermediate terms and the velocity adjoint.
LambdaObjective<2> running_objective() {
  return LambdaObjective<2>(
      [](const ParticleSystem<2>& ps, long, bool) {
        Real y = 0;
        for (std::size_t p = 0; p < ps.size(); ++p) {
          y += ps.x[p][1];
          if (ps.x[p][0] > 0.5) y += ps.v[p][0] * ps.v[p][0];
        }
        return y / static_cast<Real>(ps.size());
      },
      [](const ParticleSystem<2>& ps, long, bool, Real scale, ParticleAdjoint<2>& adj) {
        const Real w = scale / static_cast<Real>(ps.size());
        for (std::size_t p = 0; p < ps.size(); ++p) {
          adj.x[p][1] += w;
          if (ps.x[p][0] > 0.5) adj.v[p][0] += 2.0 * w * ps.v[p][0];
        }
      });
}

TEST(Rollout, LossMatchesForwardOnlyBitwise) {
  auto s = make_block_scene();
  std::mt19937_64 rng(3);
  SineController<2> ctrl(SineControllerParams::random(2, rng, 0.5));
  const auto obj = running_objective();
  auto grid = GridField<2>::make(s.cfg, s.terrain);
  const Real fwd = rollout_loss<2>(s.ps, ctrl, &obj, grid, s.cfg, 30);
  const auto res = rollout_grad<2>(s.ps, ctrl, obj, grid, s.cfg, 30, 7);
  EXPECT_EQ(fwd, res.loss);
}

TEST(Rollout, GradientMatchesFiniteDifferences) {
  auto s = make_block_scene();
  std::mt19937_64 rng(5);
  SineController<2> ctrl(SineControllerParams::random(2, rng, 0.5));
  const auto obj = running_objective();
  auto grid = GridField<2>::make(s.cfg, s.terrain);
  const long T = 25;
  const auto res = rollout_grad<2>(s.ps, ctrl, obj, grid, s.cfg, T, 5);
  auto fn = [&](const VecX& p) {
    auto c = ctrl;
    c.set_params(p);
    return rollout_loss<2>(s.ps, c, &obj, grid, s.cfg, T);
  };
  // Only well-conditioned entries; tiny ones are dominated by cancellation.
  const auto rep = grad_check_report(fn, ctrl.params(), res.controller_grad, 1e-5);
  EXPECT_LE(rep.max_rel_error, 1e-4) << "entry " << rep.worst;
}

TEST(Rollout, CheckpointIntervalDoesNotChangeGradients) {
  auto s = make_block_scene();
  std::mt19937_64 rng(7);
  SineController<2> ctrl(SineControllerParams::random(2, rng, 0.5));
  const auto obj = running_objective();
  auto grid = GridField<2>::make(s.cfg, s.terrain);
  const long T = 64;
  const auto full = rollout_grad<2>(s.ps, ctrl, obj, grid, s.cfg, T, 1);
  for (int N : {5, 16, 64}) {
    const auto r = rollout_grad<2>(s.ps, ctrl, obj, grid, s.cfg, T, N);
    EXPECT_EQ(r.loss, full.loss);
    for (Eigen::Index i = 0; i < full.controller_grad.size(); ++i) {
      EXPECT_EQ(r.controller_grad[i], full.controller_grad[i]) << "N=" << N;
    }
    for (std::size_t p = 0; p < s.ps.size(); ++p) {
      EXPECT_EQ(r.adjoint.s[p], full.adjoint.s[p]);
      EXPECT_EQ(r.adjoint.x[p], full.adjoint.x[p]);
    }
  }
}

TEST(Rollout, PeakMemoryIsBoundedBySegments) {
  auto s = make_block_scene();
  SineController<2> ctrl(SineControllerParams::zeros(2));
  const auto obj = final_height_objective();
  auto grid = GridField<2>::make(s.cfg, s.terrain);
  const auto full = rollout_grad<2>(s.ps, ctrl, obj, grid, s.cfg, 64, 1);
  const auto ck = rollout_grad<2>(s.ps, ctrl, obj, grid, s.cfg, 64, 8);
  EXPECT_LE(ck.memory.peak_snapshots, 8u + 8u + 1u);
  EXPECT_LE(static_cast<Real>(ck.memory.peak_bytes), 0.35 * static_cast<Real>(full.memory.peak_bytes));
}

TEST(Rollout, InvalidArgumentsThrow) {
  auto s = make_block_scene();
  SineController<2> ctrl(SineControllerParams::zeros(2));
  const auto obj = final_height_objective();
  auto grid = GridField<2>::make(s.cfg, s.terrain);
  EXPECT_THROW(rollout_grad<2>(s.ps, ctrl, obj, grid, s.cfg, 0, 1), ConfigError);
  EXPECT_THROW(rollout_grad<2>(s.ps, ctrl, obj, grid, s.cfg, 10, 11), ConfigError);
}

TEST(GradCheck, QuadraticIsExact) {
  VecX p0(5);
  p0 << 0.3, -1.2, 2.0, 0.7, -0.1;
  auto f = [](const VecX& p) { return p.squaredNorm(); };
  EXPECT_LE(grad_check(f, p0, 2.0 * p0, 1e-5), 1e-9);
}

}  // namespace
}  // namespace mpmcd
