#include <gtest/gtest.h>

#include <cmath>

#include "mpmcd/environment/sampling.hpp"
#include "mpmcd/sim/stepper.hpp"
#include "test_util.hpp"

namespace mpmcd {
namespace {

using testing::rel_err;
using testing::uniform;

// Quadratic B-spline, piecewise, independent of the implementation.
Real bspline_oracle(Real x) {
  x = std::abs(x);
  if (x < 0.5) return 0.75 - x * x;
  if (x < 1.5) return 0.5 * (1.5 - x) * (1.5 - x);
  return 0.0;
}

TEST(Kernel, MatchesPiecewiseDefinition) {
  for (Real frac : {0.5, 0.7, 1.0, 1.23, 1.4999}) {
    const auto w = quadratic_bspline(frac);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(w[i], bspline_oracle(frac - i), 1e-15);
  }
  const auto a = quadratic_bspline(1.0);
  EXPECT_DOUBLE_EQ(a[0], 0.125);
  EXPECT_DOUBLE_EQ(a[1], 0.75);
  EXPECT_DOUBLE_EQ(a[2], 0.125);
  const auto b = quadratic_bspline(0.5);
  EXPECT_DOUBLE_EQ(b[0], 0.5);
  EXPECT_DOUBLE_EQ(b[1], 0.5);
  EXPECT_DOUBLE_EQ(b[2], 0.0);
}

TEST(Kernel, GradientMatchesFiniteDifference) {
  for (Real frac : {0.55, 0.9, 1.1, 1.45}) {
    const auto g = quadratic_bspline_grad(frac);
    const auto p = quadratic_bspline(frac + 1e-6);
    const auto m = quadratic_bspline(frac - 1e-6);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(g[i], (p[i] - m[i]) / 2e-6, 1e-8);
  }
}

TEST(Kernel, PartitionOfUnityRandom) {
  for (int t = 0; t < 1000; ++t) {
    const Vec<3> x = testing::random_vec<3>(0.1, 0.9);
    const auto st = Stencil<3>::make(x, 64.0);
    for (int a = 0; a < 3; ++a) {
      EXPECT_GE(st.frac[a], 0.5);
      EXPECT_LT(st.frac[a], 1.5);
      EXPECT_NEAR(st.w[a][0] + st.w[a][1] + st.w[a][2], 1.0, 1e-12);
      for (Real w : st.w[a]) EXPECT_GE(w, 0.0);
    }
  }
}

TEST(Material, RestStateIsStressFree) {
  for (auto model : {MaterialModel::NeoHookean, MaterialModel::FixedCorotated, MaterialModel::StVK,
                     MaterialModel::SnowElastoplastic, MaterialModel::DruckerPragerSand}) {
    auto p = MaterialParams::from_youngs(model, 7.0, 0.3);
    EXPECT_LT(pk1_stress<2>(Mat<2>::Identity(), p).norm(), 1e-14) << to_string(model);
    EXPECT_LT(pk1_stress<3>(Mat<3>::Identity(), p).norm(), 1e-14) << to_string(model);
  }
  EXPECT_LT(pk1_stress<2>(Mat<2>::Identity(), MaterialParams::fluid(10.0)).norm(), 1e-14);
}

TEST(Material, NeoHookeanDiagonalExample) {
  MaterialParams p;
  p.model = MaterialModel::NeoHookean;
  p.mu = 1.0;
  p.lambda = 1.0;
  Mat<2> F = Vec<2>(2.0, 1.0).asDiagonal();
  const Mat<2> P = pk1_stress<2>(F, p);
  EXPECT_NEAR(P(0, 0), 1.5 + 0.5 * std::log(2.0), 1e-14);
  EXPECT_NEAR(P(1, 1), std::log(2.0), 1e-14);
  EXPECT_NEAR(P(0, 1), 0.0, 1e-14);
  EXPECT_NEAR(P(1, 0), 0.0, 1e-14);
}

TEST(Material, FixedCorotatedPureRotationIsStressFree) {
  auto p = MaterialParams::from_youngs(MaterialModel::FixedCorotated, 10.0, 0.25);
  for (int t = 0; t < 20; ++t) {
    EXPECT_LT(pk1_stress<2>(testing::random_rotation<2>(), p).norm(), 1e-12);
    EXPECT_LT(pk1_stress<3>(testing::random_rotation<3>(), p).norm(), 1e-12);
  }
}

TEST(Material, NonInvertibleFThrows) {
  auto nh = MaterialParams::from_youngs(MaterialModel::NeoHookean, 1.0, 0.3);
  auto sv = MaterialParams::from_youngs(MaterialModel::StVK, 1.0, 0.3);
  Mat<2> F;
  F << 1, 0, 0, -0.5;
  EXPECT_THROW(pk1_stress<2>(F, nh), NonInvertibleF);
  EXPECT_THROW(pk1_stress<2>(F, sv), NonInvertibleF);
  EXPECT_NO_THROW(pk1_stress<2>(F, MaterialParams::from_youngs(MaterialModel::FixedCorotated, 1, 0.3)));
}

template <int D>
void check_stress_is_energy_gradient(MaterialModel model) {
  auto p = model == MaterialModel::WeaklyCompressibleFluid
               ? MaterialParams::fluid(3.0)
               : MaterialParams::from_youngs(model, 5.0, 0.3);
  for (int t = 0; t < 30; ++t) {
    const Mat<D> F = testing::random_F<D>(0.25);
    const Mat<D> P = pk1_stress<D>(F, p);
    const Mat<D> fd = testing::fd_matrix_gradient<D>(
        [&](const Mat<D>& X) { return elastic_energy<D>(X, p); }, F, 1e-6);
    EXPECT_LT(rel_err(P, fd), 1e-7) << to_string(model) << " D=" << D;
  }
}

TEST(Material, StressIsEnergyGradient) {
  for (auto m : {MaterialModel::NeoHookean, MaterialModel::FixedCorotated, MaterialModel::StVK,
                 MaterialModel::WeaklyCompressibleFluid}) {
    check_stress_is_energy_gradient<2>(m);
    check_stress_is_energy_gradient<3>(m);
  }
}

template <int D>
void check_differential(MaterialModel model) {
  auto p = model == MaterialModel::WeaklyCompressibleFluid
               ? MaterialParams::fluid(3.0)
               : MaterialParams::from_youngs(model, 5.0, 0.3);
  for (int t = 0; t < 30; ++t) {
    const Mat<D> F = testing::random_F<D>(0.25);
    Mat<D> dF, B;
    for (int i = 0; i < D; ++i)
      for (int j = 0; j < D; ++j) {
        dF(i, j) = uniform(-1, 1);
        B(i, j) = uniform(-1, 1);
      }
    const Real h = 1e-6;
    const Mat<D> fd = (pk1_stress<D>(F + h * dF, p) - pk1_stress<D>(F - h * dF, p)) / (2 * h);
    const Mat<D> an = pk1_differential<D>(F, dF, p);
    EXPECT_LT(rel_err(an, fd), 1e-7) << to_string(model) << " D=" << D;
    // self-adjoint: <dP[dF], B> = <dF, dP[B]>
    EXPECT_NEAR(ddot(an, B), ddot(dF, pk1_differential<D>(F, B, p)), 1e-9);
  }
}

TEST(Material, DifferentialMatchesFiniteDifferenceAndIsSelfAdjoint) {
  for (auto m : {MaterialModel::NeoHookean, MaterialModel::FixedCorotated, MaterialModel::StVK,
                 MaterialModel::WeaklyCompressibleFluid}) {
    check_differential<2>(m);
    check_differential<3>(m);
  }
}

template <int D>
void check_rotation_equivariance(MaterialModel model) {
  auto p = MaterialParams::from_youngs(model, 4.0, 0.35);
  for (int t = 0; t < 50; ++t) {
    const Mat<D> F = testing::random_F<D>(0.4);
    const Mat<D> R = testing::random_rotation<D>();
    EXPECT_LT((pk1_stress<D>(R * F, p) - R * pk1_stress<D>(F, p)).norm(), 1e-9);
  }
}

TEST(Material, RotationEquivariance) {
  check_rotation_equivariance<2>(MaterialModel::NeoHookean);
  check_rotation_equivariance<3>(MaterialModel::NeoHookean);
  check_rotation_equivariance<2>(MaterialModel::FixedCorotated);
  check_rotation_equivariance<3>(MaterialModel::FixedCorotated);
}

TEST(Muscle, Examples) {
  const Vec<2> e1(1, 0);
  EXPECT_LT(muscle_pk1<2>(Mat<2>::Identity(), e1, 3.0, 1.0).norm(), 1e-15);
  const Mat<2> P = muscle_pk1<2>(Mat<2>::Identity(), e1, 0.5, 0.0);
  Mat<2> expected = Mat<2>::Zero();
  expected(0, 0) = 2.0;
  EXPECT_LT((P - expected).norm(), 1e-15);
}

TEST(Muscle, MatchesFiniteDifferenceOfEnergy) {
  for (int t = 0; t < 100; ++t) {
    const Mat<3> F = testing::random_F<3>(0.4);
    const Vec<3> f = testing::random_vec<3>(-1, 1).normalized();
    const Real s = uniform(0.1, 5.0);
    const Real a = uniform(-0.5, 1.5);
    const Mat<3> fd = testing::fd_matrix_gradient<3>(
        [&](const Mat<3>& X) { return muscle_energy<3>(X, f, s, a); }, F, 1e-6);
    EXPECT_LT(rel_err(muscle_pk1<3>(F, f, s, a), fd), 1e-6);
  }
}

TEST(Muscle, ParameterVjpMatchesFiniteDifference) {
  for (int t = 0; t < 20; ++t) {
    const Mat<2> F = testing::random_F<2>(0.3);
    const Vec<2> f = testing::random_vec<2>(-1, 1);
    const Real s = 2.0, a = uniform(0.5, 1.5);
    Mat<2> B;
    B << uniform(-1, 1), uniform(-1, 1), uniform(-1, 1), uniform(-1, 1);
    const auto vjp = muscle_pk1_param_vjp<2>(F, f, s, a, B);
    const Real h = 1e-6;
    const Real fa = (ddot(muscle_pk1<2>(F, f, s, a + h), B) - ddot(muscle_pk1<2>(F, f, s, a - h), B)) / (2 * h);
    EXPECT_NEAR(vjp.abar, fa, 1e-7);
    for (int k = 0; k < 2; ++k) {
      Vec<2> fp = f, fm = f;
      fp[k] += h;
      fm[k] -= h;
      const Real ff = (ddot(muscle_pk1<2>(F, fp, s, a), B) - ddot(muscle_pk1<2>(F, fm, s, a), B)) / (2 * h);
      EXPECT_NEAR(vjp.fbar[k], ff, 1e-6);
    }
  }
}

TEST(Plasticity, InsideElasticRegionUnchanged) {
  MaterialParams snow;
  snow.model = MaterialModel::SnowElastoplastic;
  snow.mu = 1;
  snow.lambda = 1;
  Mat<2> F = Vec<2>(1.001, 0.99).asDiagonal();
  EXPECT_EQ(plastic_project<2>(F, snow), F);

  auto sand = MaterialParams::from_youngs(MaterialModel::DruckerPragerSand, 10, 0.3);
  Mat<2> G = Vec<2>(0.99, 0.99).asDiagonal();  // pure compression lies inside the cone
  EXPECT_LT((plastic_project<2>(G, sand) - G).norm(), 1e-12);
}

TEST(Plasticity, SnowClampsSingularValues) {
  MaterialParams snow;
  snow.model = MaterialModel::SnowElastoplastic;
  snow.theta_s = 0.01;
  snow.theta_c = 0.02;
  Mat<2> F = Vec<2>(1.0 + 2 * snow.theta_s, 1.0).asDiagonal();
  const Mat<2> Fp = plastic_project<2>(F, snow);
  EXPECT_NEAR(Fp(0, 0), 1.0 + snow.theta_s, 1e-12);
  EXPECT_NEAR(Fp(1, 1), 1.0, 1e-12);
  EXPECT_NEAR(Fp(0, 1), 0.0, 1e-12);
}

TEST(Plasticity, SandHydrostaticExpansionGoesToApex) {
  auto sand = MaterialParams::from_youngs(MaterialModel::DruckerPragerSand, 10, 0.3);
  Mat<2> F = Vec<2>(1.1, 1.1).asDiagonal();
  const Mat<2> Fp = plastic_project<2>(F, sand);
  EXPECT_LT((Fp - Mat<2>::Identity()).norm(), 1e-12);
  EXPECT_LT(pk1_stress<2>(Fp, sand).norm(), 1e-12);
}

TEST(Plasticity, SandShearIsReturnedToCone) {
  auto sand = MaterialParams::from_youngs(MaterialModel::DruckerPragerSand, 10, 0.3);
  sand.friction_angle = 30;
  Mat<2> F = Vec<2>(1.05, 0.9).asDiagonal();  // compressive, large deviatoric part
  const Mat<2> Fp = plastic_project<2>(F, sand);
  Eigen::JacobiSVD<Mat<2>> svd(Fp);
  const Vec<2> eps = svd.singularValues().array().log();
  const Real tr = eps.sum();
  const Real dev = (eps - Vec<2>::Constant(tr / 2)).norm();
  const Real sin_phi = std::sin(30 * std::numbers::pi / 180);
  const Real alpha = std::sqrt(2.0 / 3.0) * 2 * sin_phi / (3 - sin_phi);
  // on the yield surface: dev + (d lambda + 2 mu)/(2 mu) tr alpha = 0
  EXPECT_NEAR(dev + (2 * sand.lambda + 2 * sand.mu) / (2 * sand.mu) * tr * alpha, 0.0, 1e-10);
  EXPECT_NEAR(Fp.determinant(), F.determinant(), 1e-10);  // volume preserved
}

// ---------------------------------------------------------------------------

template <int D>
ParticleSystem<D> random_particles(int n, bool zero_stress, SimConfig<D>& cfg) {
  ParticleSystem<D> ps;
  ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 10.0, 0.3));
  for (int i = 0; i < n; ++i) {
    ps.add(testing::random_vec<D>(0.3, 0.7), uniform(0.1, 2.0), 0, ParticleLabel::Cover,
           uniform(0.5, 1.5));
    ps.v.back() = testing::random_vec<D>(-1, 1);
    if (!zero_stress) {
      ps.F.back() = testing::random_F<D>(0.1);
      ps.C.back() = Mat<D>::Random();
    }
  }
  cfg.grid_cells = 32;
  cfg.wall_cells = 0;
  return ps;
}

TEST(P2G, SingleParticleAtNode) {
  SimConfig<2> cfg;
  cfg.grid_cells = 16;
  ParticleSystem<2> ps;
  ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 1.0, 0.3));
  const Vec<2> node = Vec<2>(8, 8) * cfg.dx();
  ps.add(node, 2.0, 0, ParticleLabel::Cover);
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  p2g<2>(ps, grid, {}, cfg);
  EXPECT_NEAR(grid.mass[grid.index(IVec<2>(8, 8))], 2.0 * 0.75 * 0.75, 1e-15);
  EXPECT_NEAR(grid.total_mass(), 2.0, 1e-14);
}

TEST(P2G, EmptyParticleSetLeavesGridZero) {
  SimConfig<2> cfg;
  ParticleSystem<2> ps;
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  p2g<2>(ps, grid, {}, cfg);
  EXPECT_EQ(grid.total_mass(), 0.0);
  EXPECT_EQ(grid.total_momentum().norm(), 0.0);
}

template <int D>
void conservation_check(bool zero_stress) {
  for (int trial = 0; trial < 20; ++trial) {
    SimConfig<D> cfg;
    auto ps = random_particles<D>(50, zero_stress, cfg);
    auto grid = GridField<D>::make(cfg, TerrainSDF<D>::none());
    p2g<D>(ps, grid, {}, cfg);
    Real mass = 0;
    Vec<D> mom = Vec<D>::Zero();
    for (std::size_t p = 0; p < ps.size(); ++p) {
      mass += ps.m[p];
      mom += ps.m[p] * ps.v[p];
    }
    EXPECT_LT(std::abs(grid.total_mass() - mass) / mass, 1e-12);
    if (zero_stress) {
      EXPECT_LT((grid.total_momentum() - mom).norm() / mom.norm(), 1e-12);
    }
  }
}

TEST(P2G, MassAndMomentumConservation) {
  conservation_check<2>(false);
  conservation_check<2>(true);
  conservation_check<3>(true);
}

TEST(G2P, MomentumPreservedAwayFromBoundaries) {
  SimConfig<2> cfg;
  auto ps = random_particles<2>(200, true, cfg);
  Vec<2> before = Vec<2>::Zero();
  for (std::size_t p = 0; p < ps.size(); ++p) before += ps.m[p] * ps.v[p];
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  sim_substep<2>(ps, grid, VecX(), cfg);
  Vec<2> after = Vec<2>::Zero();
  for (std::size_t p = 0; p < ps.size(); ++p) after += ps.m[p] * ps.v[p];
  EXPECT_LT((after - before).norm() / before.norm(), 1e-12);
}

TEST(GridUpdate, BoundaryConditionExamples) {
  const Vec<2> n(0, 1);
  const Vec<2> v(0.3, -0.4);
  EXPECT_EQ(apply_terrain_bc<2>(v, n, BoundaryCondition::Sticky, 0.5), Vec<2>::Zero());
  EXPECT_EQ(apply_terrain_bc<2>(v, n, BoundaryCondition::Slip, 0.5), Vec<2>(0.3, 0));
  const Vec<2> away(0.3, 0.4);
  EXPECT_EQ(apply_terrain_bc<2>(away, n, BoundaryCondition::Separate, 0.5), away);
  EXPECT_EQ(apply_terrain_bc<2>(away, n, BoundaryCondition::Friction, 0.5), away);
  // Friction: tangential 0.3 scaled by 1 - 0.5*0.4/0.3
  const Vec<2> fr = apply_terrain_bc<2>(v, n, BoundaryCondition::Friction, 0.5);
  EXPECT_NEAR(fr[0], 0.3 * (1 - 0.5 * 0.4 / 0.3), 1e-15);
  EXPECT_NEAR(fr[1], 0.0, 1e-15);
  EXPECT_EQ(apply_terrain_bc<2>(v, n, BoundaryCondition::Friction, 1.0), Vec<2>::Zero());
  // Separate equals Friction with zero coefficient
  EXPECT_LT((apply_terrain_bc<2>(v, n, BoundaryCondition::Separate, 0) -
             apply_terrain_bc<2>(v, n, BoundaryCondition::Friction, 0)).norm(), 1e-15);
}

TEST(GridUpdate, VjpMatchesFiniteDifference) {
  const Vec<2> n = Vec<2>(0.2, 1).normalized();
  for (auto bc : {BoundaryCondition::Slip, BoundaryCondition::Separate, BoundaryCondition::Friction}) {
    for (int t = 0; t < 20; ++t) {
      const Vec<2> v = testing::random_vec<2>(-1, 1);
      const Vec<2> ob = testing::random_vec<2>(-1, 1);
      const Vec<2> an = apply_terrain_bc_vjp<2>(v, n, bc, 0.3, ob);
      for (int k = 0; k < 2; ++k) {
        Vec<2> vp = v, vm = v;
        vp[k] += 1e-7;
        vm[k] -= 1e-7;
        const Real fd = (ob.dot(apply_terrain_bc<2>(vp, n, bc, 0.3)) -
                         ob.dot(apply_terrain_bc<2>(vm, n, bc, 0.3))) / 2e-7;
        EXPECT_NEAR(an[k], fd, 1e-6) << to_string(bc);
      }
    }
  }
}

TEST(GridUpdate, ZeroMassNodeUntouchedAndStickyTerrain) {
  SimConfig<2> cfg;
  cfg.grid_cells = 16;
  cfg.terrain_bc = BoundaryCondition::Sticky;
  cfg.wall_cells = 0;
  cfg.gravity = Vec<2>(0, -9.8);
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::flat(0.3, 1.0));
  const std::size_t below = grid.index(IVec<2>(5, 2));
  const std::size_t above = grid.index(IVec<2>(5, 10));
  const std::size_t empty = grid.index(IVec<2>(7, 7));
  grid.mass[below] = 1.0;
  grid.mom[below] = Vec<2>(1, 1);
  grid.mass[above] = 2.0;
  grid.mom[above] = Vec<2>(2, 0);
  grid.mom[empty] = Vec<2>(5, 5);
  grid_update<2>(grid, cfg);
  EXPECT_EQ(grid.mom[below], Vec<2>::Zero());
  EXPECT_NEAR(grid.mom[above][0], 1.0, 1e-15);
  EXPECT_NEAR(grid.mom[above][1], -9.8 * cfg.dt, 1e-15);
  EXPECT_EQ(grid.mom[empty], Vec<2>(5, 5));
}

TEST(G2P, UniformGridVelocityAdvects) {
  SimConfig<2> cfg;
  cfg.grid_cells = 16;
  ParticleSystem<2> ps;
  ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 1.0, 0.3));
  ps.add(Vec<2>(0.43, 0.51), 1.0, 0, ParticleLabel::Cover);
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  const Vec<2> vstar(0.7, -0.2);
  std::fill(grid.mom.begin(), grid.mom.end(), vstar);
  const Vec<2> x0 = ps.x[0];
  g2p<2>(grid, ps, cfg);
  EXPECT_LT((ps.v[0] - vstar).norm(), 1e-14);
  EXPECT_LT(ps.C[0].norm(), 1e-10);
  EXPECT_LT((ps.x[0] - (x0 + cfg.dt * vstar)).norm(), 1e-15);
  EXPECT_LT((ps.F[0] - Mat<2>::Identity()).norm(), 1e-13);

  std::fill(grid.mom.begin(), grid.mom.end(), Vec<2>::Zero());
  const Vec<2> x1 = ps.x[0];
  const Mat<2> F1 = ps.F[0];
  g2p<2>(grid, ps, cfg);
  EXPECT_EQ(ps.x[0], x1);
  EXPECT_EQ(ps.F[0], F1);
  EXPECT_EQ(ps.v[0], Vec<2>::Zero());
}

TEST(Substep, FreeParticleAdvectsExactly) {
  SimConfig<2> cfg;
  ParticleSystem<2> ps;
  ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 1.0, 0.3));
  ps.add(Vec<2>(0.4, 0.6), 1.0, 0, ParticleLabel::Cover);
  ps.v[0] = Vec<2>(0.3, -0.1);
  const Vec<2> x0 = ps.x[0];
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  sim_substep<2>(ps, grid, VecX(), cfg);
  EXPECT_LT((ps.x[0] - (x0 + cfg.dt * Vec<2>(0.3, -0.1))).norm(), 1e-15);
}

TEST(Substep, RestStateIsFixedPoint) {
  SimConfig<2> cfg;
  cfg.gravity.setZero();
  ParticleSystem<2> ps;
  ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 100.0, 0.3));
  for (const auto& x : sample_box<2>(Vec<2>(0.4, 0.4), Vec<2>(0.6, 0.5), 0.5 * cfg.dx())) {
    ps.add(x, 1.0, 0, ParticleLabel::Robot);
  }
  ps.set_num_actuators(2);
  for (std::size_t p = 0; p < ps.size(); ++p) {
    ps.r(0, p) = 0.5;
    ps.r(1, p) = 0.5;
    ps.f[p] = Vec<2>(1, 0);
  }
  const auto before = ps;
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  for (int i = 0; i < 10; ++i) sim_substep<2>(ps, grid, VecX::Zero(2), cfg);
  for (std::size_t p = 0; p < ps.size(); ++p) {
    EXPECT_EQ(ps.x[p], before.x[p]);
    EXPECT_EQ(ps.v[p], before.v[p]);
    EXPECT_EQ(ps.F[p], before.F[p]);
  }
}

TEST(Substep, OutOfDomainThrows) {
  SimConfig<2> cfg;
  ParticleSystem<2> ps;
  ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 1.0, 0.3));
  ps.add(Vec<2>(0.001, 0.5), 1.0, 0, ParticleLabel::Cover);
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  EXPECT_THROW(sim_substep<2>(ps, grid, VecX(), cfg), OutOfDomain);
}

TEST(Substep, ActionSizeMismatchThrows) {
  SimConfig<2> cfg;
  ParticleSystem<2> ps;
  ps.materials.push_back(MaterialParams::from_youngs(MaterialModel::NeoHookean, 1.0, 0.3));
  ps.add(Vec<2>(0.5, 0.5), 1.0, 0, ParticleLabel::Robot);
  ps.set_num_actuators(2);
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  EXPECT_THROW(sim_substep<2>(ps, grid, VecX::Zero(3), cfg), SizeMismatch);
}

TEST(Substep, ThreadedMatchesSerial) {
  SimConfig<2> cfg;
  auto ps = random_particles<2>(300, false, cfg);
  auto ps2 = ps;
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  for (int i = 0; i < 5; ++i) sim_substep<2>(ps, grid, VecX(), cfg);
  auto cfg2 = cfg;
  cfg2.threads = 3;
  cfg2.deterministic = false;
  for (int i = 0; i < 5; ++i) sim_substep<2>(ps2, grid, VecX(), cfg2);
  for (std::size_t p = 0; p < ps.size(); ++p) {
    EXPECT_LT((ps.x[p] - ps2.x[p]).norm(), 1e-10);
    EXPECT_LT((ps.v[p] - ps2.v[p]).norm(), 1e-10);
  }
}

TEST(Substep, FluidKeepsIsotropicDeformation) {
  SimConfig<2> cfg;
  ParticleSystem<2> ps;
  ps.materials.push_back(MaterialParams::fluid(10.0));
  for (const auto& x : sample_box<2>(Vec<2>(0.4, 0.4), Vec<2>(0.6, 0.6), 0.5 * cfg.dx())) {
    ps.add(x, 1.0, 0, ParticleLabel::Cover);
    ps.v.back() = Vec<2>(x[1] - 0.5, 0.5 - x[0]);
  }
  auto grid = GridField<2>::make(cfg, TerrainSDF<2>::none());
  for (int i = 0; i < 5; ++i) sim_substep<2>(ps, grid, VecX(), cfg);
  for (const auto& F : ps.F) {
    EXPECT_EQ(F(0, 1), 0.0);
    EXPECT_EQ(F(0, 0), F(1, 1));
  }
}

}  // namespace
}  // namespace mpmcd
