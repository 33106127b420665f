#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "mpmcd/autodiff/grad_check.hpp"
#include "mpmcd/optimize/adam.hpp"
#include "mpmcd/optimize/ambiguity.hpp"
#include "mpmcd/optimize/cmaes.hpp"
#include "mpmcd/optimize/codesign.hpp"
#include "mpmcd/optimize/desk.hpp"
#include "mpmcd/optimize/multiseed.hpp"
#include "mpmcd/optimize/sweep.hpp"
#include "test_util.hpp"

using namespace mpmcd;

namespace {

VecX random_vec(int n, std::mt19937_64& rng, Real lo, Real hi) {
  std::uniform_real_distribution<Real> u(lo, hi);
  VecX v(n);
  for (int i = 0; i < n; ++i) v[i] = u(rng);
  return v;
}

/// Desk swimmer cut to a short episode for loop-level tests.
DeskAquatic short_desk(long T = 40) {
  auto d = DeskAquatic::make();
  d.env.T = T;
  d.env.N = 10;
  return d;
}

}  // namespace

// ---------------------------------------------------------------- Adam

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::mt19937_64 rng(1);
  VecX p = random_vec(6, rng, -1, 1);
  const VecX p0 = p;
  auto st = AdamState::for_size(6);
  adam_step(st, p, VecX::Zero(6));
  EXPECT_EQ(p, p0);
}

TEST(Adam, FirstStepMovesEachCoordinateByLr) {
  std::mt19937_64 rng(2);
  VecX p = VecX::Zero(8);
  const VecX g = random_vec(8, rng, -3, 3);
  auto st = AdamState::for_size(8, 0.01);
  adam_step(st, p, g);
  for (int i = 0; i < 8; ++i) {
    EXPECT_NEAR(p[i], -0.01 * (g[i] > 0 ? 1 : -1), 1e-8);
  }
}

TEST(Adam, QuadraticConverges) {
  std::mt19937_64 rng(3);
  const VecX target = random_vec(5, rng, -0.5, 0.5);
  VecX p = VecX::Zero(5);
  const Real e0 = (p - target).norm();
  auto st = AdamState::for_size(5, 0.01);
  for (int k = 0; k < 200; ++k) adam_step(st, p, 2 * (p - target));
  EXPECT_LE((p - target).norm(), e0 / 100);
}

TEST(Adam, RejectsNonFiniteGradient) {
  VecX p = VecX::Zero(2);
  auto st = AdamState::for_size(2);
  VecX g(2);
  g << 1, std::nan("");
  EXPECT_THROW(adam_step(st, p, g), NonFiniteGradient);
  EXPECT_TRUE(p.allFinite());
}

TEST(Adam, ParamsStayFiniteUnderLargeGradients) {
  std::mt19937_64 rng(4);
  VecX p = VecX::Zero(4);
  auto st = AdamState::for_size(4);
  for (int k = 0; k < 100; ++k) adam_step(st, p, 1e300 * random_vec(4, rng, -1, 1));
  EXPECT_TRUE(p.allFinite());
}

// ---------------------------------------------------------------- CMA-ES

TEST(CmaEs, SphereConverges) {
  std::mt19937_64 rng(5);
  const VecX opt = random_vec(8, rng, -0.5, 0.5);
  auto es = CmaEsState::init(VecX::Zero(8), 0.1, 10);
  for (int g = 0; g < 50; ++g) {
    const auto xs = es.ask(rng);
    std::vector<Real> f;
    for (const auto& x : xs) f.push_back((x - opt).squaredNorm());
    es.tell(xs, f);
  }
  EXPECT_LE((es.mean - opt).norm(), 0.05);
}

TEST(CmaEs, EqualFitnessKeepsMean) {
  std::mt19937_64 rng(6);
  auto es = CmaEsState::init(VecX::Constant(4, 0.3), 0.1, 10);
  const VecX m0 = es.mean;
  const auto xs = es.ask(rng);
  es.tell(xs, std::vector<Real>(10, 2.5));
  EXPECT_EQ(es.mean, m0);
}

TEST(CmaEs, SamplesMatchTheSearchDistribution) {
  std::mt19937_64 rng(7);
  auto es = CmaEsState::init(VecX::Constant(3, 1.0), 0.1, 10);
  // Shape the covariance away from identity first.
  for (int g = 0; g < 5; ++g) {
    const auto xs = es.ask(rng);
    std::vector<Real> f;
    for (const auto& x : xs) f.push_back(x[0] * x[0] + 10 * x[1] * x[1]);
    es.tell(xs, f);
  }
  VecX acc = VecX::Zero(3);
  int count = 0;
  while (count < 10000) {
    for (const auto& x : es.ask(rng)) {
      acc += x;
      ++count;
    }
  }
  const VecX mean = acc / count;
  for (int i = 0; i < 3; ++i) {
    const Real sd = es.sigma * std::sqrt(es.C(i, i));
    EXPECT_LE(std::abs(mean[i] - es.mean[i]), 3 * sd / 100) << i;
  }
}

TEST(CmaEs, CovarianceStaysSymmetricPositiveDefinite) {
  std::mt19937_64 rng(8);
  auto es = CmaEsState::init(VecX::Zero(6), 0.1, 10);
  for (int g = 0; g < 40; ++g) {
    const auto xs = es.ask(rng);
    std::vector<Real> f;
    for (const auto& x : xs) f.push_back(std::abs(x[0]) + 1e3 * x.tail(5).squaredNorm());
    es.tell(xs, f);
    ASSERT_LE((es.C - es.C.transpose()).norm(), 1e-12);
    Eigen::SelfAdjointEigenSolver<MatX> eig(es.C);
    ASSERT_GT(eig.eigenvalues().minCoeff(), 0);
    ASSERT_TRUE(es.mean.allFinite());
    ASSERT_TRUE(std::isfinite(es.sigma));
  }
}

// ---------------------------------------------------------------- multi-seed

namespace {

struct ToyRun {
  Real x = 0;
  Real loss = 0;
};

// Minima near -1.9 (global), 0.9 and 2.9 of a tilted triple well.
Real toy(Real x) { return std::sin(3.1 * x) + 0.05 * (x + 2) * (x + 2); }
Real toy_grad(Real x) { return 3.1 * std::cos(3.1 * x) + 0.1 * (x + 2); }

ToyRun toy_descent(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<Real> u(-3, 3);
  VecX p(1);
  p[0] = u(rng);
  auto st = AdamState::for_size(1, 0.05);
  for (int k = 0; k < 400; ++k) {
    VecX g(1);
    g[0] = toy_grad(p[0]);
    adam_step(st, p, g);
  }
  return {p[0], toy(p[0])};
}

const std::function<Real(const ToyRun&)> toy_score = [](const ToyRun& r) { return r.loss; };

}  // namespace

TEST(MultiSeed, SingleSeedMatchesSingleRun) {
  const auto res = multi_seed_best<ToyRun>(toy_descent, toy_score, 1, 42);
  const auto direct = toy_descent(42);
  EXPECT_EQ(res.best().x, direct.x);
  EXPECT_EQ(res.runs.size(), 1u);
}

TEST(MultiSeed, InitIndependentObjectiveGivesIdenticalValues) {
  const auto res = multi_seed_best<ToyRun>([](std::uint64_t) { return ToyRun{0.5, 1.25}; },
                                           toy_score, 8);
  for (const auto& r : res.runs) EXPECT_EQ(r->loss, 1.25);
  EXPECT_EQ(res.best().loss, 1.25);
}

TEST(MultiSeed, ReturnsGlobalBasin) {
  // Global minimum of the toy by dense search.
  Real best_x = 0, best = 1e9;
  for (int i = 0; i <= 60000; ++i) {
    const Real x = -3 + 6.0 * i / 60000;
    if (toy(x) < best) {
      best = toy(x);
      best_x = x;
    }
  }
  const auto res = multi_seed_best<ToyRun>(toy_descent, toy_score, 8, 0);
  EXPECT_EQ(res.runs.size(), 8u);
  EXPECT_NEAR(res.best().x, best_x, 1e-3);
  EXPECT_NEAR(res.best().loss, best, 1e-6);
}

TEST(MultiSeed, FailuresAreRecordedAndAllFailedThrows) {
  auto flaky = [](std::uint64_t seed) -> ToyRun {
    if (seed % 2 == 0) throw SimulationDiverged("boom");
    return {0, static_cast<Real>(seed)};
  };
  const auto res = multi_seed_best<ToyRun>(flaky, toy_score, 4);
  EXPECT_EQ(res.best().loss, 1.0);
  EXPECT_FALSE(res.runs[0].has_value());
  EXPECT_FALSE(res.errors[0].empty());
  EXPECT_THROW(multi_seed_best<ToyRun>([](std::uint64_t) -> ToyRun { throw EmptyRobot("x"); },
                                       toy_score, 3),
               AllRunsFailed);
}

// ---------------------------------------------------------------- sweep

TEST(Sweep, ConstantHasNoMinima) {
  const auto res = sweep_1d([](Real) { return 3.0; }, linspace(0, 1, 64));
  EXPECT_EQ(res.losses.size(), 64u);
  EXPECT_EQ(res.num_minima(), 0u);
}

TEST(Sweep, QuadraticHasOneMinimum) {
  const auto res = sweep_1d([](Real x) { return (x - 0.37) * (x - 0.37); }, linspace(0, 1, 64));
  ASSERT_EQ(res.num_minima(), 1u);
  EXPECT_NEAR(res.values[res.minima[0]], 0.37, 1.0 / 63);
}

TEST(Sweep, CountsStrictMinimaOnly) {
  EXPECT_EQ(strict_interior_minima({3, 1, 1, 3}).size(), 0u);
  EXPECT_EQ(strict_interior_minima({3, 1, 2, 0, 5}).size(), 2u);
  EXPECT_EQ(strict_interior_minima({0, 1, 2}).size(), 0u);
}

// ---------------------------------------------------------------- co-design

TEST(Codesign, ModeNames) {
  for (auto m : {CodesignMode::ControlOnly, CodesignMode::DesignOnly, CodesignMode::Codesign}) {
    EXPECT_EQ(codesign_mode_from_string(to_string(m)), m);
  }
  EXPECT_THROW(codesign_mode_from_string("both"), ConfigError);
}

TEST(Codesign, BudgetZeroReturnsInitialEvaluation) {
  auto desk = short_desk();
  auto dec = desk.decoder("sdf_lerp", 0);
  auto ctl = desk.controller(0);
  const VecX pd = dec->params(), pc = ctl->params();
  CodesignOptions opt;
  opt.budget = 0;
  const auto res = run_codesign<2>(desk.env, *dec, *ctl, opt);
  EXPECT_TRUE(res.log.empty());
  EXPECT_EQ(res.rollouts, 1);
  EXPECT_EQ(res.initial_reward, res.final_reward);
  EXPECT_EQ(dec->params(), pd);
  EXPECT_EQ(ctl->params(), pc);
  EXPECT_EQ(res.final_reward, evaluate_episode<2>(desk.env, *dec, *ctl, false).reward);
}

TEST(Codesign, BudgetOneLogsOneIteration) {
  auto desk = short_desk();
  auto dec = desk.decoder("sdf_lerp", 0);
  auto ctl = desk.controller(0);
  CodesignOptions opt;
  opt.budget = 1;
  const auto res = run_codesign<2>(desk.env, *dec, *ctl, opt);
  ASSERT_EQ(res.log.size(), 1u);
  EXPECT_EQ(res.log[0].iter, 0);
  EXPECT_EQ(res.rollouts, 2);
}

TEST(Codesign, ModesFreezeTheRightGroups) {
  auto desk = short_desk();
  for (auto mode : {CodesignMode::ControlOnly, CodesignMode::DesignOnly, CodesignMode::Codesign}) {
    auto dec = desk.decoder("sdf_lerp", 1);
    auto ctl = desk.controller(1);
    const VecX pd = dec->params(), pc = ctl->params();
    CodesignOptions opt;
    opt.mode = mode;
    opt.budget = 2;
    run_codesign<2>(desk.env, *dec, *ctl, opt);
    EXPECT_EQ(dec->params() == pd, !optimizes_design(mode)) << to_string(mode);
    EXPECT_EQ(ctl->params() == pc, !optimizes_control(mode)) << to_string(mode);
  }
}

TEST(Codesign, DeterministicLogs) {
  auto desk = short_desk();
  std::vector<Real> rewards[2];
  for (int rep = 0; rep < 2; ++rep) {
    auto dec = desk.decoder("implicit", 3);
    auto ctl = desk.controller(3);
    CodesignOptions opt;
    opt.budget = 3;
    const auto res = run_codesign<2>(desk.env, *dec, *ctl, opt);
    for (const auto& r : res.log) rewards[rep].push_back(r.reward);
    rewards[rep].push_back(res.final_reward);
  }
  EXPECT_EQ(rewards[0], rewards[1]);
}

TEST(Codesign, ImprovesRewardOnShortEpisode) {
  auto desk = short_desk(80);
  auto dec = desk.decoder("sdf_lerp", 0);
  auto ctl = desk.controller(0);
  CodesignOptions opt;
  opt.budget = 5;
  const auto res = run_codesign<2>(desk.env, *dec, *ctl, opt);
  EXPECT_GT(res.best_reward, res.initial_reward);
  EXPECT_GE(res.best_reward, res.final_reward);
}

namespace {

/// Decoder wrapper whose gradient is NaN.
class NanGradDecoder final : public DesignDecoder<2> {
 public:
  explicit NanGradDecoder(std::unique_ptr<DesignDecoder<2>> inner) : inner_(std::move(inner)) {}
  std::string kind() const override { return "nan"; }
  VecX params() const override { return inner_->params(); }
  void set_params(const VecX& p) override { inner_->set_params(p); }
  DesignSpec<2> decode() const override { return inner_->decode(); }
  VecX vjp(const DesignGrad<2>& g) const override {
    VecX out = inner_->vjp(g);
    out[0] = std::nan("");
    return out;
  }
  std::unique_ptr<DesignDecoder<2>> clone() const override {
    return std::make_unique<NanGradDecoder>(inner_->clone());
  }

 private:
  std::unique_ptr<DesignDecoder<2>> inner_;
};

}  // namespace

TEST(Codesign, NanGradientSkipsStepAndRecordsEvent) {
  auto desk = short_desk();
  NanGradDecoder dec(desk.decoder("sdf_lerp", 0));
  auto ctl = desk.controller(0);
  const VecX pd = dec.params(), pc = ctl->params();
  CodesignOptions opt;
  opt.budget = 2;
  const auto res = run_codesign<2>(desk.env, dec, *ctl, opt);
  EXPECT_EQ(res.events.size(), 2u);
  EXPECT_EQ(res.log.size(), 2u);
  EXPECT_EQ(dec.params(), pd);
  EXPECT_EQ(ctl->params(), pc);
}

TEST(Codesign, GradientMatchesFiniteDifferencesOnProbe) {
  auto desk = short_desk(40);
  auto dec = desk.decoder("sdf_lerp", 0);
  auto ctl = desk.controller(0);
  const int nd = dec->num_params();
  const int N = 4;
  // two membership weights and one controller weight
  const std::vector<int> probe = {2 * N + 0, 2 * N + 2, nd + 3};
  const auto ev = evaluate_episode<2>(desk.env, *dec, *ctl, true);
  VecX joint(nd + ctl->num_params());
  joint << dec->params(), ctl->params();
  VecX analytic(3), p0(3);
  for (int i = 0; i < 3; ++i) {
    const int k = probe[i];
    analytic[i] = k < nd ? ev.design_grad[k] : ev.control_grad[k - nd];
    p0[i] = joint[k];
  }
  auto loss = [&](const VecX& q) {
    VecX x = joint;
    for (int i = 0; i < 3; ++i) x[probe[i]] = q[i];
    dec->set_params(x.head(nd));
    ctl->set_params(x.tail(x.size() - nd));
    return evaluate_episode<2>(desk.env, *dec, *ctl, false).loss;
  };
  const auto rep = grad_check_report(loss, p0, analytic, 1e-5);
  EXPECT_GT(analytic.norm(), 1e-6);
  EXPECT_LE(mpmcd::testing::rel_err(analytic, rep.central), 1e-3)
      << analytic.transpose() << " vs " << rep.central.transpose();
}

TEST(Codesign, CmaesRespectsRolloutBudget) {
  auto desk = short_desk();
  auto dec = desk.decoder("sdf_lerp", 0);
  auto ctl = desk.controller(0);
  CmaesOptions opt;
  opt.rollout_budget = 25;
  const auto res = run_cmaes<2>(desk.env, *dec, *ctl, opt);
  EXPECT_EQ(res.rollouts, 21);  // initial mean + two generations of 10
  EXPECT_EQ(res.log.size(), 3u);
  EXPECT_GE(res.best_reward, res.initial_reward);
  // the decoder and controller are left at the best evaluated point
  EXPECT_EQ(evaluate_episode<2>(desk.env, *dec, *ctl, false).reward, res.best_reward);
}

// ---- ambiguity ------------------------------------------------------------

TEST(Spearman, MonotoneAndReversed) {
  const std::vector<Real> x{1, 2, 3, 4, 5};
  EXPECT_NEAR(spearman(x, {2, 4, 8, 16, 32}), 1.0, 1e-12);
  EXPECT_NEAR(spearman(x, {5, 3, 1, 0, -9}), -1.0, 1e-12);
}

TEST(Spearman, TiesUseAverageRanks) {
  // ranks of b: 0.5 0.5 2 3 -> Pearson against 0 1 2 3
  const Real r = spearman({1, 2, 3, 4}, {7, 7, 8, 9});
  EXPECT_NEAR(r, 0.9486832980505138, 1e-12);
  EXPECT_THROW(spearman({1, 2}, {1}), SizeMismatch);
}

TEST(Ambiguity, KindNames) {
  EXPECT_EQ(ambiguity_kind_from_string("stiffness"), AmbiguityKind::Stiffness);
  EXPECT_EQ(ambiguity_kind_from_string("placement"), AmbiguityKind::Placement);
  EXPECT_STREQ(to_string(AmbiguityKind::Placement), "placement");
  EXPECT_THROW(ambiguity_kind_from_string("mass"), ConfigError);
}

namespace {
AmbiguityConfig tiny_ambiguity() {
  AmbiguityConfig ac;
  ac.frames = 3;
  ac.substeps_per_frame = 10;
  ac.fit_iters = 2;
  ac.seeds = 2;
  return ac;
}
}  // namespace

TEST(Ambiguity, IdentityReferenceIsMatchedExactly) {
  // A zero-action reference is reproduced by the zero-initialized table.
  const auto ac = tiny_ambiguity();
  const auto sc = AmbiguityScene::make(ac);
  const auto robot = sc.robot(3, 0, 1.0);
  const OpenLoopController<2> zero(ac.frames, 3);
  const auto frames = detail::record_frames(sc, robot, zero, ac);
  ASSERT_EQ(frames.size(), static_cast<std::size_t>(ac.frames));
  auto fit = ac;
  fit.fit_iters = 0;
  EXPECT_EQ(fit_open_loop(sc, robot, 3, frames, fit), 0.0);
}

TEST(Ambiguity, TablesHaveOneRowPerSettingAndFiniteErrors) {
  const auto ac = tiny_ambiguity();
  for (auto kind : {AmbiguityKind::Stiffness, AmbiguityKind::Placement}) {
    const auto t = ambiguity_experiment(kind, ac);
    const std::size_t rows = kind == AmbiguityKind::Stiffness ? ac.multipliers.size() : ac.actuator_counts.size();
    ASSERT_EQ(t.rows.size(), rows);
    for (const auto& r : t.rows) {
      ASSERT_EQ(r.errors.size(), 2u);
      for (Real e : r.errors) {
        EXPECT_TRUE(std::isfinite(e));
        EXPECT_GE(e, 0.0);
      }
      EXPECT_GE(r.median, std::min(r.errors[0], r.errors[1]));
    }
    EXPECT_EQ(t.rows.back().setting, kind == AmbiguityKind::Stiffness ? 4.0 : 8.0);
  }
}

TEST(Ambiguity, FittingReducesError) {
  auto ac = tiny_ambiguity();
  ac.seeds = 1;
  ac.multipliers = {1.0};
  ac.fit_iters = 0;
  const Real before = ambiguity_experiment(AmbiguityKind::Stiffness, ac).rows[0].median;
  ac.fit_iters = 15;
  const Real after = ambiguity_experiment(AmbiguityKind::Stiffness, ac).rows[0].median;
  EXPECT_LT(after, before);
}

// ---- walker sweep ---------------------------------------------------------

TEST(Walker, MembershipBlendsLayouts) {
  const auto w = DeskWalker::make();
  const auto a = w.design(1.0), b = w.design(0.0), m = w.design(0.25);
  for (std::size_t i = 0; i < w.base.size(); ++i) {
    const auto c = static_cast<Eigen::Index>(i);
    EXPECT_NEAR(m.r.col(c).sum(), 1.0, 1e-15);
    EXPECT_EQ(a.r(0, c), w.part[i] == 1 ? 0.0 : 1.0);
    EXPECT_EQ(b.r(0, c), 1.0 - a.r(0, c));
  }
}

TEST(Walker, SweepIsDeterministicWithOneLossPerPoint) {
  auto w = DeskWalker::make();
  w.env.T = 60;
  const auto r1 = w.sweep(5), r2 = w.sweep(5);
  ASSERT_EQ(r1.losses.size(), 5u);
  EXPECT_EQ(r1.losses, r2.losses);
  EXPECT_EQ(r1.values.front(), 0.0);
  EXPECT_EQ(r1.values.back(), 1.0);
}
