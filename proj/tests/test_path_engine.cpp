#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "condstable/errors.hpp"
#include "condstable/parallel.hpp"
#include "condstable/path_engine.hpp"
#include "condstable/specfun.hpp"
#include "oracles.hpp"

using namespace condstable;

namespace {

PathConfig jump_adapted(double horizon = 1.0) {
  PathConfig c;
  c.scheme = Scheme::JumpAdapted;
  c.horizon = horizon;
  return c;
}

// P_{x0}(e_q < T) with e_q drawn first from each replicate stream.
MCEstimate sampled_clock_survival(const StableParams& p, double x0, Barrier b, double q,
                                  std::uint64_t n, const RngStream& base) {
  Moments m;
  for (std::uint64_t i = 0; i < n; ++i) {
    RngStream r = base.child(i);
    const double e = r.exponential() / q;
    PathConfig cfg = jump_adapted(e);
    cfg.dt = std::min(cfg.dt, e);
    m.add(simulate_killed(p, x0, b, {}, cfg, r).outcome.hit ? 0.0 : 1.0);
  }
  return {m.mean, m.stderr(), n, base.seed(), base.stream_index()};
}

}  // namespace

TEST(PathConfig, Validate) {
  PathConfig c;
  EXPECT_NO_THROW(c.validate());
  c.dt = 2.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = PathConfig{};
  c.eps = 1.0;
  EXPECT_THROW(c.validate(), DomainError);
  c = PathConfig{};
  c.refine_levels = -1;
  EXPECT_THROW(c.validate(), DomainError);
}

TEST(Skeleton, Bookkeeping) {
  PathConfig c;
  c.horizon = 1.0;
  c.dt = 0.5;
  RngStream r(1, 0);
  const PathSample s = simulate_skeleton(make_params(1.5), 2.0, c, r);
  ASSERT_EQ(s.times.size(), 3u);
  EXPECT_EQ(s.times[0], 0.0);
  EXPECT_DOUBLE_EQ(s.times[2], 1.0);
  EXPECT_EQ(s.values[0], 2.0);
  EXPECT_TRUE(std::is_sorted(s.times.begin(), s.times.end()));
}

TEST(Skeleton, EndpointMatchesSingleIncrement) {
  const StableParams p = make_params(1.5);
  PathConfig c;
  c.horizon = 1.0;
  c.dt = 0.01;
  const int n = 10000;
  std::vector<double> sk(n), direct(n);
  RngStream r2(2, 1);
  for (int i = 0; i < n; ++i) {
    RngStream r = RngStream(2, 0).child(i);
    sk[i] = simulate_skeleton(p, 0.0, c, r).values.back();
    direct[i] = sample_increment(p, 1.0, r2);
  }
  EXPECT_LT(ks_two_sample(sk, direct), ks_critical(0.01, n, n));
}

TEST(Skeleton, ScalingOfPaths) {
  const StableParams p = make_params(1.5);
  const double c = 2.0;
  PathConfig unit, stretched;
  unit.horizon = 1.0;
  unit.dt = 0.05;
  stretched.horizon = std::pow(c, 1.5);
  stretched.dt = unit.dt * stretched.horizon;
  const int n = 10000;
  std::vector<double> a(n), b(n);
  for (int i = 0; i < n; ++i) {
    RngStream r1 = RngStream(3, 0).child(i), r2 = RngStream(3, 1).child(i);
    const PathSample s1 = simulate_skeleton(p, 0.0, unit, r1);
    const PathSample s2 = simulate_skeleton(p, 0.0, stretched, r2);
    a[i] = c * *std::max_element(s1.values.begin(), s1.values.end());
    b[i] = *std::max_element(s2.values.begin(), s2.values.end());
  }
  EXPECT_LT(ks_two_sample(a, b), ks_critical(0.01, n, n));
}

TEST(FirstPassageSubordinator, OvershootAtHalf) {
  const StableParams p = make_params(0.5);
  PathConfig cfg;
  const std::uint64_t n = 100000;
  const RngStream base(4, 0);
  Moments above;
  std::vector<double> over;
  for (std::uint64_t i = 0; i < n; ++i) {
    RngStream r = base.child(i);
    const HittingOutcome o = first_passage_subordinator(p, -3.0, -1.0, cfg, r);
    ASSERT_TRUE(o.hit);
    ASSERT_FALSE(o.censored);
    if (o.unresolved_drift) continue;
    ASSERT_TRUE(o.by_jump);
    ASSERT_NEAR(o.post_position, -1.0 + o.overshoot, 1e-12);
    ASSERT_LT(o.pre_position, -1.0);
    above.add(o.overshoot > 2.0 ? 1.0 : 0.0);
    if (over.size() < 20000) over.push_back(o.overshoot);
  }
  const double se = std::sqrt(0.25 / above.count);
  EXPECT_NEAR(above.mean, 0.5, 3.0 * se + 2.3e-3);
  EXPECT_NEAR(above.mean, h_subordinator(0.5, -3.0), 3.0 * se + 2.3e-3);
  const double ks = ks_statistic(over, [](double z) { return 1.0 - oracle::overshoot_tail(0.5, 2.0, z); });
  EXPECT_LT(ks, ks_critical(0.01, over.size()));
}

TEST(FirstPassageSubordinator, DriftCrossingsVanishWithEps) {
  const StableParams p = make_params(0.8);
  double previous = 1.0;
  for (double eps : {1e-1, 1e-3, 1e-5}) {
    PathConfig cfg;
    cfg.eps = eps;
    cfg.max_eps_refinements = 0;
    int drift = 0;
    const int n = 20000;
    for (int i = 0; i < n; ++i) {
      RngStream r = RngStream(5, 0).child(i);
      drift += first_passage_subordinator(p, -3.0, -1.0, cfg, r).unresolved_drift;
    }
    const double frac = drift / double(n);
    EXPECT_LT(frac, previous) << eps;
    previous = frac;
  }
}

TEST(FirstPassageSubordinator, Domain) {
  PathConfig cfg;
  RngStream r(6, 0);
  EXPECT_THROW(first_passage_subordinator(make_params(1.5), -3.0, -1.0, cfg, r), DomainError);
  EXPECT_THROW(first_passage_subordinator(make_params(0.5), 0.0, -1.0, cfg, r), DomainError);
}

TEST(SimulateKilled, IntervalEqualsBelowOneFromAbove) {
  const StableParams p = make_params(1.5);
  for (Scheme s : {Scheme::Skeleton, Scheme::JumpAdapted}) {
    PathConfig cfg;
    cfg.scheme = s;
    cfg.horizon = 2.0;
    for (std::uint64_t i = 0; i < 200; ++i) {
      RngStream r1 = RngStream(7, 0).child(i), r2 = RngStream(7, 0).child(i);
      const HittingOutcome a = simulate_killed(p, 2.0, Barrier::Interval, {}, cfg, r1).outcome;
      const HittingOutcome b = simulate_killed(p, 2.0, Barrier::BelowOne, {}, cfg, r2).outcome;
      ASSERT_EQ(a.hit, b.hit);
      ASSERT_EQ(a.time, b.time);
      if (a.hit) ASSERT_EQ(a.post_position, b.post_position) << i;
    }
  }
}

TEST(SimulateKilled, JumpsOverTheIntervalFromBelow) {
  const StableParams p = make_params(1.5);
  PathConfig cfg = jump_adapted(5.0);
  int hits = 0, over = 0;
  for (std::uint64_t i = 0; i < 5000; ++i) {
    RngStream r = RngStream(8, 0).child(i);
    const PathRecord rec = simulate_killed(p, -2.0, Barrier::AboveMinusOne, {}, cfg, r);
    if (!rec.outcome.hit) continue;
    ++hits;
    ASSERT_TRUE(std::isfinite(rec.outcome.post_position));
    ASSERT_GE(rec.outcome.post_position, -1.0);
    ASSERT_LE(rec.outcome.time, cfg.horizon);
    if (rec.outcome.post_position > 1.0) {
      ++over;
      ASSERT_TRUE(rec.jumped_over);
    }
  }
  EXPECT_GT(hits, 1000);
  EXPECT_GT(over, 50);
}

TEST(SimulateKilled, FarStartIsCensored) {
  PathConfig cfg;
  cfg.horizon = 0.01;
  cfg.dt = 0.01;
  RngStream r(9, 0);
  const HittingOutcome o = simulate_killed(make_params(1.5), 100.0, Barrier::Interval, {}, cfg, r).outcome;
  EXPECT_TRUE(o.censored);
  EXPECT_FALSE(o.hit);
}

TEST(SimulateKilled, ObservationsNanAfterKilling) {
  const StableParams p = make_params(1.5);
  PathConfig cfg;
  cfg.horizon = 2.0;
  const double obs[] = {0.0, 0.5, 1.0, 2.0};
  for (std::uint64_t i = 0; i < 200; ++i) {
    RngStream r = RngStream(10, 0).child(i);
    const PathRecord rec = simulate_killed(p, 1.2, Barrier::Interval, obs, cfg, r);
    EXPECT_EQ(rec.at[0], 1.2);
    for (std::size_t k = 0; k < 4; ++k) {
      if (rec.outcome.hit && obs[k] >= rec.outcome.time) {
        EXPECT_FALSE(rec.alive_at(k));
      } else {
        EXPECT_TRUE(rec.alive_at(k));
        EXPECT_GT(rec.at[k], 1.0);
      }
    }
  }
}

TEST(SurvivalProbability, SubordinatorAboveNeverDies) {
  PathConfig cfg;
  const MCEstimate e = survival_probability(make_params(0.5), 2.0, 0.7, Barrier::Interval, cfg, 1000,
                                            RngStream(11, 0));
  EXPECT_EQ(e.value, 1.0);
  EXPECT_EQ(e.stderr, 0.0);
}

TEST(SurvivalProbability, ShortTimeNearOne) {
  PathConfig cfg;
  cfg.horizon = 1e-3;
  cfg.dt = 1e-4;
  const MCEstimate e = survival_probability(make_params(1.5), -2.0, 1e-3, Barrier::AboveMinusOne, cfg,
                                            5000, RngStream(12, 0));
  EXPECT_GT(e.value, 0.999);
}

TEST(SurvivalProbability, WorkerCountInvariant) {
  PathConfig cfg;
  const unsigned saved = worker_count();
  set_worker_count(1);
  const MCEstimate a = survival_probability(make_params(1.5), 2.0, 0.5, Barrier::Interval, cfg, 3000,
                                            RngStream(13, 0));
  set_worker_count(4);
  const MCEstimate b = survival_probability(make_params(1.5), 2.0, 0.5, Barrier::Interval, cfg, 3000,
                                            RngStream(13, 0));
  set_worker_count(saved);
  EXPECT_EQ(a.value, b.value);
  EXPECT_EQ(a.stderr, b.stderr);
}

TEST(SimulateKilled, ExactExitAboveTheInterval) {
  for (double a : {1.3, 1.7}) {
    const StableParams p = make_params(a);
    for (double x0 : {1.5, 4.0}) {
      const double q = 0.1;
      const MCEstimate e = sampled_clock_survival(p, x0, Barrier::BelowOne, q, 20000, RngStream(14, 0));
      const double th = oracle::survival_above(a, q, x0);
      EXPECT_NEAR(e.value, th, 3.0 * e.stderr + 4e-3) << a << " " << x0;
    }
  }
}

TEST(SimulateKilled, ExactExitBelowTheInterval) {
  for (double a : {1.3, 1.7}) {
    const StableParams p = make_params(a);
    for (double x0 : {-1.5, -4.0}) {
      const double q = 0.1;
      const MCEstimate e =
          sampled_clock_survival(p, x0, Barrier::AboveMinusOne, q, 20000, RngStream(15, 0));
      const double th = oracle::survival_below(a, q, x0);
      EXPECT_NEAR(e.value, th, 3.0 * e.stderr + 4e-3) << a << " " << x0;
    }
  }
}

TEST(SimulateKilled, SkeletonExitAboveTheInterval) {
  const StableParams p = make_params(1.5);
  const double q = 5.0;
  Moments m;
  for (std::uint64_t i = 0; i < 20000; ++i) {
    RngStream r = RngStream(16, 0).child(i);
    PathConfig run;
    run.horizon = r.exponential() / q;
    run.dt = std::min(run.dt, run.horizon);
    m.add(simulate_killed(p, 1.5, Barrier::BelowOne, {}, run, r).outcome.hit ? 0.0 : 1.0);
  }
  // Grid monitoring misses crossings between grid points, so survival is biased up.
  const double th = oracle::survival_above(1.5, q, 1.5);
  EXPECT_GT(m.mean, th - 3.0 * m.stderr());
  EXPECT_LT(m.mean, th + 3.0 * m.stderr() + 0.02);
}

TEST(CoupledSkeleton, LevelsOrderedByResolution) {
  const StableParams p = make_params(1.5);
  PathConfig cfg;
  cfg.horizon = 0.5;
  const double obs[] = {0.5};
  Moments alive[3];
  for (std::uint64_t i = 0; i < 3000; ++i) {
    RngStream r = RngStream(17, 0).child(i);
    const CoupledSkeleton cs = simulate_coupled_skeleton(p, 1.5, Barrier::Interval, obs, cfg, r);
    for (int l = 0; l < 3; ++l) alive[l].add(cs.kill_time[l] > 0.5 ? 1.0 : 0.0);
  }
  // A finer grid sees at least as many entries on average.
  EXPECT_GE(alive[0].mean + 3 * alive[0].stderr(), alive[1].mean);
  EXPECT_GE(alive[1].mean + 3 * alive[1].stderr(), alive[2].mean);
  MCEstimate plain = survival_probability(p, 1.5, 0.5, Barrier::Interval, cfg, 3000, RngStream(17, 1));
  EXPECT_NEAR(alive[0].mean, plain.value, 3.0 * std::hypot(alive[0].stderr(), plain.stderr));
}

TEST(ConditioningBarrier, ByRegimeAndSide) {
  EXPECT_EQ(conditioning_barrier(make_params(0.5), -3.0), Barrier::Interval);
  EXPECT_EQ(conditioning_barrier(make_params(1.5), 2.0), Barrier::BelowOne);
  EXPECT_EQ(conditioning_barrier(make_params(1.5), -2.0), Barrier::AboveMinusOne);
  EXPECT_THROW(conditioning_barrier(make_params(1.5), 0.0), DomainError);
}

TEST(SurvivalCurve, NonIncreasingInTime) {
  const double times[] = {0.1, 0.25, 0.5, 1.0, 2.0};
  for (double x0 : {1.5, -2.0}) {
    PathConfig cfg;
    cfg.horizon = 2.0;
    const auto curve = survival_curve(make_params(1.5), x0, times, Barrier::Interval, cfg, 4000, RngStream(18, 0));
    for (std::size_t k = 1; k < curve.size(); ++k) EXPECT_LE(curve[k].value, curve[k - 1].value);
  }
}

// Halving dt moves the skeleton survival by less than the 0.02 discretisation budget.
TEST(SurvivalProbability, HalvingStepWithinBudget) {
  const StableParams p = make_params(1.5);
  PathConfig coarse, fine;
  coarse.horizon = fine.horizon = 0.5;
  fine.dt = coarse.dt / 2.0;
  const MCEstimate a = survival_probability(p, 1.5, 0.5, Barrier::Interval, coarse, 20000, RngStream(19, 0));
  const MCEstimate b = survival_probability(p, 1.5, 0.5, Barrier::Interval, fine, 20000, RngStream(19, 1));
  EXPECT_LE(a.value - b.value, 0.02 + 3.0 * std::hypot(a.stderr, b.stderr));
  EXPECT_GE(a.value - b.value, -3.0 * std::hypot(a.stderr, b.stderr));
}
