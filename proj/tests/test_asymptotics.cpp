#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include "condstable/asymptotics.hpp"
#include "condstable/errors.hpp"
#include "oracles.hpp"

using namespace condstable;

namespace {

PathConfig jump_adapted() {
  PathConfig c;
  c.scheme = Scheme::JumpAdapted;
  return c;
}

std::vector<GridPoint> power_grid(double c, double k, std::vector<double> xs, double rel = 0.01) {
  std::vector<GridPoint> g;
  for (double x : xs) g.push_back({x, c * std::pow(x, k), rel * c * std::pow(x, k), false});
  return g;
}

}  // namespace

TEST(FitPowerLaw, RecoversExponent) {
  for (double k : {-1.0 / 3.0, -1.0 / 6.0, 1.0 / 3.0}) {
    const FitResult f = fit_power_law(power_grid(0.7, k, {1, 2, 5, 10, 20}));
    EXPECT_NEAR(f.exponent, k, 1e-12);
    EXPECT_NEAR(std::exp(f.intercept), 0.7, 1e-12);
    EXPECT_NEAR(f.r_squared, 1.0, 1e-12);
    for (const GridPoint& g : f.grid) EXPECT_TRUE(g.used);
  }
}

TEST(FitPowerLaw, ScaleFree) {
  const std::vector<double> s = {1, 2, 5, 10, 20};
  std::vector<double> doubled;
  for (double v : s) doubled.push_back(2 * v);
  std::vector<GridPoint> a = power_grid(1.0, -0.3, s), b = power_grid(1.0, -0.3, doubled);
  // Perturb identically in relative terms so the fits are not exact.
  const double wiggle[] = {1.01, 0.99, 1.02, 0.995, 1.0};
  for (int i = 0; i < 5; ++i) {
    a[i].estimate *= wiggle[i];
    b[i].estimate *= wiggle[i];
  }
  const FitResult fa = fit_power_law(a), fb = fit_power_law(b);
  EXPECT_NEAR(fa.exponent, fb.exponent, 1e-12);
  EXPECT_GE(fa.r_squared, 0.0);
  EXPECT_LE(fa.r_squared, 1.0);
}

TEST(FitPowerLaw, ExcludesNoisyPoints) {
  std::vector<GridPoint> g = power_grid(1.0, -0.5, {1, 2, 4, 8});
  g[3].estimate *= 3.0;
  g[3].stderr = 0.5 * g[3].estimate;
  const FitResult f = fit_power_law(g);
  EXPECT_FALSE(f.grid[3].used);
  EXPECT_NEAR(f.exponent, -0.5, 1e-12);
}

TEST(FitPowerLaw, Degenerate) {
  EXPECT_THROW(fit_power_law({}), FitDegenerate);
  std::vector<GridPoint> zero = power_grid(1.0, -0.5, {1, 2, 4});
  zero[1].estimate = 0.0;
  EXPECT_THROW(fit_power_law(zero), FitDegenerate);
  std::vector<GridPoint> noisy = power_grid(1.0, -0.5, {1, 2, 4}, 0.5);
  noisy[0].stderr = 0.0;
  EXPECT_THROW(fit_power_law(noisy), FitDegenerate);
}

TEST(SurvivalTailExponent, Domain) {
  const double s[] = {1, 2, 5};
  EXPECT_THROW(survival_tail_exponent(make_params(1.5), -2.0, s, jump_adapted(), 10, RngStream(40, 0)), DomainError);
  const double s4[] = {1, 2, 5, 10};
  EXPECT_THROW(survival_tail_exponent(make_params(0.5), -2.0, s4, jump_adapted(), 10, RngStream(40, 0)), DomainError);
  EXPECT_THROW(survival_tail_exponent(make_params(1.5), 2.0, s4, jump_adapted(), 10, RngStream(40, 0)), DomainError);
}

TEST(SurvivalTailExponent, DecaysFromBelow) {
  const double s[] = {1, 2, 5, 10};
  const FitResult f = survival_tail_exponent(make_params(1.5), -2.0, s, jump_adapted(), 20000, RngStream(41, 0));
  EXPECT_LT(f.exponent, 0.0);
  EXPECT_GT(f.exponent, -1.0);
}

TEST(EqSurvival, FastClockSurvives) {
  const MCEstimate e = eq_survival(make_params(1.5), -2.0, 100.0, jump_adapted(), 5000, RngStream(42, 0));
  EXPECT_GT(e.value, 0.97);
}

// From below the half-line [-1, inf) is entered no later than the interval, so
// the exact half-line law is a lower bound.
TEST(EqSurvival, BoundedByHalfLineLaw) {
  for (double q : {1e-1, 1e-2}) {
    const MCEstimate e = eq_survival(make_params(1.5), -3.0, q, jump_adapted(), 20000, RngStream(43, 0),
                                     ClockMode::Integrated);
    EXPECT_GE(e.value, oracle::survival_below(1.5, q, -3.0) - 3.0 * e.stderr) << q;
  }
}

TEST(EqSurvival, ScaledRateRoughlyConstant) {
  const double qs[] = {1e-1, 1e-2, 1e-3};
  const auto curve = eq_survival_curve(make_params(1.5), -2.0, qs, jump_adapted(), 20000, RngStream(44, 0),
                                       ClockMode::Integrated);
  std::vector<double> scaled;
  for (int k = 0; k < 3; ++k) scaled.push_back(std::pow(qs[k], 1.0 / 1.5 - 1.0) * curve[k].value);
  // The profile is the leading-order term only; allow a factor 2 spread.
  EXPECT_LT(*std::max_element(scaled.begin(), scaled.end()) / *std::min_element(scaled.begin(), scaled.end()),
            2.0);
}

TEST(ProfileRatio, PredictedValues) {
  const double xs[] = {-2.0, -3.0, -5.0};
  const auto pts = profile_ratio_check(make_params(1.5), xs, 1e-2, jump_adapted(), 2000, RngStream(45, 0));
  ASSERT_EQ(pts.size(), 3u);
  EXPECT_EQ(pts[0].predicted, 1.0);
  EXPECT_EQ(pts[0].ratio, 1.0);
  EXPECT_NEAR(pts[1].predicted, std::sqrt(2.0), 1e-15);
  EXPECT_NEAR(pts[1].predicted, 1.4142, 1e-4);
  EXPECT_NEAR(pts[2].predicted, 2.0, 1e-15);
}

TEST(ProfileRatio, IdenticalPoints) {
  const double xs[] = {-2.0, -2.0};
  const auto pts = profile_ratio_check(make_params(1.5), xs, 1e-2, jump_adapted(), 10000, RngStream(46, 0),
                                       ClockMode::Integrated);
  EXPECT_EQ(pts[1].predicted, 1.0);
  EXPECT_NEAR(pts[1].ratio, 1.0, 3.0 * pts[1].stderr);
}

TEST(ProfileRatio, Domain) {
  const double one[] = {-2.0};
  EXPECT_THROW(profile_ratio_check(make_params(1.5), one, 1e-2, jump_adapted(), 10, RngStream(47, 0)), DomainError);
}

TEST(UpperBound, TrivialForLargeRate) {
  const double qs[] = {1.0, 4.0};
  for (const BoundPoint& b : upper_bound_check(make_params(1.5), 2.0, qs, jump_adapted(), 2000, RngStream(48, 0))) {
    EXPECT_GE(b.rhs, 1.0);
    EXPECT_TRUE(b.holds);
  }
}

// The left side has the exact law 1 - exp(-rhs), which is below rhs.
TEST(UpperBound, MatchesExactLaw) {
  const double qs[] = {1e-2};
  const auto pts = upper_bound_check(make_params(1.5), 1.5, qs, jump_adapted(), 20000, RngStream(49, 0),
                                     ClockMode::Integrated);
  const BoundPoint& b = pts.front();
  EXPECT_NEAR(b.rhs, 0.5 * std::pow(1e-2, 2.0 / 3.0), 1e-15);
  EXPECT_NEAR(b.rhs, 0.02321, 1e-5);
  EXPECT_TRUE(b.holds);
  EXPECT_LE(b.lhs, b.rhs + 3.0 * b.stderr);
  EXPECT_NEAR(b.lhs, -std::expm1(-b.rhs), 3.0 * b.stderr + 1e-3);
}

TEST(Cancellation, StratumMonotoneAndDecaying) {
  const double qs[] = {1e-1, 1e-2};
  const CancellationResult r = cancellation_rate(make_params(1.5), -2.0, 1.0, qs, jump_adapted(), 40000,
                                                 RngStream(50, 0));
  ASSERT_EQ(r.stratum.size(), 2u);
  EXPECT_TRUE(r.monotone);
  EXPECT_GT(r.fit.exponent, 0.0);
  EXPECT_GE(r.stratum[0].estimate.value, r.stratum[1].estimate.value);
}

// Both survival functions share the constant of the leading term, so their
// ratio is the same at every q up to lower-order corrections.
TEST(Tauberian, RatioProportional) {
  const double qs[] = {1e-1, 1e-2};
  const auto pts = tauberian_ratios(make_params(1.5), -2.0, qs, jump_adapted(), 20000, RngStream(51, 0));
  ASSERT_EQ(pts.size(), 2u);
  for (const TauberianPoint& t : pts) {
    EXPECT_GT(t.ratio, 0.0);
    EXPECT_TRUE(std::isfinite(t.stderr));
  }
  EXPECT_NEAR(pts[0].ratio / pts[1].ratio, 1.0, 0.15);
}
