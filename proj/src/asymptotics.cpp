#include "condstable/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "condstable/errors.hpp"
#include "condstable/parallel.hpp"

namespace condstable {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

void require_stable(const StableParams& params) {
  if (params.is_subordinator()) throw DomainError("this check requires alpha > 1");
}

double check_q_grid(std::span<const double> q_grid) {
  if (q_grid.empty()) throw DomainError("need at least one q");
  double q_min = kInf;
  for (double q : q_grid) {
    if (!(q > 0.0) || !std::isfinite(q)) throw DomainError("q must be finite and > 0");
    q_min = std::min(q_min, q);
  }
  return q_min;
}

std::vector<MCEstimate> clock_survival(const StableParams& params, double x0, Barrier barrier,
                                       std::span<const double> q_grid, const PathConfig& cfg,
                                       std::uint64_t n, const RngStream& rng, ClockMode clock) {
  if (n == 0) throw DomainError("replicate count n must be >= 1");
  const double q_min = check_q_grid(q_grid);
  const std::size_t nq = q_grid.size();
  PathConfig integrated = cfg;
  integrated.horizon = kClockHorizon / q_min;
  integrated.dt = std::min(cfg.dt, integrated.horizon);
  integrated.validate();

  struct Acc {
    std::vector<Moments> m;
    void merge(const Acc& o) {
      for (std::size_t i = 0; i < m.size(); ++i) m[i].merge(o.m[i]);
    }
  };
  const Acc acc = run_replicates(n, Acc{std::vector<Moments>(nq)}, [&](std::size_t i, Acc& a) {
    RngStream r = rng.child(i);
    if (clock == ClockMode::Sampled) {
      const double e1 = r.exponential();
      PathConfig run = cfg;
      run.horizon = e1 / q_min;
      run.dt = std::min(cfg.dt, run.horizon);
      const HittingOutcome out = simulate_killed(params, x0, barrier, {}, run, r).outcome;
      for (std::size_t k = 0; k < nq; ++k)
        a.m[k].add(out.hit && out.time <= e1 / q_grid[k] ? 0.0 : 1.0);
    } else {
      const HittingOutcome out = simulate_killed(params, x0, barrier, {}, integrated, r).outcome;
      const double T = out.hit ? out.time : kInf;
      for (std::size_t k = 0; k < nq; ++k) a.m[k].add(-std::expm1(-q_grid[k] * T));
    }
  });
  std::vector<MCEstimate> out;
  for (const Moments& m : acc.m) out.push_back({m.mean, m.stderr(), n, rng.seed(), rng.stream_index()});
  return out;
}

}  // namespace

FitResult fit_power_law(std::vector<GridPoint> grid) {
  if (grid.empty()) throw FitDegenerate("empty fit grid");
  std::vector<double> xs, ys, ws;
  for (GridPoint& g : grid) {
    if (!(g.estimate > 0.0)) throw FitDegenerate("grid estimate is zero");
    if (!(g.abscissa > 0.0)) throw FitDegenerate("grid abscissa must be > 0");
    const double rel = g.stderr / g.estimate;
    g.used = rel <= kMaxRelativeStderr;
    if (!g.used) continue;
    xs.push_back(std::log(g.abscissa));
    ys.push_back(std::log(g.estimate));
    // Zero stderr (exact points) gets the weight of a 1e-12 relative error.
    ws.push_back(1.0 / std::max(rel * rel, 1e-24));
  }
  if (xs.size() < 2) throw FitDegenerate("fewer than two usable grid points");
  const LineFit f = weighted_line_fit(Eigen::Map<Eigen::VectorXd>(xs.data(), xs.size()),
                                      Eigen::Map<Eigen::VectorXd>(ys.data(), ys.size()),
                                      Eigen::Map<Eigen::VectorXd>(ws.data(), ws.size()));
  FitResult r;
  r.exponent = f.slope;
  r.intercept = f.intercept;
  r.r_squared = std::clamp(f.r_squared, 0.0, 1.0);
  r.exponent_stderr = f.slope_stderr;
  r.grid = std::move(grid);
  return r;
}

FitResult survival_tail_exponent(const StableParams& params, double x0,
                                 std::span<const double> s_grid, const PathConfig& cfg,
                                 std::uint64_t n, const RngStream& rng) {
  require_stable(params);
  if (!(x0 < -1.0)) throw DomainError("tail exponent requires x0 < -1");
  if (s_grid.size() < 4) throw DomainError("s_grid needs at least 4 points");
  const std::vector<MCEstimate> surv =
      survival_curve(params, x0, s_grid, Barrier::Interval, cfg, n, rng);
  std::vector<GridPoint> grid;
  for (std::size_t k = 0; k < s_grid.size(); ++k)
    grid.push_back({s_grid[k], surv[k].value, surv[k].stderr, false});
  return fit_power_law(std::move(grid));
}

MCEstimate eq_survival(const StableParams& params, double x0, double q, const PathConfig& cfg,
                       std::uint64_t n, const RngStream& rng, ClockMode clock) {
  const double qs[] = {q};
  return eq_survival_curve(params, x0, qs, cfg, n, rng, clock).front();
}

std::vector<MCEstimate> eq_survival_curve(const StableParams& params, double x0,
                                          std::span<const double> q_grid, const PathConfig& cfg,
                                          std::uint64_t n, const RngStream& rng,
                                          ClockMode clock) {
  require_stable(params);
  if (!(x0 < -1.0)) throw DomainError("eq_survival requires x0 < -1");
  return clock_survival(params, x0, Barrier::Interval, q_grid, cfg, n, rng, clock);
}

std::vector<ProfilePoint> profile_ratio_check(const StableParams& params,
                                              std::span<const double> x_list, double q,
                                              const PathConfig& cfg, std::uint64_t n,
                                              const RngStream& rng, ClockMode clock) {
  if (x_list.size() < 2) throw DomainError("profile needs at least two points");
  std::vector<MCEstimate> est;
  for (std::size_t k = 0; k < x_list.size(); ++k)
    est.push_back(eq_survival(params, x_list[k], q, cfg, n, rng.child(k), clock));
  const MCEstimate& ref = est.front();
  if (!(ref.value > 0.0))
    throw DegenerateConditioning("reference survival estimate is zero", 0.0);
  const double d_ref = -1.0 - x_list[0];
  std::vector<ProfilePoint> out;
  for (std::size_t k = 0; k < x_list.size(); ++k) {
    ProfilePoint p;
    p.x = x_list[k];
    p.survival = est[k];
    p.predicted = std::pow((-1.0 - x_list[k]) / d_ref, params.alpha - 1.0);
    p.ratio = est[k].value / ref.value;
    if (k == 0) {
      p.stderr = 0.0;
    } else {
      const double a = est[k].stderr / std::max(est[k].value, 1e-300);
      const double b = ref.stderr / ref.value;
      p.stderr = p.ratio * std::sqrt(a * a + b * b);
    }
    out.push_back(p);
  }
  return out;
}

std::vector<BoundPoint> upper_bound_check(const StableParams& params, double x0,
                                          std::span<const double> q_grid, const PathConfig& cfg,
                                          std::uint64_t n, const RngStream& rng,
                                          ClockMode clock) {
  require_stable(params);
  if (!(x0 > 1.0)) throw DomainError("upper bound check requires x0 > 1");
  const std::vector<MCEstimate> lhs =
      clock_survival(params, x0, Barrier::BelowOne, q_grid, cfg, n, rng, clock);
  std::vector<BoundPoint> out;
  for (std::size_t k = 0; k < q_grid.size(); ++k) {
    BoundPoint b;
    b.q = q_grid[k];
    b.lhs = lhs[k].value;
    b.stderr = lhs[k].stderr;
    b.rhs = std::pow(q_grid[k], 1.0 / params.alpha) * (x0 - 1.0);
    b.holds = b.lhs <= b.rhs + 3.0 * b.stderr;
    out.push_back(b);
  }
  return out;
}

CancellationResult cancellation_rate(const StableParams& params, double x0, double t,
                                     std::span<const double> q_grid, const PathConfig& cfg,
                                     std::uint64_t n, const RngStream& rng, ClockMode clock) {
  require_stable(params);
  if (!(x0 < -1.0)) throw DomainError("cancellation rate requires x0 < -1");
  check_q_grid(q_grid);
  CancellationResult res;
  res.stratum = exp_conditioning_curve(params, x0, t, q_grid, EventSpec::position_in(1.0, kInf),
                                       cfg, n, rng, clock);
  std::vector<GridPoint> grid;
  for (std::size_t k = 0; k < q_grid.size(); ++k)
    grid.push_back({q_grid[k], res.stratum[k].estimate.value, res.stratum[k].estimate.stderr,
                    false});

  std::vector<std::size_t> order(q_grid.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return q_grid[a] > q_grid[b]; });
  res.monotone = true;
  for (std::size_t k = 1; k < order.size(); ++k) {
    const MCEstimate& hi = res.stratum[order[k - 1]].estimate;
    const MCEstimate& lo = res.stratum[order[k]].estimate;
    if (lo.value > hi.value + 3.0 * std::hypot(lo.stderr, hi.stderr)) res.monotone = false;
  }
  res.fit = fit_power_law(std::move(grid));
  return res;
}

std::vector<TauberianPoint> tauberian_ratios(const StableParams& params, double x0,
                                             std::span<const double> q_grid,
                                             const PathConfig& cfg, std::uint64_t n,
                                             const RngStream& rng) {
  require_stable(params);
  check_q_grid(q_grid);
  std::vector<double> qs(q_grid.begin(), q_grid.end());
  std::sort(qs.begin(), qs.end(), std::greater<>());
  std::vector<double> ss;
  for (double q : qs) ss.push_back(1.0 / q);
  const std::vector<MCEstimate> in_s =
      survival_curve(params, x0, ss, Barrier::Interval, cfg, n, rng.child(0));
  const std::vector<MCEstimate> in_q =
      eq_survival_curve(params, x0, qs, cfg, n, rng.child(1), ClockMode::Integrated);
  const double a = params.alpha;
  std::vector<TauberianPoint> out;
  for (std::size_t k = 0; k < qs.size(); ++k) {
    if (!(in_s[k].value > 0.0) || !(in_q[k].value > 0.0))
      throw FitDegenerate("zero survival estimate");
    const double lq = std::pow(qs[k], 1.0 / a - 1.0) * in_q[k].value;
    const double ls = std::pow(ss[k], 1.0 - 1.0 / a) * in_s[k].value;
    const double rel = std::hypot(in_q[k].stderr / in_q[k].value, in_s[k].stderr / in_s[k].value);
    out.push_back({qs[k], lq / ls, lq / ls * rel});
  }
  return out;
}

}  // namespace condstable
