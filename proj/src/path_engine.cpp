#include "condstable/path_engine.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "condstable/errors.hpp"
#include "condstable/parallel.hpp"

namespace condstable {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

void require_outside(double x0) {
  if (!(std::abs(x0) > 1.0)) throw DomainError("start point must lie outside [-1, 1]");
}

void require_start_alive(double x0, Barrier barrier) {
  require_outside(x0);
  if (barrier == Barrier::BelowOne && x0 < -1.0)
    throw DomainError("start point lies in the killing set (-inf, 1]");
  if (barrier == Barrier::AboveMinusOne && x0 > 1.0)
    throw DomainError("start point lies in the killing set [-1, inf)");
}

void require_obs(std::span<const double> obs, double horizon) {
  for (std::size_t k = 0; k < obs.size(); ++k) {
    if (!(obs[k] >= 0.0) || obs[k] > horizon)
      throw DomainError("observation times must lie in [0, horizon]");
    if (k > 0 && obs[k] < obs[k - 1]) throw DomainError("observation times must be sorted");
  }
}

void check_steps(std::uint64_t steps, const PathConfig& cfg) {
  if (steps > cfg.max_steps) {
    std::ostringstream msg;
    msg << "path exceeded the cap of " << cfg.max_steps << " simulation events";
    throw ResourceError(msg.str());
  }
}

// Rates of the jump decomposition at cutoff eps, from one pow call.
struct CutoffRates {
  double rate;      // mass of [eps, inf)
  double mean;      // int_eps^inf x Pi(dx), alpha > 1
  double variance;  // int_0^eps x^2 Pi(dx)
};

CutoffRates cutoff_rates(double c, double a, double eps) {
  const double rate = c * std::pow(eps, -a) / a;
  return {rate, rate * a * eps / (a - 1.0), rate * a * eps * eps / (2.0 - a)};
}

// P(Brownian bridge from y0 to y1 over a time with variance v touches level),
// both endpoints strictly on the same side.
double bridge_cross_prob(double y0, double y1, double level, double v) {
  const double d0 = y0 - level;
  const double d1 = y1 - level;
  if (d0 * d1 <= 0.0) return 1.0;
  if (v <= 0.0) return 0.0;
  return std::exp(-2.0 * d0 * d1 / v);
}

// Inverse Gaussian draw (Michael, Schucany and Haas) with the given mean and
// shape: the first passage time over distance d of Brownian motion drifting
// towards the level at speed mu has mean d / mu and shape d^2 / sigma^2.
double inverse_gaussian(double mean, double shape, RngStream& rng) {
  const double nu = rng.normal();
  const double y = nu * nu;
  const double my = mean * y;
  const double x = mean + mean * my / (2.0 * shape) -
                   mean / (2.0 * shape) * std::sqrt(4.0 * shape * my + my * my);
  return rng.uniform() <= mean / (mean + x) ? x : mean * mean / x;
}

// Extremum of a bridge from a to b with variance v towards `level`, conditioned
// not to reach it (level = -inf / +inf for the unconditioned extremum).
double bridge_extremum(double a, double b, double v, double level, bool below, RngStream& rng) {
  double u = rng.uniform();
  if (std::isfinite(level)) {
    const double p = bridge_cross_prob(a, b, level, v);
    u = p + (1.0 - p) * u;
  }
  const double root = std::sqrt((b - a) * (b - a) - 2.0 * v * std::log(u));
  return below ? 0.5 * (a + b - root) : 0.5 * (a + b + root);
}

// Subordinator walk towards `level`, tracked as the gap D = level - x so that
// eps refinements down to ~1e-20 stay meaningful near the level. Records X at
// observation times strictly before the passage and before stop_time.
constexpr double kGapCutoffRatio = 1000.0;

HittingOutcome subordinator_passage(const StableParams& p, double x0, double level,
                                    const PathConfig& cfg, RngStream& rng, double stop_time,
                                    std::span<const double> obs, std::vector<double>* at,
                                    std::size_t& next_obs, std::uint64_t& steps) {
  const double c = p.jump_coefficient();
  const double a = p.alpha;
  HittingOutcome out;
  double gap = level - x0;
  double t = 0.0;

  // Band k holds the jumps in [eps_k, eps_{k-1}), eps_{-1} = inf, each with its
  // own pending jump time; jumps below the finest cutoff act as drift.
  const int max_depth = cfg.max_eps_refinements;
  std::vector<double> cut{cfg.eps};
  std::vector<double> next;
  auto band_rate = [&](int k) {
    const double upper = k == 0 ? 0.0 : std::pow(cut[k - 1], -a);
    return c / a * (std::pow(cut[k], -a) - upper);
  };
  auto band_jump = [&](int k) {
    const double u = rng.uniform();
    if (k == 0) return cut[0] * std::pow(u, -1.0 / a);
    const double r = std::pow(cut[k] / cut[k - 1], a);
    return cut[k] * std::pow(1.0 - u * (1.0 - r), -1.0 / a);
  };
  next.push_back(rng.exponential() / band_rate(0));
  double drift = small_jump_mean(p, cut.back());

  auto commit = [&](double until, bool inclusive) {
    if (!at) return;
    while (next_obs < obs.size() && (obs[next_obs] < until || (inclusive && obs[next_obs] == until))) {
      (*at)[next_obs] = level - (gap - drift * (obs[next_obs] - t));
      ++next_obs;
    }
  };
  auto censor = [&]() {
    commit(stop_time, true);
    gap -= drift * (stop_time - t);
    out.censored = true;
    out.time = stop_time;
    out.pre_position = level - gap;
    return out;
  };

  for (;;) {
    check_steps(++steps, cfg);
    const auto first = std::min_element(next.begin(), next.end());
    const double t_jump = *first;
    const double t_cross = t + gap / drift;
    const bool coarse = gap < kGapCutoffRatio * cut.back();
    if (t_jump < t_cross && !(coarse && static_cast<int>(cut.size()) <= max_depth)) {
      if (t_jump >= stop_time) return censor();
      commit(t_jump, false);
      gap -= drift * (t_jump - t);
      t = t_jump;
      const int k = static_cast<int>(first - next.begin());
      const double jump = band_jump(k);
      next[k] = t + rng.exponential() / band_rate(k);
      if (jump >= gap) {
        out.hit = true;
        out.by_jump = true;
        out.time = t;
        out.pre_position = level - gap;
        out.overshoot = jump - gap;
        out.post_position = level + out.overshoot;
        return out;
      }
      gap -= jump;
    } else if (static_cast<int>(cut.size()) <= max_depth) {
      // Resolve the next decade of small jumps from the current state.
      cut.push_back(cut.back() * 0.1);
      const int k = static_cast<int>(cut.size()) - 1;
      next.push_back(t + rng.exponential() / band_rate(k));
      drift = small_jump_mean(p, cut.back());
      out.eps_refinements = std::max(out.eps_refinements, k);
      if (t_jump >= t_cross) out.drift_refined = true;
    } else {
      if (t_cross >= stop_time) return censor();
      commit(t_cross, false);
      out.hit = true;
      out.unresolved_drift = true;
      out.time = t_cross;
      out.pre_position = level;
      out.post_position = level;
      out.overshoot = 0.0;
      return out;
    }
  }
}

// Exact increments between observation times (no barrier in reach).
void free_increments(const StableParams& p, double x, double t, std::span<const double> obs,
                     std::size_t next_obs, std::vector<double>& at, RngStream& rng) {
  for (std::size_t k = next_obs; k < obs.size(); ++k) {
    if (obs[k] > t) {
      x += sample_increment(p, obs[k] - t, rng);
      t = obs[k];
    }
    at[k] = x;
  }
}

PathRecord simulate_subordinator(const StableParams& p, double x0, Barrier barrier,
                                 std::span<const double> obs, const PathConfig& cfg,
                                 RngStream& rng, bool track) {
  PathRecord rec;
  rec.at.assign(obs.size(), kNaN);
  std::size_t k = 0;
  if (x0 > 1.0) {
    free_increments(p, x0, 0.0, obs, 0, rec.at, rng);
    rec.outcome.censored = true;
    rec.outcome.time = cfg.horizon;
  } else {
    HittingOutcome pass =
        subordinator_passage(p, x0, -1.0, cfg, rng, cfg.horizon, obs, &rec.at, k, rec.steps);
    rec.outcome = pass;
    if (pass.hit) {
      rec.entry_time = pass.time;
      rec.jumped_over = pass.post_position > 1.0;
      if (rec.jumped_over && barrier != Barrier::AboveMinusOne) {
        // Above the interval for good.
        rec.outcome.hit = false;
        rec.outcome.censored = true;
        rec.outcome.time = cfg.horizon;
        free_increments(p, pass.post_position, pass.time, obs, k, rec.at, rng);
      }
    }
  }
  if (track) {
    rec.running_min.assign(obs.size(), kNaN);
    rec.running_max.assign(obs.size(), kNaN);
    for (std::size_t i = 0; i < obs.size(); ++i) {
      if (!rec.alive_at(i)) continue;
      rec.running_min[i] = x0;
      rec.running_max[i] = rec.at[i];
    }
  }
  return rec;
}

// Shared bookkeeping of the alpha > 1 schemes.
class SpWalker {
 public:
  SpWalker(const StableParams& p, double x0, Barrier barrier, std::span<const double> obs,
           const PathConfig& cfg, bool track)
      : p_(p), cfg_(cfg), barrier_(barrier), obs_(obs), track_(track), x_(x0) {
    side_ = x0 > 1.0 ? 1 : -1;
    rec_.at.assign(obs.size(), kNaN);
    if (track_) {
      rec_.running_min.assign(obs.size(), kNaN);
      rec_.running_max.assign(obs.size(), kNaN);
    }
    lo_ = hi_ = x0;
    record_until(0.0);
  }

  double distance() const { return side_ > 0 ? x_ - 1.0 : -1.0 - x_; }
  double next_obs() const { return k_ < obs_.size() ? obs_[k_] : kInf; }
  bool alive() const { return alive_; }
  double time() const { return t_; }
  int side() const { return side_; }
  double x() const { return x_; }
  std::uint64_t& steps() { return rec_.steps; }
  PathRecord& record() { return rec_; }

  void extend(double lo, double hi) {
    lo_ = std::min(lo_, lo);
    hi_ = std::max(hi_, hi);
  }

  // Move to (t, x) continuously; records any observation at exactly t.
  void advance(double t, double x) {
    t_ = t;
    x_ = x;
    extend(x, x);
    record_until(t);
  }

  void kill(double t, double pre, double post, bool by_jump) {
    alive_ = false;
    t_ = t;
    HittingOutcome& o = rec_.outcome;
    o.hit = true;
    o.time = t;
    o.pre_position = pre;
    o.post_position = post;
    o.by_jump = by_jump;
    o.overshoot = (side_ < 0 && by_jump) ? post + 1.0 : 0.0;
    if (side_ < 0 && !(rec_.entry_time < kInf)) rec_.entry_time = t;
  }

  // Grid value y reached at time t, given the previous value pre. Returns false
  // when the path was killed.
  bool land(double t, double pre, double y, bool by_jump) {
    if (side_ > 0) {
      if (y <= 1.0) {
        kill(t, pre, y, false);
        return false;
      }
    } else if (y >= -1.0) {
      rec_.entry_time = t;
      rec_.jumped_over = y > 1.0;
      if (y <= 1.0 || barrier_ == Barrier::AboveMinusOne) {
        kill(t, pre, y, by_jump);
        return false;
      }
      side_ = 1;
    }
    advance(t, y);
    return true;
  }

  PathRecord finish() {
    if (alive_) {
      rec_.outcome.censored = true;
      rec_.outcome.time = cfg_.horizon;
      rec_.outcome.pre_position = x_;
    }
    return std::move(rec_);
  }

 private:
  void record_until(double t) {
    while (k_ < obs_.size() && obs_[k_] <= t) {
      rec_.at[k_] = x_;
      if (track_) {
        rec_.running_min[k_] = lo_;
        rec_.running_max[k_] = hi_;
      }
      ++k_;
    }
  }

  const StableParams& p_;
  const PathConfig& cfg_;
  Barrier barrier_;
  std::span<const double> obs_;
  bool track_;
  PathRecord rec_;
  std::size_t k_ = 0;
  double t_ = 0.0;
  double x_;
  double lo_, hi_;
  int side_;
  bool alive_ = true;
};

PathRecord run_skeleton(const StableParams& p, double x0, Barrier barrier,
                        std::span<const double> obs, const PathConfig& cfg, RngStream& rng,
                        bool track) {
  SpWalker w(p, x0, barrier, obs, cfg, track);
  const double delta = 3.0 * std::pow(p.scale * cfg.dt, 1.0 / p.alpha);
  const int pieces = 1 << cfg.refine_levels;
  const double horizon = cfg.horizon;
  while (w.alive() && w.time() < horizon) {
    check_steps(++w.steps(), cfg);
    const double t0 = w.time();
    const double t1 = std::min({t0 + cfg.dt, w.next_obs() > t0 ? w.next_obs() : kInf, horizon});
    const double step = t1 - t0;
    if (w.distance() < delta && pieces > 1) {
      ++w.record().refinements;
      const double sub = step / pieces;
      for (int i = 1; i <= pieces && w.alive(); ++i) {
        const double pre = w.x();
        const double y = pre + sample_increment(p, sub, rng);
        w.land(i == pieces ? t1 : t0 + i * sub, pre, y, true);
      }
    } else {
      const double pre = w.x();
      w.land(t1, pre, pre + sample_increment(p, step, rng), true);
    }
  }
  return w.finish();
}

PathRecord run_jump_adapted(const StableParams& p, double x0, Barrier barrier,
                            std::span<const double> obs, const PathConfig& cfg, RngStream& rng,
                            bool track) {
  SpWalker w(p, x0, barrier, obs, cfg, track);
  const double c = p.jump_coefficient();
  const double a = p.alpha;
  const double horizon = cfg.horizon;
  while (w.alive() && w.time() < horizon) {
    check_steps(++w.steps(), cfg);
    const double eps = std::clamp(cfg.eps_rel * w.distance(), cfg.eps_min, cfg.eps_max);
    const CutoffRates r = cutoff_rates(c, a, eps);
    const double t0 = w.time();
    const double t_jump = t0 + rng.exponential() / r.rate;
    const double t_stop = std::min(w.next_obs() > t0 ? w.next_obs() : kInf, horizon);
    const bool jump = t_jump < t_stop;
    const double t1 = jump ? t_jump : t_stop;
    const double tau = t1 - t0;
    const double xa = w.x();
    const double level = w.side() > 0 ? 1.0 : -1.0;
    const double gap = std::abs(xa - level);
    // The Brownian part drifts down: towards the level above the interval,
    // away from it below, where it reaches the level only with probability
    // exp(-2 mu d / sigma^2).
    double t_hit = kInf;
    if (w.side() > 0 || rng.uniform() < std::exp(-2.0 * r.mean * gap / r.variance))
      t_hit = inverse_gaussian(gap / r.mean, gap * gap / r.variance, rng);
    if (t_hit < tau) {
      w.kill(t0 + t_hit, level, level, false);
      break;
    }
    const double v = r.variance * tau;
    double xb;
    do {
      xb = xa - r.mean * tau + std::sqrt(v) * rng.normal();
    } while (rng.uniform() < bridge_cross_prob(xa, xb, level, v));
    if (track) {
      const bool below = w.side() > 0;
      const double toward = bridge_extremum(xa, xb, v, level, below, rng);
      const double away = bridge_extremum(xa, xb, v, below ? kInf : -kInf, !below, rng);
      w.extend(std::min(toward, away), std::max(toward, away));
    }
    w.advance(t1, xb);
    if (jump) {
      const double y = xb + sample_large_jump(p, eps, rng);
      w.land(t1, xb, y, true);
    }
  }
  return w.finish();
}

}  // namespace

void PathConfig::validate() const {
  if (!(dt > 0.0)) throw DomainError("dt must be > 0");
  if (!(horizon > 0.0)) throw DomainError("horizon must be > 0");
  if (dt > horizon) throw DomainError("dt must not exceed the horizon");
  if (!(eps > 0.0 && eps < 1.0)) throw DomainError("eps must lie in (0, 1)");
  if (refine_levels < 0 || refine_levels > 20)
    throw DomainError("refine_levels must lie in [0, 20]");
  if (max_eps_refinements < 0) throw DomainError("max_eps_refinements must be >= 0");
  if (!(eps_rel > 0.0) || !(eps_min > 0.0) || !(eps_max >= eps_min))
    throw DomainError("jump-adapted cutoffs must satisfy 0 < eps_min <= eps_max, eps_rel > 0");
  if (max_steps == 0) throw DomainError("max_steps must be >= 1");
}

Barrier conditioning_barrier(const StableParams& params, double x0) {
  require_outside(x0);
  if (params.is_subordinator()) return Barrier::Interval;
  return x0 > 1.0 ? Barrier::BelowOne : Barrier::AboveMinusOne;
}

PathSample simulate_skeleton(const StableParams& params, double x0, const PathConfig& cfg,
                             RngStream& rng) {
  cfg.validate();
  if (params.is_subordinator())
    throw DomainError("simulate_skeleton requires the spectrally positive regime");
  const double ratio = cfg.horizon / cfg.dt;
  if (ratio > static_cast<double>(cfg.max_steps))
    throw ResourceError("horizon / dt exceeds the configured step cap");
  const auto steps = static_cast<std::size_t>(std::llround(ratio));
  PathSample out;
  out.times.resize(steps + 1);
  out.values.resize(steps + 1);
  out.times[0] = 0.0;
  out.values[0] = x0;
  for (std::size_t i = 1; i <= steps; ++i) {
    out.times[i] = static_cast<double>(i) * cfg.dt;
    out.values[i] = out.values[i - 1] + sample_increment(params, cfg.dt, rng);
  }
  return out;
}

HittingOutcome first_passage_subordinator(const StableParams& params, double x0, double level,
                                          const PathConfig& cfg, RngStream& rng) {
  cfg.validate();
  if (!params.is_subordinator())
    throw DomainError("first_passage_subordinator requires alpha < 1");
  if (!(x0 < level)) throw DomainError("first passage requires x0 < level");
  std::size_t k = 0;
  std::uint64_t steps = 0;
  return subordinator_passage(params, x0, level, cfg, rng, kInf, {}, nullptr, k, steps);
}

PathRecord simulate_killed(const StableParams& params, double x0, Barrier barrier,
                           std::span<const double> obs_times, const PathConfig& cfg,
                           RngStream& rng, bool track_extrema) {
  cfg.validate();
  require_start_alive(x0, barrier);
  require_obs(obs_times, cfg.horizon);
  if (params.is_subordinator())
    return simulate_subordinator(params, x0, barrier, obs_times, cfg, rng, track_extrema);
  if (cfg.scheme == Scheme::Skeleton) {
    if (cfg.horizon / cfg.dt > static_cast<double>(cfg.max_steps))
      throw ResourceError("horizon / dt exceeds the configured step cap");
    return run_skeleton(params, x0, barrier, obs_times, cfg, rng, track_extrema);
  }
  return run_jump_adapted(params, x0, barrier, obs_times, cfg, rng, track_extrema);
}

HittingOutcome hitting_time_interval(const StableParams& params, double x0, Barrier barrier,
                                     const PathConfig& cfg, RngStream& rng) {
  return simulate_killed(params, x0, barrier, {}, cfg, rng).outcome;
}

std::vector<MCEstimate> survival_curve(const StableParams& params, double x0,
                                       std::span<const double> times, Barrier barrier,
                                       const PathConfig& cfg, std::uint64_t n,
                                       const RngStream& rng) {
  if (n == 0) throw DomainError("replicate count n must be >= 1");
  if (times.empty()) throw DomainError("survival_curve needs at least one time");
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (!(times[k] > 0.0)) throw DomainError("survival times must be > 0");
    if (k > 0 && !(times[k] > times[k - 1])) throw DomainError("survival times must increase");
  }
  PathConfig run_cfg = cfg;
  run_cfg.horizon = times.back();
  run_cfg.dt = std::min(cfg.dt, run_cfg.horizon);
  run_cfg.validate();
  require_start_alive(x0, barrier);

  struct Acc {
    std::vector<Moments> m;
    void merge(const Acc& o) {
      for (std::size_t i = 0; i < m.size(); ++i) m[i].merge(o.m[i]);
    }
  };
  Acc proto{std::vector<Moments>(times.size())};
  const Acc acc = run_replicates(n, proto, [&](std::size_t i, Acc& a) {
    RngStream r = rng.child(i);
    const PathRecord rec = simulate_killed(params, x0, barrier, {}, run_cfg, r);
    for (std::size_t k = 0; k < times.size(); ++k)
      a.m[k].add(rec.outcome.hit && rec.outcome.time <= times[k] ? 0.0 : 1.0);
  });
  std::vector<MCEstimate> out;
  for (const Moments& m : acc.m)
    out.push_back({m.mean, m.stderr(), n, rng.seed(), rng.stream_index()});
  return out;
}

MCEstimate survival_probability(const StableParams& params, double x0, double t, Barrier barrier,
                                const PathConfig& cfg, std::uint64_t n, const RngStream& rng) {
  const double times[] = {t};
  return survival_curve(params, x0, times, barrier, cfg, n, rng).front();
}

CoupledSkeleton simulate_coupled_skeleton(const StableParams& p, double x0, Barrier barrier,
                                          std::span<const double> obs, const PathConfig& cfg,
                                          RngStream& rng) {
  cfg.validate();
  if (p.is_subordinator()) throw DomainError("coupled skeletons require alpha > 1");
  require_start_alive(x0, barrier);
  require_obs(obs, cfg.horizon);
  constexpr int kL = CoupledSkeleton::kLevels;
  const std::int64_t refine = std::int64_t{1} << cfg.refine_levels;
  const double quarter = cfg.dt / 4.0;
  // Positions are counted in units of quarter / refine.
  const double unit = quarter / static_cast<double>(refine);
  auto to_units = [&](double t) -> std::int64_t {
    const double u = t / cfg.dt;
    const auto m = std::llround(u);
    if (std::abs(u - static_cast<double>(m)) > 1e-9 * std::max(1.0, u))
      throw DomainError("coupled skeleton times must be multiples of dt");
    return m * 4 * refine;
  };
  const std::int64_t end = to_units(cfg.horizon);
  std::vector<std::int64_t> obs_u;
  for (double t : obs) obs_u.push_back(to_units(t));

  struct Level {
    std::int64_t span;  // quarters per unrefined step
    double delta;
    bool alive = true;
    int side;
    std::int64_t refined_until = -1;  // unit position where refinement ends
  };
  std::array<Level, kL> lv;
  for (int l = 0; l < kL; ++l) {
    lv[l].span = std::int64_t{4} >> l;
    lv[l].delta = 3.0 * std::pow(p.scale * cfg.dt / static_cast<double>(1 << l), 1.0 / p.alpha);
    lv[l].side = x0 > 1.0 ? 1 : -1;
  }

  CoupledSkeleton out;
  out.at.assign(obs.size(), kNaN);
  out.kill_time.fill(kInf);
  double x = x0;
  std::size_t k = 0;
  while (k < obs.size() && obs_u[k] == 0) out.at[k++] = x;
  std::uint64_t steps = 0;

  auto distance = [&](int side) { return side > 0 ? x - 1.0 : -1.0 - x; };
  auto kill_check = [&](Level& L, int l, std::int64_t pos) {
    const double t = static_cast<double>(pos) * unit;
    if (L.side > 0) {
      if (x <= 1.0) {
        L.alive = false;
        out.kill_time[l] = t;
      }
    } else if (x >= -1.0) {
      if (x <= 1.0 || barrier == Barrier::AboveMinusOne) {
        L.alive = false;
        out.kill_time[l] = t;
      } else {
        L.side = 1;
      }
    }
  };

  for (std::int64_t pos = 0; pos < end;) {
    std::int64_t grain = refine;  // sub-step of this quarter in units
    for (int l = 0; l < kL; ++l) {
      Level& L = lv[l];
      if (!L.alive) continue;
      const std::int64_t step_units = L.span * refine;
      if (pos % step_units == 0) {
        L.refined_until = (distance(L.side) < L.delta && refine > 1) ? pos + step_units : -1;
      }
      if (pos < L.refined_until) grain = std::min(grain, L.span);
    }
    const std::int64_t quarter_end = pos + refine;
    while (pos < quarter_end) {
      check_steps(++steps, cfg);
      x += sample_increment(p, static_cast<double>(grain) * unit, rng);
      pos += grain;
      for (int l = 0; l < kL; ++l) {
        Level& L = lv[l];
        if (!L.alive) continue;
        const std::int64_t spacing = pos <= L.refined_until ? L.span : L.span * refine;
        if (pos % spacing == 0) kill_check(L, l, pos);
      }
    }
    while (k < obs.size() && obs_u[k] == pos) out.at[k++] = x;
    if (std::none_of(lv.begin(), lv.end(), [](const Level& L) { return L.alive; })) break;
  }
  return out;
}

}  // namespace condstable
