#include "condstable/conditioned.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "condstable/errors.hpp"
#include "condstable/parallel.hpp"
#include "condstable/specfun.hpp"

namespace condstable {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

MCEstimate to_estimate(const Moments& m, std::uint64_t n, const RngStream& rng) {
  return {m.mean, m.stderr(), n, rng.seed(), rng.stream_index()};
}

void require_n(std::uint64_t n) {
  if (n == 0) throw DomainError("replicate count n must be >= 1");
}

void require_time(double t) {
  if (!(t > 0.0) || !std::isfinite(t)) throw DomainError("time t must be finite and > 0");
}

PathConfig with_horizon(const PathConfig& cfg, double horizon) {
  PathConfig c = cfg;
  c.horizon = horizon;
  c.dt = std::min(cfg.dt, horizon);
  c.validate();
  return c;
}

struct DiagAcc {
  Moments steps, refinements, drift, unresolved;
  void add(const PathRecord& rec) {
    steps.add(static_cast<double>(rec.steps));
    refinements.add(static_cast<double>(rec.refinements));
    drift.add(rec.outcome.drift_refined ? 1.0 : 0.0);
    unresolved.add(rec.outcome.unresolved_drift ? 1.0 : 0.0);
  }
  void merge(const DiagAcc& o) {
    steps.merge(o.steps);
    refinements.merge(o.refinements);
    drift.merge(o.drift);
    unresolved.merge(o.unresolved);
  }
  void write(Diagnostics* d) const {
    if (!d) return;
    d->steps_per_path = steps.mean;
    d->refinements_per_path = refinements.mean;
    d->drift_crossing_fraction = drift.mean;
    d->unresolved_fraction = unresolved.mean;
  }
};

std::size_t bin_index(const Eigen::VectorXd& edges, double x) {
  // Bins are [e_j, e_{j+1}); returns edges.size() - 1 when outside.
  const double* first = edges.data();
  const double* last = first + edges.size();
  const double* it = std::upper_bound(first, last, x);
  if (it == first || it == last) {
    if (it == last && x == edges[edges.size() - 1]) return edges.size() - 2;
    return static_cast<std::size_t>(edges.size() - 1);
  }
  return static_cast<std::size_t>(it - first - 1);
}

void require_edges(const Eigen::VectorXd& edges) {
  if (edges.size() < 2) throw DomainError("need at least two bin edges");
  for (Eigen::Index i = 1; i < edges.size(); ++i)
    if (!(edges[i] > edges[i - 1])) throw DomainError("bin edges must increase strictly");
}

}  // namespace

EventSpec EventSpec::position_in(double a, double b) {
  if (!(a <= b)) throw DomainError("event interval needs a <= b");
  return {Kind::PositionIn, a, b};
}

EventSpec EventSpec::inf_above(double a) { return {Kind::InfAbove, a, kInf}; }

EventSpec EventSpec::sup_below(double b) { return {Kind::SupBelow, -kInf, b}; }

bool EventSpec::holds(double x_t, double running_min, double running_max) const {
  switch (kind) {
    case Kind::Always:
      return true;
    case Kind::PositionIn:
      return x_t >= a && x_t <= b;
    case Kind::InfAbove:
      return running_min > a;
    case Kind::SupBelow:
      return running_max < b;
  }
  return false;
}

double invariant_weight(const StableParams& params, double x) {
  if (params.is_subordinator()) return h_subordinator(params.alpha, x);
  return h_updown(params.alpha, x);
}

std::vector<MCEstimate> weighted_expectation_curve(const StableParams& params, double x0,
                                                   std::span<const double> times,
                                                   const EventSpec& event, const PathConfig& cfg,
                                                   std::uint64_t n, const RngStream& rng,
                                                   Diagnostics* diag) {
  require_n(n);
  if (times.empty()) throw DomainError("need at least one time");
  for (double t : times) require_time(t);
  const Barrier barrier = conditioning_barrier(params, x0);
  const PathConfig run_cfg = with_horizon(cfg, times.back());
  const double h0 = invariant_weight(params, x0);
  const bool track = event.needs_extrema();

  struct Acc {
    std::vector<Moments> m;
    DiagAcc d;
    void merge(const Acc& o) {
      for (std::size_t i = 0; i < m.size(); ++i) m[i].merge(o.m[i]);
      d.merge(o.d);
    }
  };
  const Acc acc = run_replicates(n, Acc{std::vector<Moments>(times.size()), {}},
                                 [&](std::size_t i, Acc& a) {
                                   RngStream r = rng.child(i);
                                   const PathRecord rec =
                                       simulate_killed(params, x0, barrier, times, run_cfg, r, track);
                                   for (std::size_t k = 0; k < times.size(); ++k) {
                                     double w = 0.0;
                                     if (rec.alive_at(k) &&
                                         event.holds(rec.at[k], track ? rec.running_min[k] : 0.0,
                                                     track ? rec.running_max[k] : 0.0))
                                       w = invariant_weight(params, rec.at[k]) / h0;
                                     a.m[k].add(w);
                                   }
                                   a.d.add(rec);
                                 });
  acc.d.write(diag);
  std::vector<MCEstimate> out;
  for (const Moments& m : acc.m) out.push_back(to_estimate(m, n, rng));
  return out;
}

MCEstimate weighted_expectation(const StableParams& params, double x0, double t,
                                const EventSpec& event, const PathConfig& cfg, std::uint64_t n,
                                const RngStream& rng, Diagnostics* diag) {
  const double times[] = {t};
  return weighted_expectation_curve(params, x0, times, event, cfg, n, rng, diag).front();
}

KernelEstimate transition_kernel_estimate(const StableParams& params, double x0, double t,
                                          const Eigen::VectorXd& bin_edges,
                                          const PathConfig& cfg, std::uint64_t n,
                                          const RngStream& rng) {
  require_n(n);
  require_time(t);
  require_edges(bin_edges);
  const Barrier barrier = conditioning_barrier(params, x0);
  const PathConfig run_cfg = with_horizon(cfg, t);
  const double h0 = invariant_weight(params, x0);
  const Eigen::Index bins = bin_edges.size() - 1;
  const double times[] = {t};

  struct Acc {
    Eigen::VectorXd sum, sumsq, wx;
    Moments opposite;
    void merge(const Acc& o) {
      sum += o.sum;
      sumsq += o.sumsq;
      wx += o.wx;
      opposite.merge(o.opposite);
    }
  };
  const Eigen::VectorXd zero = Eigen::VectorXd::Zero(bins);
  const Acc acc = run_replicates(n, Acc{zero, zero, zero, {}}, [&](std::size_t i, Acc& a) {
    RngStream r = rng.child(i);
    const PathRecord rec = simulate_killed(params, x0, barrier, times, run_cfg, r);
    double opposite = 0.0;
    if (rec.alive_at(0)) {
      const double x = rec.at[0];
      const double w = invariant_weight(params, x) / h0;
      if ((x > 0.0) != (x0 > 0.0)) opposite = w;
      const std::size_t j = bin_index(bin_edges, x);
      if (j < static_cast<std::size_t>(bins)) {
        a.sum[j] += w;
        a.sumsq[j] += w * w;
        a.wx[j] += w * x;
      }
    }
    a.opposite.add(opposite);
  });

  KernelEstimate k;
  const double nn = static_cast<double>(n);
  k.bin_edges = bin_edges;
  k.masses = acc.sum / nn;
  const Eigen::ArrayXd var =
      ((acc.sumsq.array() / nn - k.masses.array().square()) * (nn / std::max(nn - 1.0, 1.0)))
          .max(0.0);
  k.stderrs = (var / nn).sqrt().matrix();
  k.bin_means.resize(bins);
  for (Eigen::Index j = 0; j < bins; ++j)
    k.bin_means[j] = acc.sum[j] > 0.0 ? acc.wx[j] / acc.sum[j]
                                      : 0.5 * (bin_edges[j] + bin_edges[j + 1]);
  k.total_mass = k.masses.sum();
  k.opposite_mass = acc.opposite.mean;
  k.opposite_stderr = acc.opposite.stderr();
  k.n = n;
  return k;
}

ChapmanKolmogorovResult chapman_kolmogorov_check(const StableParams& params, double x0, double s,
                                                 double t, const Eigen::VectorXd& bin_edges,
                                                 const PathConfig& cfg, std::uint64_t n,
                                                 const RngStream& rng) {
  require_time(s);
  require_time(t);
  require_edges(bin_edges);
  if (!bin_edges.allFinite()) throw DomainError("Chapman-Kolmogorov bin edges must be finite");
  const bool above = x0 > 1.0;
  const Eigen::Index nb = bin_edges.size() - 1;

  // Evaluation bins plus the unbounded outer bin away from the interval.
  Eigen::VectorXd eval(nb + 2);
  if (above) {
    eval << bin_edges, kInf;
  } else {
    eval << -kInf, bin_edges;
  }
  // Intermediate bins: evaluation bins extended geometrically to 100 times
  // the outer edge, then an unbounded terminal bin.
  std::vector<double> mid(bin_edges.data(), bin_edges.data() + bin_edges.size());
  if (above) {
    const double outer = bin_edges[nb];
    for (double e = outer * 1.5; e < 100.0 * outer; e *= 1.5) mid.push_back(e);
    mid.push_back(100.0 * outer);
    mid.push_back(kInf);
  } else {
    const double outer = bin_edges[0];
    std::vector<double> ext;
    for (double e = outer * 1.5; e > 100.0 * outer; e *= 1.5) ext.push_back(e);
    ext.push_back(100.0 * outer);
    ext.push_back(-kInf);
    std::reverse(ext.begin(), ext.end());
    mid.insert(mid.begin(), ext.begin(), ext.end());
  }
  const Eigen::VectorXd inter = Eigen::Map<const Eigen::VectorXd>(mid.data(), mid.size());
  const Eigen::Index ni = inter.size() - 1;
  const Eigen::Index terminal = above ? ni - 1 : 0;

  ChapmanKolmogorovResult res;
  const KernelEstimate first = transition_kernel_estimate(params, x0, t, inter, cfg, n, rng.child(0));
  res.direct = transition_kernel_estimate(params, x0, s + t, eval, cfg, n, rng.child(1));

  // Kernels from each intermediate representative, binned on eval.
  std::vector<KernelEstimate> from(ni);
  Eigen::VectorXd z(ni);
  for (Eigen::Index j = 0; j < ni; ++j) {
    z[j] = j == terminal ? (above ? inter[j] : inter[j + 1]) : 0.5 * (inter[j] + inter[j + 1]);
    if (first.masses[j] > 0.0 || j == terminal)
      from[j] = transition_kernel_estimate(params, z[j], s, eval, cfg, n,
                                           rng.child(2 + static_cast<std::uint64_t>(j)));
  }

  const Eigen::Index ne = eval.size() - 1;
  res.composed = Eigen::VectorXd::Zero(ne);
  Eigen::VectorXd var = res.direct.stderrs.array().square().matrix();
  for (Eigen::Index j = 0; j < ni; ++j) {
    if (from[j].masses.size() == 0) continue;
    const double mu = first.masses[j];
    res.composed += mu * from[j].masses;
    var += (from[j].masses.array().square() * first.stderrs[j] * first.stderrs[j] +
            mu * mu * from[j].stderrs.array().square())
               .matrix();
  }
  res.discrepancy = 0.5 * (res.direct.masses - res.composed).cwiseAbs().sum();
  const double two_over_pi = 2.0 / std::numbers::pi;
  const Eigen::ArrayXd sigma = var.array().sqrt();
  res.mc_bound = 0.5 * (sigma.sum() * std::sqrt(two_over_pi) +
                        3.0 * std::sqrt((sigma.square() * (1.0 - two_over_pi)).sum()));

  // Binning error: Taylor terms of z -> P_s(z, .) around each representative
  // from divided differences of neighbouring kernels; for the terminal bin the
  // mass that its edge kernel leaks back into the bounded bins.
  double binning = 0.0;
  const Eigen::Index outer_eval = above ? ne - 1 : 0;
  for (Eigen::Index j = 0; j < ni; ++j) {
    const double mu = first.masses[j];
    if (mu <= 0.0 || from[j].masses.size() == 0) continue;
    if (j == terminal) {
      binning += mu * (from[j].masses.sum() - from[j].masses[outer_eval]);
      continue;
    }
    const Eigen::Index lo = std::max<Eigen::Index>(j - 1, 0);
    const Eigen::Index hi = std::min<Eigen::Index>(j + 1, ni - 1);
    auto usable = [&](Eigen::Index i) { return i != terminal && from[i].masses.size() != 0; };
    const double width = inter[j + 1] - inter[j];
    Eigen::VectorXd term = Eigen::VectorXd::Zero(ne);
    if (usable(lo) && usable(hi) && lo != hi) {
      const Eigen::VectorXd d1 = (from[hi].masses - from[lo].masses) / (z[hi] - z[lo]);
      term += (first.bin_means[j] - z[j]) * d1;
      if (lo != j && hi != j) {
        const Eigen::VectorXd right = (from[hi].masses - from[j].masses) / (z[hi] - z[j]);
        const Eigen::VectorXd left = (from[j].masses - from[lo].masses) / (z[j] - z[lo]);
        const Eigen::VectorXd d2 = 2.0 * (right - left) / (z[hi] - z[lo]);
        term += width * width / 24.0 * d2;
      }
    }
    binning += mu * 0.5 * term.cwiseAbs().sum();
  }
  res.binning_bound = binning;
  res.bound = res.mc_bound + res.binning_bound;
  return res;
}

std::vector<ConditionalEstimate> exp_conditioning_curve(
    const StableParams& params, double x0, double t, std::span<const double> q_grid,
    const EventSpec& event, const PathConfig& cfg, std::uint64_t n, const RngStream& rng,
    ClockMode clock) {
  require_n(n);
  require_time(t);
  if (q_grid.empty()) throw DomainError("need at least one q");
  double q_min = kInf;
  for (double q : q_grid) {
    if (!(q > 0.0) || !std::isfinite(q)) throw DomainError("q must be finite and > 0");
    q_min = std::min(q_min, q);
  }
  if (!(std::abs(x0) > 1.0)) throw DomainError("start point must lie outside [-1, 1]");
  const bool track = event.needs_extrema();
  const double obs[] = {t};
  const std::size_t nq = q_grid.size();
  const PathConfig integrated_cfg = with_horizon(cfg, std::max(t, kClockHorizon / q_min));

  struct Acc {
    std::vector<CoMoments> m;
    void merge(const Acc& o) {
      for (std::size_t i = 0; i < m.size(); ++i) m[i].merge(o.m[i]);
    }
  };
  const Acc acc = run_replicates(n, Acc{std::vector<CoMoments>(nq)}, [&](std::size_t i, Acc& a) {
    RngStream r = rng.child(i);
    if (clock == ClockMode::Sampled) {
      const double e1 = r.exponential();
      const PathConfig run_cfg = with_horizon(cfg, std::max(t, e1 / q_min));
      const PathRecord rec = simulate_killed(params, x0, Barrier::Interval, obs, run_cfg, r, track);
      const bool in_event =
          rec.alive_at(0) && event.holds(rec.at[0], track ? rec.running_min[0] : 0.0,
                                         track ? rec.running_max[0] : 0.0);
      for (std::size_t k = 0; k < nq; ++k) {
        const double e = e1 / q_grid[k];
        const bool accepted = !(rec.outcome.hit && rec.outcome.time <= e);
        a.m[k].add(accepted && e > t && in_event ? 1.0 : 0.0, accepted ? 1.0 : 0.0);
      }
    } else {
      const PathRecord rec =
          simulate_killed(params, x0, Barrier::Interval, obs, integrated_cfg, r, track);
      const double T = rec.outcome.hit ? rec.outcome.time : kInf;
      const bool in_event =
          rec.alive_at(0) && event.holds(rec.at[0], track ? rec.running_min[0] : 0.0,
                                         track ? rec.running_max[0] : 0.0);
      for (std::size_t k = 0; k < nq; ++k) {
        const double q = q_grid[k];
        const double tail = std::exp(-q * T);
        a.m[k].add(in_event ? std::exp(-q * t) - tail : 0.0, -std::expm1(-q * T));
      }
    }
  });

  std::vector<ConditionalEstimate> out;
  for (const CoMoments& m : acc.m) {
    if (m.mean_y <= 0.0)
      throw DegenerateConditioning("no replicate satisfied e_q < T_[-1,1]", 0.0);
    const auto [ratio, se] = m.ratio();
    const double acc_se = std::sqrt(m.m2y / std::max(m.count - 1.0, 1.0) / m.count);
    out.push_back({{ratio, se, n, rng.seed(), rng.stream_index()},
                   {m.mean_y, acc_se, n, rng.seed(), rng.stream_index()}});
  }
  return out;
}

ConditionalEstimate exp_conditioning_estimate(const StableParams& params, double x0, double t,
                                              double q, const EventSpec& event,
                                              const PathConfig& cfg, std::uint64_t n,
                                              const RngStream& rng, ClockMode clock) {
  const double qs[] = {q};
  return exp_conditioning_curve(params, x0, t, qs, event, cfg, n, rng, clock).front();
}

ConditionalEstimate time_conditioning_estimate(const StableParams& params, double x0, double s,
                                               double t, const EventSpec& event,
                                               const PathConfig& cfg, std::uint64_t n,
                                               const RngStream& rng) {
  require_n(n);
  require_time(t);
  if (!params.is_subordinator()) throw DomainError("time conditioning requires alpha < 1");
  if (!(s > t)) throw DomainError("time conditioning requires s > t");
  if (!(std::abs(x0) > 1.0)) throw DomainError("start point must lie outside [-1, 1]");
  const PathConfig run_cfg = with_horizon(cfg, s);
  const bool track = event.needs_extrema();
  const double obs[] = {t};
  struct Acc {
    CoMoments m;
    void merge(const Acc& o) { m.merge(o.m); }
  };
  const Acc acc = run_replicates(n, Acc{}, [&](std::size_t i, Acc& a) {
    RngStream r = rng.child(i);
    const PathRecord rec = simulate_killed(params, x0, Barrier::Interval, obs, run_cfg, r, track);
    const bool survives = !(rec.outcome.hit && rec.outcome.time <= s);
    const bool in_event =
        rec.alive_at(0) && event.holds(rec.at[0], track ? rec.running_min[0] : 0.0,
                                       track ? rec.running_max[0] : 0.0);
    a.m.add(survives && in_event ? 1.0 : 0.0, survives ? 1.0 : 0.0);
  });
  if (acc.m.mean_y <= 0.0)
    throw DegenerateConditioning("no replicate survived to time s", 0.0);
  const auto [ratio, se] = acc.m.ratio();
  const double acc_se = std::sqrt(acc.m.m2y / std::max(acc.m.count - 1.0, 1.0) / acc.m.count);
  return {{ratio, se, n, rng.seed(), rng.stream_index()},
          {acc.m.mean_y, acc_se, n, rng.seed(), rng.stream_index()}};
}

PathSample sample_conditioned_path(const StableParams& params, double x0, double t,
                                   const PathConfig& cfg, std::uint64_t m, const RngStream& rng,
                                   std::uint64_t grid_points, int max_regenerations) {
  require_time(t);
  if (m == 0) throw DomainError("pool size m must be >= 1");
  if (grid_points == 0) throw DomainError("grid_points must be >= 1");
  const Barrier barrier = conditioning_barrier(params, x0);
  const PathConfig run_cfg = with_horizon(cfg, t);
  std::vector<double> grid(grid_points + 1);
  for (std::uint64_t k = 0; k <= grid_points; ++k)
    grid[k] = t * static_cast<double>(k) / static_cast<double>(grid_points);
  grid.back() = t;

  RngStream select = rng.child(~std::uint64_t{0});
  for (int round = 0; round <= max_regenerations; ++round) {
    std::vector<PathRecord> pool;
    std::vector<double> cumulative;
    double total = 0.0;
    for (std::uint64_t i = 0; i < m; ++i) {
      RngStream r = rng.child(static_cast<std::uint64_t>(round) * m + i);
      pool.push_back(simulate_killed(params, x0, barrier, grid, run_cfg, r));
      const PathRecord& rec = pool.back();
      if (rec.alive_at(grid_points)) total += invariant_weight(params, rec.at[grid_points]);
      cumulative.push_back(total);
    }
    if (total <= 0.0) continue;
    const double u = select.uniform() * total;
    const auto pick = static_cast<std::size_t>(
        std::upper_bound(cumulative.begin(), cumulative.end(), u) - cumulative.begin());
    const PathRecord& rec = pool[std::min(pick, pool.size() - 1)];
    return {grid, rec.at};
  }
  throw ResourceError("conditioned path pool exhausted: every path was killed");
}

std::vector<double> conditioned_endpoints(const StableParams& params, double x0, double t,
                                          const PathConfig& cfg, std::uint64_t m,
                                          std::uint64_t count, const RngStream& rng) {
  require_n(count);
  struct Acc {
    std::vector<double> v;
    void merge(const Acc& o) { v.insert(v.end(), o.v.begin(), o.v.end()); }
  };
  const Acc acc = run_replicates(count, Acc{}, [&](std::size_t i, Acc& a) {
    a.v.push_back(sample_conditioned_path(params, x0, t, cfg, m, rng.child(i), 1).values.back());
  });
  return acc.v;
}

DiscretisationStudy discretisation_study(const StableParams& params, double x0,
                                         std::span<const double> times, const PathConfig& cfg,
                                         std::uint64_t n, const RngStream& rng) {
  require_n(n);
  if (times.empty()) throw DomainError("need at least one time");
  for (double t : times) require_time(t);
  const Barrier barrier = conditioning_barrier(params, x0);
  PathConfig run_cfg = cfg;
  run_cfg.horizon = times.back();
  run_cfg.validate();
  const double h0 = invariant_weight(params, x0);
  constexpr int kL = CoupledSkeleton::kLevels;
  const std::size_t nt = times.size();

  struct Acc {
    std::vector<Moments> m;  // nt * (kL + 2)
    void merge(const Acc& o) {
      for (std::size_t i = 0; i < m.size(); ++i) m[i].merge(o.m[i]);
    }
  };
  const std::size_t stride = kL + 2;
  const Acc acc = run_replicates(n, Acc{std::vector<Moments>(nt * stride)}, [&](std::size_t i,
                                                                                 Acc& a) {
    RngStream r = rng.child(i);
    const CoupledSkeleton cs = simulate_coupled_skeleton(params, x0, barrier, times, run_cfg, r);
    for (std::size_t k = 0; k < nt; ++k) {
      std::array<double, kL> w{};
      for (int l = 0; l < kL; ++l)
        w[l] = cs.kill_time[l] > times[k] ? invariant_weight(params, cs.at[k]) / h0 : 0.0;
      for (int l = 0; l < kL; ++l) a.m[k * stride + l].add(w[l]);
      a.m[k * stride + kL].add(w[0] - w[1]);
      a.m[k * stride + kL + 1].add(w[1] - w[2]);
    }
  });
  DiscretisationStudy out;
  for (std::size_t k = 0; k < nt; ++k) {
    std::array<MCEstimate, kL> lv;
    for (int l = 0; l < kL; ++l) lv[l] = to_estimate(acc.m[k * stride + l], n, rng);
    out.levels.push_back(lv);
    out.diff_coarse.push_back(to_estimate(acc.m[k * stride + kL], n, rng));
    out.diff_fine.push_back(to_estimate(acc.m[k * stride + kL + 1], n, rng));
  }
  return out;
}

}  // namespace condstable
