#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "condstable/rng.hpp"
#include "condstable/stable_core.hpp"
#include "condstable/stats.hpp"

namespace condstable {

/// Killing set: (-inf, 1], [-1, inf) or [-1, 1].
enum class Barrier { BelowOne, AboveMinusOne, Interval };

/// Path discretisation for alpha > 1.
///
/// Skeleton: exact increments on a dt grid, with steps that start within
/// 3 (scale dt)^{1/alpha} of the barrier split into 2^refine_levels exact
/// sub-increments. Hitting is checked at grid points only.
///
/// JumpAdapted: jumps above a cutoff proportional to the distance from the
/// barrier are simulated exactly, the remainder is replaced by Brownian
/// motion with matching mean and variance, whose barrier crossings are drawn
/// from the exact Brownian first-passage law.
enum class Scheme { Skeleton, JumpAdapted };

struct PathConfig {
  double dt = 1e-3;
  double horizon = 1.0;
  /// Jump cutoff of the subordinator scheme.
  double eps = 1e-4;
  int refine_levels = 4;
  Scheme scheme = Scheme::Skeleton;

  /// Extra eps/10 refinements allowed before a drift crossing is accepted.
  int max_eps_refinements = 16;

  /// JumpAdapted cutoff: clamp(eps_rel * distance, eps_min, eps_max).
  double eps_rel = 0.1;
  double eps_min = 1e-3;
  double eps_max = std::numeric_limits<double>::infinity();

  /// Safety cap on simulation events per path.
  std::uint64_t max_steps = 200'000'000;

  void validate() const;
};

struct HittingOutcome {
  bool hit = false;
  double time = std::numeric_limits<double>::infinity();
  double pre_position = std::numeric_limits<double>::quiet_NaN();
  double post_position = std::numeric_limits<double>::quiet_NaN();
  /// post_position - barrier for upward jump crossings, else 0.
  double overshoot = 0.0;
  bool censored = false;
  /// Upward crossing caused by a jump (as opposed to drift / diffusion).
  bool by_jump = false;
  /// Subordinator: crossing still made by the drift after all eps refinements.
  bool unresolved_drift = false;
  /// Subordinator: deepest eps/10 refinement used.
  int eps_refinements = 0;
  /// Subordinator: some refinement was forced by an imminent drift crossing.
  bool drift_refined = false;
};

struct PathSample {
  std::vector<double> times;
  std::vector<double> values;
};

/// Killed path observed at a sorted list of times.
struct PathRecord {
  HittingOutcome outcome;
  /// Start below -1: entered [-1, inf) by a jump landing above 1.
  bool jumped_over = false;
  /// T_{[-1, inf)} for starts below -1 (infinity if not entered).
  double entry_time = std::numeric_limits<double>::infinity();
  /// X at each observation time; NaN at and after killing.
  std::vector<double> at;
  /// Running extrema over [0, obs_k]; filled only when requested.
  std::vector<double> running_min;
  std::vector<double> running_max;
  std::uint64_t refinements = 0;
  std::uint64_t steps = 0;

  bool alive_at(std::size_t k) const { return at[k] == at[k]; }
};

/// Partial sums of exact increments on the dt grid (no killing).
PathSample simulate_skeleton(const StableParams& params, double x0, const PathConfig& cfg,
                             RngStream& rng);

/// First passage of the subordinator above `level`, exact at jumps.
///
/// Jumps in [eps/10, eps) are split off from the drift as a separate Poisson
/// band, keeping all pending jump times, whenever the drift would reach the
/// level before the next jump or the gap falls below 1000 eps. Up to
/// cfg.max_eps_refinements bands are added; a crossing that remains a drift
/// crossing gets overshoot 0 and unresolved_drift = true.
HittingOutcome first_passage_subordinator(const StableParams& params, double x0, double level,
                                          const PathConfig& cfg, RngStream& rng);

/// Simulates until the first entry into the killing set or cfg.horizon,
/// recording X at `obs_times` (sorted, within [0, horizon]).
PathRecord simulate_killed(const StableParams& params, double x0, Barrier barrier,
                           std::span<const double> obs_times, const PathConfig& cfg,
                           RngStream& rng, bool track_extrema = false);

HittingOutcome hitting_time_interval(const StableParams& params, double x0, Barrier barrier,
                                     const PathConfig& cfg, RngStream& rng);

/// P_{x0}(t < T_barrier); replicate i uses rng.child(i).
MCEstimate survival_probability(const StableParams& params, double x0, double t, Barrier barrier,
                                const PathConfig& cfg, std::uint64_t n, const RngStream& rng);

/// Survival at every time of an increasing grid from one shared path pool.
std::vector<MCEstimate> survival_curve(const StableParams& params, double x0,
                                       std::span<const double> times, Barrier barrier,
                                       const PathConfig& cfg, std::uint64_t n,
                                       const RngStream& rng);

/// Three skeletons with steps dt, dt/2, dt/4 driven by one path.
///
/// Each level follows the Skeleton rules at its own step size and its own
/// refinement decisions; the underlying path is generated at the finest
/// resolution any level currently needs, so every level's marginal law is
/// exactly that of the Skeleton scheme at its step size.
struct CoupledSkeleton {
  static constexpr int kLevels = 3;
  /// X at the observation times, shared by all levels up to their killing.
  std::vector<double> at;
  std::array<double, kLevels> kill_time{};
};

CoupledSkeleton simulate_coupled_skeleton(const StableParams& params, double x0, Barrier barrier,
                                          std::span<const double> obs_times,
                                          const PathConfig& cfg, RngStream& rng);

/// The barrier used for conditioning from x0: [-1, 1] for the subordinator,
/// (-inf, 1] above and [-1, inf) below the interval otherwise.
Barrier conditioning_barrier(const StableParams& params, double x0);

}  // namespace condstable
