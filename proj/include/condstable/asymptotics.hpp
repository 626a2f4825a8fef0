#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "condstable/conditioned.hpp"
#include "condstable/path_engine.hpp"
#include "condstable/stats.hpp"

namespace condstable {

struct GridPoint {
  double abscissa = 0.0;
  double estimate = 0.0;
  double stderr = 0.0;
  /// Included in the fit (relative stderr at most kMaxRelativeStderr).
  bool used = false;
};

inline constexpr double kMaxRelativeStderr = 0.25;

/// Log-log power-law fit: log estimate = intercept + exponent * log abscissa.
struct FitResult {
  double exponent = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
  double exponent_stderr = 0.0;
  std::vector<GridPoint> grid;
};

/// Weighted least squares on log-log scale with weights (estimate / stderr)^2;
/// points with relative stderr above kMaxRelativeStderr are excluded.
/// Throws FitDegenerate on a zero estimate or fewer than two usable points.
FitResult fit_power_law(std::vector<GridPoint> grid);

/// P_{x0}(s < T_{[-1,1]}) on s_grid from one path pool, fitted against s.
FitResult survival_tail_exponent(const StableParams& params, double x0,
                                 std::span<const double> s_grid, const PathConfig& cfg,
                                 std::uint64_t n, const RngStream& rng);

/// P_{x0}(e_q < T_{[-1,1]}).
MCEstimate eq_survival(const StableParams& params, double x0, double q, const PathConfig& cfg,
                       std::uint64_t n, const RngStream& rng,
                       ClockMode clock = ClockMode::Sampled);

/// One estimate per q from a shared path pool.
std::vector<MCEstimate> eq_survival_curve(const StableParams& params, double x0,
                                          std::span<const double> q_grid, const PathConfig& cfg,
                                          std::uint64_t n, const RngStream& rng,
                                          ClockMode clock = ClockMode::Sampled);

struct ProfilePoint {
  double x = 0.0;
  double ratio = 0.0;
  double stderr = 0.0;
  double predicted = 0.0;
  MCEstimate survival;
};

/// eq_survival at each x relative to x_list[0] against ((-1-x)/(-1-x_ref))^{alpha-1}.
/// Point k uses rng.child(k).
std::vector<ProfilePoint> profile_ratio_check(const StableParams& params,
                                              std::span<const double> x_list, double q,
                                              const PathConfig& cfg, std::uint64_t n,
                                              const RngStream& rng,
                                              ClockMode clock = ClockMode::Sampled);

struct BoundPoint {
  double q = 0.0;
  double lhs = 0.0;
  double stderr = 0.0;
  double rhs = 0.0;
  bool holds = false;
};

/// P_{x0}(e_q < T_{(-inf,1]}) against q^{1/alpha} (x0 - 1); holds allows 3 stderr.
std::vector<BoundPoint> upper_bound_check(const StableParams& params, double x0,
                                          std::span<const double> q_grid, const PathConfig& cfg,
                                          std::uint64_t n, const RngStream& rng,
                                          ClockMode clock = ClockMode::Sampled);

struct CancellationResult {
  FitResult fit;
  /// Stratum mass is non-increasing along the q grid (sorted decreasing)
  /// within 3 combined stderr.
  bool monotone = false;
  std::vector<ConditionalEstimate> stratum;
};

/// Conditional mass P_{x0}(T_{[-1,inf)} <= t < T_{[-1,1]}, t < e_q | e_q < T_{[-1,1]})
/// of the paths that jumped over the interval, fitted against q.
CancellationResult cancellation_rate(const StableParams& params, double x0, double t,
                                     std::span<const double> q_grid, const PathConfig& cfg,
                                     std::uint64_t n, const RngStream& rng,
                                     ClockMode clock = ClockMode::Integrated);

struct TauberianPoint {
  double q = 0.0;
  /// q^{1/alpha-1} P(e_q < T) / (s^{1-1/alpha} P(s < T)) at s = 1/q.
  double ratio = 0.0;
  double stderr = 0.0;
};

/// Survival in s and in e_q from independent pools (rng.child(0), rng.child(1)).
std::vector<TauberianPoint> tauberian_ratios(const StableParams& params, double x0,
                                             std::span<const double> q_grid,
                                             const PathConfig& cfg, std::uint64_t n,
                                             const RngStream& rng);

}  // namespace condstable
