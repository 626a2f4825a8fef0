#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "condstable/path_engine.hpp"
#include "condstable/stats.hpp"

namespace condstable {

/// Path event Lambda in F_t: {X_t in [a, b]}, {inf_{s<=t} X_s > a} or
/// {sup_{s<=t} X_s < b}.
struct EventSpec {
  enum class Kind { Always, PositionIn, InfAbove, SupBelow };
  Kind kind = Kind::Always;
  double a = -std::numeric_limits<double>::infinity();
  double b = std::numeric_limits<double>::infinity();

  static EventSpec always() { return {}; }
  static EventSpec position_in(double a, double b);
  static EventSpec inf_above(double a);
  static EventSpec sup_below(double b);

  bool needs_extrema() const { return kind == Kind::InfAbove || kind == Kind::SupBelow; }
  bool holds(double x_t, double running_min, double running_max) const;
};

/// Bias diagnostics collected alongside an estimate.
struct Diagnostics {
  double steps_per_path = 0.0;
  double refinements_per_path = 0.0;
  /// Subordinator: fraction of passages made by the small-jump drift at the
  /// base eps, and the fraction still unresolved after all refinements.
  double drift_crossing_fraction = 0.0;
  double unresolved_fraction = 0.0;
};

/// Invariant function of the regime: h_subordinator for alpha < 1, the
/// piecewise x - 1 / (-1-x)^{alpha-1} for alpha > 1.
double invariant_weight(const StableParams& params, double x);

/// E_{x0}[1_Lambda 1_{t<T} h(X_t)] / h(x0) with the regime's killing barrier.
MCEstimate weighted_expectation(const StableParams& params, double x0, double t,
                                const EventSpec& event, const PathConfig& cfg, std::uint64_t n,
                                const RngStream& rng, Diagnostics* diag = nullptr);

/// Same estimate at several increasing times from one path pool.
std::vector<MCEstimate> weighted_expectation_curve(const StableParams& params, double x0,
                                                   std::span<const double> times,
                                                   const EventSpec& event, const PathConfig& cfg,
                                                   std::uint64_t n, const RngStream& rng,
                                                   Diagnostics* diag = nullptr);

/// Binned transition kernel of the conditioned process.
struct KernelEstimate {
  Eigen::VectorXd bin_edges;
  Eigen::VectorXd masses;
  Eigen::VectorXd stderrs;
  /// h-weighted mean of X_t within each bin (the midpoint for empty bins).
  Eigen::VectorXd bin_means;
  double total_mass = 0.0;
  /// Conditioned mass on the side of the interval opposite to x0.
  double opposite_mass = 0.0;
  double opposite_stderr = 0.0;
  std::uint64_t n = 0;
};

/// Edges may be infinite; masses outside the outermost edges are dropped.
KernelEstimate transition_kernel_estimate(const StableParams& params, double x0, double t,
                                          const Eigen::VectorXd& bin_edges,
                                          const PathConfig& cfg, std::uint64_t n,
                                          const RngStream& rng);

struct ChapmanKolmogorovResult {
  /// Half L1 distance between the direct and the composed kernel.
  double discrepancy = 0.0;
  double mc_bound = 0.0;
  double binning_bound = 0.0;
  double bound = 0.0;
  KernelEstimate direct;
  Eigen::VectorXd composed;
};

/// Compares P_{s+t}(x0, .) with sum_j P_t(x0, B_j) P_s(z_j, .). Both kernels
/// are evaluated on `bin_edges` (finite, on the side of x0) plus the outer
/// unbounded bin. The intermediate bins B_j extend `bin_edges` geometrically
/// to 100 times the outer edge, then an unbounded terminal bin represented by
/// its finite edge; z_j is the midpoint otherwise. The kernel from x0 at t uses
/// rng.child(0), at s + t rng.child(1); the kernel from z_j uses rng.child(2 + j).
ChapmanKolmogorovResult chapman_kolmogorov_check(const StableParams& params, double x0, double s,
                                                 double t, const Eigen::VectorXd& bin_edges,
                                                 const PathConfig& cfg, std::uint64_t n,
                                                 const RngStream& rng);

/// Sampled draws e_q per replicate; Integrated averages over the clock
/// analytically, P(t < e_q < T) = E[e^{-qt} - e^{-qT}] on {t < T}.
enum class ClockMode { Sampled, Integrated };

/// Integrated mode simulates to kClockHorizon / q; beyond it e^{-qT} < 1e-13.
inline constexpr double kClockHorizon = 30.0;

struct ConditionalEstimate {
  MCEstimate estimate;
  /// Estimated probability of the conditioning event.
  MCEstimate acceptance;
};

/// P_{x0}(Lambda, t < e_q | e_q < T_{[-1,1]}).
ConditionalEstimate exp_conditioning_estimate(const StableParams& params, double x0, double t,
                                              double q, const EventSpec& event,
                                              const PathConfig& cfg, std::uint64_t n,
                                              const RngStream& rng,
                                              ClockMode clock = ClockMode::Sampled);

/// One estimate per q from a shared path pool (common random numbers).
std::vector<ConditionalEstimate> exp_conditioning_curve(
    const StableParams& params, double x0, double t, std::span<const double> q_grid,
    const EventSpec& event, const PathConfig& cfg, std::uint64_t n, const RngStream& rng,
    ClockMode clock = ClockMode::Sampled);

/// P_{x0}(Lambda | T_{[-1,1]} > s) for the subordinator, Lambda observed at t < s.
ConditionalEstimate time_conditioning_estimate(const StableParams& params, double x0, double s,
                                               double t, const EventSpec& event,
                                               const PathConfig& cfg, std::uint64_t n,
                                               const RngStream& rng);

/// Endpoint-weighted resampling from pools of m killed paths observed on a
/// uniform grid of `grid_points` + 1 times in [0, t]. Pool round r uses
/// rng.child(r * m + i); selection uses a separate child stream.
PathSample sample_conditioned_path(const StableParams& params, double x0, double t,
                                   const PathConfig& cfg, std::uint64_t m, const RngStream& rng,
                                   std::uint64_t grid_points = 100, int max_regenerations = 64);

/// Endpoints of `count` independent conditioned paths; draw i uses rng.child(i).
std::vector<double> conditioned_endpoints(const StableParams& params, double x0, double t,
                                          const PathConfig& cfg, std::uint64_t m,
                                          std::uint64_t count, const RngStream& rng);

/// Coupled-skeleton study of the martingale identity at dt, dt/2 and dt/4.
struct DiscretisationStudy {
  /// Weighted expectation at each level, per observation time.
  std::vector<std::array<MCEstimate, CoupledSkeleton::kLevels>> levels;
  /// Level 0 minus level 1 and level 1 minus level 2, paired per path.
  std::vector<MCEstimate> diff_coarse;
  std::vector<MCEstimate> diff_fine;
};

DiscretisationStudy discretisation_study(const StableParams& params, double x0,
                                         std::span<const double> times, const PathConfig& cfg,
                                         std::uint64_t n, const RngStream& rng);

}  // namespace condstable
