#pragma once

#include "condstable/rng.hpp"

namespace condstable {

enum class Regime { Subordinator, SpectrallyPositive };

/// One-sided strictly alpha-stable law without negative jumps.
///
/// The Levy measure is scale * c_alpha * x^{-alpha-1} dx on x > 0 with
/// c_alpha = Gamma(alpha+1) sin(pi alpha rho) / pi. With scale = 1 this is the
/// normalisation for which E[exp(-l X_1)] = exp(-l^alpha) (alpha < 1) and
/// E[exp(-l X_1)] = exp(l^alpha) (alpha > 1).
struct StableParams {
  double alpha = 0.5;
  Regime regime = Regime::Subordinator;
  double rho = 1.0;
  double scale = 1.0;

  double rho_hat() const noexcept { return 1.0 - rho; }
  /// scale * c_alpha, the coefficient of x^{-alpha-1} in the Levy density.
  double jump_coefficient() const noexcept;
  bool is_subordinator() const noexcept { return regime == Regime::Subordinator; }
};

/// Parameters for alpha in (0,1) (subordinator, rho = 1) or alpha in (1,2)
/// (spectrally positive, rho = 1 - 1/alpha). Throws DomainError otherwise.
StableParams make_params(double alpha, double scale = 1.0);

double levy_density(const StableParams& params, double x);

/// Tail mass of the Levy measure on [eps, inf).
double levy_tail(const StableParams& params, double eps);

/// Mean rate of jumps smaller than eps, finite only for the subordinator.
double small_jump_mean(const StableParams& params, double eps);

/// Mean rate of jumps of size >= eps (alpha > 1 only).
double large_jump_mean(const StableParams& params, double eps);

/// Second moment rate of jumps smaller than eps.
double small_jump_variance(const StableParams& params, double eps);

/// One jump of size >= eps drawn from the normalised Levy measure restricted
/// to [eps, inf), i.e. Pareto(alpha) on [eps, inf).
double sample_large_jump(const StableParams& params, double eps, RngStream& rng);

/// Exact draw of X_dt - X_0 (Chambers-Mallows-Stuck with beta = 1).
double sample_increment(const StableParams& params, double dt, RngStream& rng);

}  // namespace condstable
