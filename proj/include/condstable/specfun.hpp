#pragma once

// Closed-form objects for one-sided stable processes avoiding [-1, 1].
// Everything here is templated on the floating-point type so the same code
// path can be evaluated in long double for cross-checks.

#include <cmath>
#include <concepts>
#include <numbers>
#include <utility>

#include "condstable/errors.hpp"
#include "condstable/quadrature.hpp"
#include "condstable/stable_core.hpp"

namespace condstable {

namespace detail {

inline void require_subordinator_alpha(double alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("alpha must lie in (0, 1)");
}

inline void require_spectrally_positive_alpha(double alpha) {
  if (!(alpha > 1.0 && alpha < 2.0)) throw DomainError("alpha must lie in (1, 2)");
}

inline void require_outside_interval(double x) {
  if (!(std::abs(x) > 1.0)) throw DomainError("x must lie outside [-1, 1]");
}

}  // namespace detail

/// I(u) = int_0^u t^{-alpha} (1+t)^{-1} dt for alpha in (0,1), u in [0, inf].
///
/// [0, min(u,1)] is mapped by t = v^{1/(1-alpha)} and [1, u] by t = v^{-1/alpha};
/// both turn the integrand into 1/(1 + v^p), which is bounded and smooth, so
/// the endpoint singularity never reaches the quadrature rule.
template <std::floating_point S>
S beta_tail_integral(S alpha, S u, const QuadratureConfig& q = {}) {
  detail::require_subordinator_alpha(static_cast<double>(alpha));
  if (!(u >= 0)) throw DomainError("beta_tail_integral requires u >= 0");
  q.validate();
  if (u == 0) return S(0);
  const S one = 1;
  const S left_end = std::pow(std::min(u, one), one - alpha);
  const S p_left = one / (one - alpha);
  S value = integrate_adaptive<S>([&](S v) { return one / (one + std::pow(v, p_left)); }, S(0),
                                  left_end, q) /
            (one - alpha);
  if (u > one) {
    const S lower = std::isinf(u) ? S(0) : std::pow(u, -alpha);
    const S p_right = one / alpha;
    value += integrate_adaptive<S>([&](S v) { return one / (one + std::pow(v, p_right)); },
                                   lower, one, q) /
             alpha;
  }
  return value;
}

/// P(overshoot over a barrier at distance d exceeds z) for the stable
/// subordinator: 1 - sin(pi alpha)/pi * I(z/d).
template <std::floating_point S>
S overshoot_tail(S alpha, S d, S z, const QuadratureConfig& q = {}) {
  detail::require_subordinator_alpha(static_cast<double>(alpha));
  if (!(d > 0)) throw DomainError("overshoot_tail requires distance d > 0");
  if (!(z >= 0)) throw DomainError("overshoot_tail requires z >= 0");
  const S c = std::sin(std::numbers::pi_v<S> * alpha) / std::numbers::pi_v<S>;
  return S(1) - c * beta_tail_integral<S>(alpha, z / d, q);
}

/// Invariant function of the subordinator killed on entering [-1, 1]; equals
/// P_x(T_[-1,1] = inf).
template <std::floating_point S>
S h_subordinator(S alpha, S x, const QuadratureConfig& q = {}) {
  detail::require_subordinator_alpha(static_cast<double>(alpha));
  detail::require_outside_interval(static_cast<double>(x));
  if (x > 1) return S(1);
  return overshoot_tail<S>(alpha, -S(1) - x, S(2), q);
}

/// d/dx h_subordinator on (-inf, -1); zero above the interval.
template <std::floating_point S>
S h_subordinator_derivative(S alpha, S x) {
  detail::require_subordinator_alpha(static_cast<double>(alpha));
  detail::require_outside_interval(static_cast<double>(x));
  if (x > 1) return S(0);
  const S d = -S(1) - x;
  const S u = S(2) / d;
  const S c = std::sin(std::numbers::pi_v<S> * alpha) / std::numbers::pi_v<S>;
  return -c * std::pow(u, -alpha) / (S(1) + u) * S(2) / (d * d);
}

template <std::floating_point S>
struct LadderPotentials {
  S u_minus;
  S u_plus;
};

template <std::floating_point S>
struct LaplaceExponents {
  S kappa;
  S kappa_hat;
};

/// U_-(x) = x^{alpha(1-rho)}, U_+(x) = x^{alpha rho}.
template <std::floating_point S = double>
LadderPotentials<S> ladder_potentials(const StableParams& params, S x) {
  if (!(x > 0)) throw DomainError("ladder potentials require x > 0");
  const S a = params.alpha;
  const S rho = params.rho;
  return {std::pow(x, a * (S(1) - rho)), std::pow(x, a * rho)};
}

/// kappa(q) = q^rho, kappa_hat(q) = q^{1-rho}.
template <std::floating_point S = double>
LaplaceExponents<S> laplace_exponents(const StableParams& params, S q) {
  if (!(q >= 0)) throw DomainError("Laplace exponents require q >= 0");
  const S rho = params.rho;
  return {std::pow(q, rho), std::pow(q, S(1) - rho)};
}

/// Piecewise invariant function of the alpha > 1 transform: x - 1 above,
/// (-1-x)^{alpha-1} below the interval.
template <std::floating_point S>
S h_updown(S alpha, S x) {
  detail::require_spectrally_positive_alpha(static_cast<double>(alpha));
  detail::require_outside_interval(static_cast<double>(x));
  if (x > 1) return x - S(1);
  return std::pow(-S(1) - x, alpha - S(1));
}

/// Potential density of the process killed on entering [-1, inf), with the
/// free multiplicative constant set to 1:
/// ((-x-1)^{alpha-1} - (y-x)_+^{alpha-1}) / Gamma(alpha).
template <std::floating_point S>
S killed_potential_density(S alpha, S x, S y) {
  detail::require_spectrally_positive_alpha(static_cast<double>(alpha));
  if (!(x < -1) || !(y < -1)) throw DomainError("killed_potential_density requires x, y < -1");
  const S e = alpha - S(1);
  const S gap = y - x;
  const S positive_part = gap > 0 ? std::pow(gap, e) : S(0);
  return (std::pow(-x - S(1), e) - positive_part) / std::tgamma(alpha);
}

}  // namespace condstable
