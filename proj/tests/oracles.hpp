#pragma once

// Independent reference values for the unit tests. Nothing here calls into the
// library: gamma values come from 50-digit Boost multiprecision, integrals from
// Boost quadrature.

#include <cmath>
#include <complex>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/quadrature/tanh_sinh.hpp>
#include <boost/math/special_functions/beta.hpp>
#include <boost/multiprecision/cpp_bin_float.hpp>

namespace oracle {

using mp = boost::multiprecision::cpp_bin_float_50;

inline double tgamma_mp(double x) { return static_cast<double>(boost::multiprecision::tgamma(mp(x))); }

/// Coefficient of x^{-alpha-1} in the Levy density.
inline double jump_coefficient(double alpha) {
  const mp a(alpha);
  const mp rho = alpha < 1.0 ? mp(1) : mp(1) - 1 / a;
  const mp pi = boost::math::constants::pi<mp>();
  return static_cast<double>(boost::multiprecision::tgamma(a + 1) * sin(pi * a * rho) / pi);
}

/// int_0^u t^{-alpha} / (1 + t) dt through the regularised incomplete beta.
inline double beta_tail(double alpha, double u) {
  if (std::isinf(u)) return std::numbers::pi / std::sin(std::numbers::pi * alpha);
  const double x = u / (1.0 + u);
  return boost::math::ibeta(1.0 - alpha, alpha, x) * std::numbers::pi /
         std::sin(std::numbers::pi * alpha);
}

/// Same integral by tanh-sinh quadrature on [0, u].
inline double beta_tail_quadrature(double alpha, double u) {
  boost::math::quadrature::tanh_sinh<double> ts;
  return ts.integrate([&](double t) { return std::pow(t, -alpha) / (1.0 + t); }, 0.0, u);
}

inline double overshoot_tail(double alpha, double d, double z) {
  return 1.0 - std::sin(std::numbers::pi * alpha) / std::numbers::pi * beta_tail(alpha, z / d);
}

/// Mittag-Leffler E_{a,b}(z) by its power series in 50-digit arithmetic.
inline double mittag_leffler(double a, double b, double z) {
  mp sum = 0, zk = 1;
  for (int k = 0; k < 400; ++k) {
    const mp term = zk / boost::multiprecision::tgamma(mp(a) * k + b);
    sum += term;
    if (k > 10 && abs(term) < mp(1e-30) * abs(sum)) break;
    zk *= z;
  }
  return static_cast<double>(sum);
}

/// P_x(e_q < T_(-inf,1]) for x > 1 and alpha in (1, 2).
inline double survival_above(double alpha, double q, double x) {
  return 1.0 - std::exp(-std::pow(q, 1.0 / alpha) * (x - 1.0));
}

/// P_x(e_q < T_[-1,inf)) for x < -1 and alpha in (1, 2).
inline double survival_below(double alpha, double q, double x) {
  const double d = -1.0 - x;
  const double z = q * std::pow(d, alpha);
  return 1.0 - mittag_leffler(alpha, 1.0, z) +
         std::pow(q, 1.0 - 1.0 / alpha) * std::pow(d, alpha - 1.0) *
             mittag_leffler(alpha, alpha, z);
}

/// CDF of X_1 for alpha in (1, 2) by Gil-Pelaez inversion of the
/// characteristic function exp((-i theta)^alpha).
inline double stable_cdf(double alpha, double x) {
  auto integrand = [&](double th) {
    if (th == 0.0) return -x;
    const std::complex<double> phi = std::exp(std::pow(std::complex<double>(0.0, -th), alpha));
    return std::imag(std::exp(std::complex<double>(0.0, -th * x)) * phi) / th;
  };
  // |phi| = exp(-theta^alpha |cos(pi alpha / 2)|) is below 1e-20 past theta_max.
  const double theta_max =
      std::pow(46.0 / std::abs(std::cos(std::numbers::pi * alpha / 2.0)), 1.0 / alpha);
  double total = 0.0;
  for (double lo = 0.0; lo < theta_max; lo += 0.5)
    total += boost::math::quadrature::gauss_kronrod<double, 61>::integrate(integrand, lo, lo + 0.5);
  return 0.5 - total / std::numbers::pi;
}

/// CDF of X_1 for alpha = 1/2: the Levy law with E exp(-l X) = exp(-sqrt(l)).
inline double levy_half_cdf(double x) { return x > 0.0 ? std::erfc(0.5 / std::sqrt(x)) : 0.0; }

}  // namespace oracle
