#include "condstable/stable_core.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "condstable/errors.hpp"

namespace condstable {

namespace {

constexpr double kPi = std::numbers::pi;

void require_positive_eps(double eps) {
  if (!(eps > 0.0)) throw DomainError("jump cutoff eps must be > 0");
}

}  // namespace

double StableParams::jump_coefficient() const noexcept {
  return scale * std::tgamma(alpha + 1.0) * std::sin(kPi * alpha * rho) / kPi;
}

StableParams make_params(double alpha, double scale) {
  if (!(scale > 0.0)) throw DomainError("stable scale must be > 0");
  StableParams p;
  p.alpha = alpha;
  p.scale = scale;
  if (alpha > 0.0 && alpha < 1.0) {
    p.regime = Regime::Subordinator;
    p.rho = 1.0;
  } else if (alpha > 1.0 && alpha < 2.0) {
    p.regime = Regime::SpectrallyPositive;
    p.rho = 1.0 - 1.0 / alpha;
  } else {
    std::ostringstream msg;
    msg << "alpha = " << alpha
        << " is outside (0,1) U (1,2); alpha = 1 (symmetric Cauchy) and alpha >= 2 "
           "(Brownian motion) are excluded";
    throw DomainError(msg.str());
  }
  return p;
}

double levy_density(const StableParams& params, double x) {
  if (x == 0.0) throw DomainError("Levy density is not defined at x = 0");
  const double a = params.alpha;
  const double g = params.scale * std::tgamma(a + 1.0) / kPi;
  if (x > 0.0) return g * std::sin(kPi * a * params.rho) * std::pow(x, -a - 1.0);
  // sin(pi alpha rho_hat) vanishes in both one-sided regimes; keep it exact.
  return 0.0;
}

double levy_tail(const StableParams& params, double eps) {
  require_positive_eps(eps);
  if (std::isinf(eps)) return 0.0;
  return params.jump_coefficient() * std::pow(eps, -params.alpha) / params.alpha;
}

double small_jump_mean(const StableParams& params, double eps) {
  require_positive_eps(eps);
  if (!params.is_subordinator())
    throw DomainError("small_jump_mean is infinite for alpha > 1");
  return params.jump_coefficient() * std::pow(eps, 1.0 - params.alpha) / (1.0 - params.alpha);
}

double large_jump_mean(const StableParams& params, double eps) {
  require_positive_eps(eps);
  if (params.is_subordinator())
    throw DomainError("large_jump_mean is infinite for alpha < 1");
  return params.jump_coefficient() * std::pow(eps, 1.0 - params.alpha) / (params.alpha - 1.0);
}

double small_jump_variance(const StableParams& params, double eps) {
  require_positive_eps(eps);
  return params.jump_coefficient() * std::pow(eps, 2.0 - params.alpha) / (2.0 - params.alpha);
}

double sample_large_jump(const StableParams& params, double eps, RngStream& rng) {
  return eps * std::pow(rng.uniform(), -1.0 / params.alpha);
}

double sample_increment(const StableParams& params, double dt, RngStream& rng) {
  if (!(dt > 0.0)) throw DomainError("sample_increment requires dt > 0");
  const double a = params.alpha;
  // beta = 1 gives B = arctan(tan(pi a / 2)) / a in closed form on each branch.
  const double b = a < 1.0 ? 0.5 * kPi : 0.5 * kPi - kPi / a;
  const double v = kPi * (rng.uniform() - 0.5);
  const double w = rng.exponential();
  const double avb = a * (v + b);
  const double x = std::sin(avb) / std::pow(std::cos(v), 1.0 / a) *
                   std::pow(std::cos(v - avb) / w, (1.0 - a) / a);
  return std::pow(params.scale * dt, 1.0 / a) * x;
}

}  // namespace condstable
