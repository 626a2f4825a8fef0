#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <concepts>
#include <queue>
#include <sstream>
#include <vector>

#include "condstable/errors.hpp"

namespace condstable {

struct QuadratureConfig {
  double abs_tol = 1e-12;
  double rel_tol = 1e-12;
  int max_subdivisions = 500;

  void validate() const {
    if (!(abs_tol > 0.0) || !(rel_tol > 0.0))
      throw DomainError("quadrature tolerances must be > 0");
    if (max_subdivisions < 1) throw DomainError("max_subdivisions must be >= 1");
  }
};

namespace detail {

// Gauss-Kronrod 7/15 nodes and weights on [-1, 1] (QUADPACK qk15).
inline constexpr std::array<long double, 8> kXgk = {
    0.991455371120812639206854697526329L, 0.949107912342758524526189684047851L,
    0.864864423359769072789712788640926L, 0.741531185599394439863864773280788L,
    0.586087235467691130294144845693013L, 0.405845151377397166906606412076961L,
    0.207784955007898467600689403773245L, 0.000000000000000000000000000000000L};
inline constexpr std::array<long double, 8> kWgk = {
    0.022935322010529224963732008058970L, 0.063092092629978553290700663189204L,
    0.104790010322250183839876322541518L, 0.140653259715525918745189590510238L,
    0.169004726639267902826583426598550L, 0.190350578064785409913256402421014L,
    0.204432940075298892414161999234649L, 0.209482141084727828012999174891714L};
inline constexpr std::array<long double, 4> kWg = {
    0.129484966168869693270611432679082L, 0.279705391489276667901467771423780L,
    0.381830050505118944950369775488975L, 0.417959183673469387755102040816327L};

template <std::floating_point S, class F>
std::pair<S, S> gk15(const F& f, S a, S b) {
  const S center = (a + b) / 2;
  const S half = (b - a) / 2;
  const S fc = f(center);
  S kronrod = fc * static_cast<S>(kWgk[7]);
  S gauss = fc * static_cast<S>(kWg[3]);
  for (int j = 0; j < 7; ++j) {
    const S dx = half * static_cast<S>(kXgk[j]);
    const S f1 = f(center - dx);
    const S f2 = f(center + dx);
    kronrod += static_cast<S>(kWgk[j]) * (f1 + f2);
    if (j % 2 == 1) gauss += static_cast<S>(kWg[j / 2]) * (f1 + f2);
  }
  return {kronrod * half, std::abs((kronrod - gauss) * half)};
}

}  // namespace detail

/// Globally adaptive Gauss-Kronrod 7/15 quadrature of a smooth integrand.
/// Terminates when the summed error estimate is below
/// max(abs_tol, rel_tol * |I|); throws ToleranceNotMet otherwise.
template <std::floating_point S, class F>
S integrate_adaptive(const F& f, S a, S b, const QuadratureConfig& cfg = {}) {
  if (a == b) return S(0);
  struct Piece {
    S a, b, value, error;
    bool operator<(const Piece& o) const { return error < o.error; }
  };
  std::priority_queue<Piece> heap;
  auto [v0, e0] = detail::gk15<S>(f, a, b);
  heap.push({a, b, v0, e0});
  S total = v0;
  S total_err = e0;
  int pieces = 1;
  auto target = [&] {
    return std::max(static_cast<S>(cfg.abs_tol), static_cast<S>(cfg.rel_tol) * std::abs(total));
  };
  while (total_err > target()) {
    if (pieces >= cfg.max_subdivisions) {
      std::ostringstream msg;
      msg << "adaptive quadrature reached " << pieces << " subdivisions with error estimate "
          << static_cast<double>(total_err) << " > " << static_cast<double>(target());
      throw ToleranceNotMet(msg.str());
    }
    Piece worst = heap.top();
    heap.pop();
    const S mid = (worst.a + worst.b) / 2;
    auto [vl, el] = detail::gk15<S>(f, worst.a, mid);
    auto [vr, er] = detail::gk15<S>(f, mid, worst.b);
    total += vl + vr - worst.value;
    total_err += el + er - worst.error;
    heap.push({worst.a, mid, vl, el});
    heap.push({mid, worst.b, vr, er});
    ++pieces;
  }
  // Re-sum from the pieces to drop accumulated cancellation in `total`.
  S sum = 0;
  while (!heap.empty()) {
    sum += heap.top().value;
    heap.pop();
  }
  return sum;
}

}  // namespace condstable
