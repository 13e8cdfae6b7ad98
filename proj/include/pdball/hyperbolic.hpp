#pragma once

#include <array>
#include <cassert>
#include <numbers>
#include <random>
#include <stdexcept>
#include <type_traits>
#include <vector>

#include "pdball/tape.hpp"

// Poincaré-ball primitives: Möbius addition, distance, exponential and
// logarithmic maps, the fixed embedding ρ of diagram points, the learnable
// scale-and-rotate map φ into the ball, and the spherical coordinate chart ψ
// used to hand ball points to a Euclidean classifier head.
//
// Everything is templated over the scalar type so the same formulas run on
// plain doubles (forward evaluation) and on tape variables (gradients). A
// "ball point" is a vector with ‖x‖ ≤ 1 − kBallEps; every operation returning
// one re-clamps, so the invariant survives rounding.

namespace pdball {

using Vec = std::vector<double>;

constexpr double kBallEps = 1e-6;        // radius cap: ‖x‖ ≤ 1 − kBallEps
constexpr double kDomainMargin = 1e-12;  // open-domain margin for acos/atanh
constexpr double kPhiEps = 1e-7;         // keeps φ's radii strictly positive

template <class S>
using VecT = std::vector<S>;

namespace detail {

template <class A, class B>
struct promote {
  using type = double;
};
template <class B>
struct promote<Var, B> {
  using type = Var;
};
template <class A>
struct promote<A, Var> {
  using type = Var;
};
template <>
struct promote<Var, Var> {
  using type = Var;
};
template <class A, class B>
using promote_t = typename promote<A, B>::type;

// Detached constant "like" an existing scalar: a fresh leaf for tape
// variables (so no gradient flows into it), the plain value for doubles.
inline double const_like(double, double value) { return value; }
inline Var const_like(const Var& like, double value) { return make_var(*like.tape, value); }

template <class S>
S dot(const VecT<S>& a, const VecT<S>& b) {
  assert(!a.empty() && a.size() == b.size());
  S acc = a[0] * b[0];
  for (std::size_t i = 1; i < a.size(); ++i) acc = acc + a[i] * b[i];
  return acc;
}

template <class S>
double value_sqnorm(const VecT<S>& a) {
  double acc = 0.0;
  for (const S& x : a) acc += val(x) * val(x);
  return acc;
}

// Rescale onto the radius cap when rounding (or an aggressive φ radius)
// pushes a point outside. The rescaled output is detached: beyond the clamp
// the point is treated as constant, and the event is recorded.
template <class S>
VecT<S> clamp_to_ball(VecT<S> v) {
  const double cap = 1.0 - kBallEps;
  const double n2 = value_sqnorm(v);
  if (n2 > cap * cap) {
    note_clamp_event();
    const double s = cap / std::sqrt(n2);
    for (S& x : v) x = const_like(x, val(x) * s);
  }
  return v;
}

}  // namespace detail

template <class S>
VecT<S> mobius_add(const VecT<S>& x, const VecT<S>& y) {
  const S xy = detail::dot(x, y);
  const S xx = detail::dot(x, x);
  const S yy = detail::dot(y, y);
  const S den = 1.0 + 2.0 * xy + xx * yy;
  const S cx = (1.0 + 2.0 * xy + yy) / den;
  const S cy = (1.0 - xx) / den;
  VecT<S> out;
  out.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out.push_back(cx * x[i] + cy * y[i]);
  return detail::clamp_to_ball(std::move(out));
}

template <class S>
S ball_distance(const VecT<S>& x, const VecT<S>& y) {
  const S xx = detail::dot(x, x);
  const S yy = detail::dot(y, y);
  VecT<S> diff;
  diff.reserve(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) diff.push_back(x[i] - y[i]);
  const S dd = detail::dot(diff, diff);
  const S arg = 1.0 + 2.0 * dd / ((1.0 - xx) * (1.0 - yy));
  // Rounding can land the argument a hair below 1 when x == y.
  if (val(arg) <= 1.0) return detail::const_like(arg, 0.0);
  return acosh(arg);
}

/// exp_x(v) = x ⊕ (tanh(λ_x‖v‖/2)·v/‖v‖). Below the tiny-norm threshold the
/// tanh linearization x ⊕ (λ_x/2)·v is used: the value matches returning x to
/// machine precision while keeping the derivative correct at v = 0.
template <class S>
VecT<S> exp_map(const VecT<S>& x, const VecT<S>& v) {
  const S xx = detail::dot(x, x);
  const S lam = 2.0 / (1.0 - xx);
  const S vv = detail::dot(v, v);
  VecT<S> u;
  u.reserve(v.size());
  if (val(vv) < 1e-30) {
    for (const S& c : v) u.push_back(lam * 0.5 * c);
  } else {
    const S nv = sqrt(vv);
    const S t = tanh(lam * nv * 0.5);
    for (const S& c : v) u.push_back(t * c / nv);
  }
  return mobius_add(x, u);
}

/// log_x(y) = (2/λ_x)·artanh(‖w‖)·w/‖w‖ with w = (−x) ⊕ y; linearized like
/// exp_map when y is numerically equal to x.
template <class S>
VecT<S> log_map(const VecT<S>& x, const VecT<S>& y) {
  VecT<S> mx;
  mx.reserve(x.size());
  for (const S& c : x) mx.push_back(-c);
  const VecT<S> w = mobius_add(mx, y);
  const S xx = detail::dot(x, x);
  const S lam = 2.0 / (1.0 - xx);
  const S ww = detail::dot(w, w);
  VecT<S> out;
  out.reserve(w.size());
  if (val(ww) < 1e-30) {
    for (const S& c : w) out.push_back(2.0 / lam * c);
    return out;
  }
  const S nw = sqrt(ww);
  const S a = atanh(clamp(nw, 0.0, 1.0 - kDomainMargin));
  for (const S& c : w) out.push_back(2.0 / lam * a * c / nw);
  return out;
}

/// Fixed (non-learnable) means of the embedding ρ, one (birth-axis,
/// log-persistence-axis) pair per output component; pairs must be distinct
/// for ρ to stay injective.
struct RhoConfig {
  std::vector<std::array<double, 2>> means;
  int dim() const { return static_cast<int>(means.size()); }
};

void validate(const RhoConfig& cfg);

/// Means on the diagonal of the box [0, max_birth] × [ln p_min, ln p_max];
/// degenerate boxes are widened so the pairs stay distinct.
RhoConfig lattice_rho_config(int m, double max_birth, double p_min, double p_max);

/// Componentwise Gaussian in (birth, ln(death − birth)); exactly the zero
/// vector for points on or below the diagonal.
template <class S>
VecT<S> rho(const S& birth, const S& death, const RhoConfig& cfg) {
  const int m = cfg.dim();
  VecT<S> out;
  out.reserve(m);
  if (!(val(death) > val(birth))) {
    for (int i = 0; i < m; ++i) out.push_back(detail::const_like(birth, 0.0));
    return out;
  }
  const S lp = log(death - birth);
  for (int i = 0; i < m; ++i) {
    const S d1 = birth - cfg.means[i][0];
    const S d2 = lp - cfg.means[i][1];
    out.push_back(exp(0.0 - (d1 * d1 + d2 * d2)));
  }
  return out;
}

/// Learnable parameters of φ: θ[0] scales the radius, θ[1..m-1] offset the
/// spherical angles.
struct PhiParams {
  Vec theta;
};

PhiParams random_phi_params(int m, std::mt19937_64& rng);

/// Point with the given radius and spherical angles y₂..y_m (m−1 of them):
/// p₁ = r·cos y₂, p₂ = r·sin y₂·cos y₃, …, p_m = r·sin y₂⋯sin y_m.
template <class S>
VecT<S> spherical_point(const S& radius, const VecT<S>& angles) {
  VecT<S> p;
  p.reserve(angles.size() + 1);
  S run = radius;
  for (const S& a : angles) {
    p.push_back(run * cos(a));
    run = run * sin(a);
  }
  p.push_back(run);
  return p;
}

/// φ(x; θ): radius (2/π)·|arctan(θ₁·r₁)| with r_i² = Σ_{j≥i} x_j² + ε, angles
/// y_i = θ_i + arccos(x_{i−1}/r_{i−1}), assembled via spherical coordinates.
/// Templated separately over the input and parameter scalar types because the
/// training path differentiates w.r.t. θ only (x comes from ρ on constants).
template <class XS, class TS>
VecT<detail::promote_t<XS, TS>> phi(const VecT<XS>& x, const VecT<TS>& theta) {
  using P = detail::promote_t<XS, TS>;
  const int m = static_cast<int>(x.size());
  assert(static_cast<int>(theta.size()) == m && m >= 1);
  VecT<XS> r2(m);
  r2[m - 1] = x[m - 1] * x[m - 1] + kPhiEps;
  for (int i = m - 2; i >= 0; --i) r2[i] = r2[i + 1] + x[i] * x[i];
  const XS r1 = sqrt(r2[0]);
  const P radius = 2.0 / std::numbers::pi * abs(atan(theta[0] * r1));
  VecT<P> ys;
  ys.reserve(m - 1);
  for (int i = 1; i < m; ++i) {
    const XS ratio = x[i - 1] / sqrt(r2[i - 1]);
    ys.push_back(theta[i] + acos(clamp(ratio, -1.0 + kDomainMargin, 1.0 - kDomainMargin)));
  }
  return detail::clamp_to_ball(spherical_point(radius, ys));
}

/// ψ(y): inverse of the spherical parameterization — (radius, angles), with
/// the origin (and on-axis degeneracies) mapped to zero angles by convention.
template <class S>
VecT<S> chart(const VecT<S>& y) {
  const int m = static_cast<int>(y.size());
  VecT<S> s2(m);
  s2[m - 1] = y[m - 1] * y[m - 1];
  for (int i = m - 2; i >= 0; --i) s2[i] = s2[i + 1] + y[i] * y[i];
  VecT<S> out;
  out.reserve(m);
  if (val(s2[0]) < 1e-300) {
    for (int i = 0; i < m; ++i) out.push_back(detail::const_like(y[0], 0.0));
    return out;
  }
  out.push_back(sqrt(s2[0]));
  for (int i = 1; i <= m - 2; ++i) {
    if (val(s2[i - 1]) <= 0.0) {
      out.push_back(detail::const_like(y[0], 0.0));
      continue;
    }
    const S ratio = y[i - 1] / sqrt(s2[i - 1]);
    out.push_back(acos(clamp(ratio, -1.0 + kDomainMargin, 1.0 - kDomainMargin)));
  }
  if (m >= 2) {
    if (val(y[m - 2]) == 0.0 && val(y[m - 1]) == 0.0) {
      out.push_back(detail::const_like(y[0], 0.0));
    } else {
      S a = atan2(y[m - 1], y[m - 2]);
      if (val(a) < 0.0) a = a + 2.0 * std::numbers::pi;
      out.push_back(a);
    }
  }
  return out;
}

/// Dense row-major Jacobian ∂out_r/∂in_c.
struct Jacobian {
  int rows = 0, cols = 0;
  Vec a;
  Jacobian() = default;
  Jacobian(int r, int c) : rows(r), cols(c), a(static_cast<std::size_t>(r) * c, 0.0) {}
  double& at(int r, int c) { return a[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return a[static_cast<std::size_t>(r) * cols + c]; }
};

// Analytic partial derivatives of each primitive (tape-backed). The pair
// order matches the argument order.
Jacobian jac_rho_point(double birth, double death, const RhoConfig& cfg);  // m×2
std::pair<Jacobian, Jacobian> jac_phi(const Vec& x, const Vec& theta);
std::pair<Jacobian, Jacobian> jac_mobius_add(const Vec& x, const Vec& y);
std::pair<Jacobian, Jacobian> jac_exp_map(const Vec& x, const Vec& v);
std::pair<Jacobian, Jacobian> jac_log_map(const Vec& x, const Vec& y);
Jacobian jac_chart(const Vec& y);
std::pair<Vec, Vec> grad_ball_distance(const Vec& x, const Vec& y);

}  // namespace pdball
