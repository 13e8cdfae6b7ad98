#include "pdball/hyperbolic.hpp"

#include <cmath>

namespace pdball {

void validate(const RhoConfig& cfg) {
  if (cfg.dim() < 1) throw std::invalid_argument("rho config: needs at least one mean");
  for (const auto& mu : cfg.means)
    if (!std::isfinite(mu[0]) || !std::isfinite(mu[1]))
      throw std::invalid_argument("rho config: non-finite mean");
  for (int i = 0; i < cfg.dim(); ++i)
    for (int j = i + 1; j < cfg.dim(); ++j)
      if (cfg.means[i] == cfg.means[j])
        throw std::invalid_argument("rho config: means must be pairwise distinct");
}

RhoConfig lattice_rho_config(int m, double max_birth, double p_min, double p_max) {
  if (m < 1) throw std::invalid_argument("rho config: m must be positive");
  if (!(p_max > 0.0)) p_max = 1.0;
  if (!(p_min > 0.0) || p_min > p_max) p_min = p_max;
  if (!(max_birth > 0.0)) max_birth = 0.0;
  double lo = std::log(p_min), hi = std::log(p_max);
  if (max_birth == 0.0 && hi - lo < 1e-9) {
    lo -= 0.5;
    hi += 0.5;
  }
  RhoConfig cfg;
  cfg.means.reserve(m);
  for (int i = 0; i < m; ++i) {
    const double t = m == 1 ? 0.5 : static_cast<double>(i) / (m - 1);
    cfg.means.push_back({t * max_birth, lo + t * (hi - lo)});
  }
  validate(cfg);
  return cfg;
}

PhiParams random_phi_params(int m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-0.05, 0.05);
  PhiParams p;
  p.theta.reserve(m);
  for (int i = 0; i < m; ++i) p.theta.push_back(u(rng));
  return p;
}

namespace {

VecT<Var> leaves(Tape& t, const Vec& v) {
  VecT<Var> out;
  out.reserve(v.size());
  for (double x : v) out.push_back(make_var(t, x));
  return out;
}

Jacobian pull_back(const Tape& t, const VecT<Var>& out, const VecT<Var>& in) {
  Jacobian j(static_cast<int>(out.size()), static_cast<int>(in.size()));
  for (int r = 0; r < j.rows; ++r) {
    const Vec adj = t.backward(out[r].id);
    for (int c = 0; c < j.cols; ++c) j.at(r, c) = adj[in[c].id];
  }
  return j;
}

}  // namespace

Jacobian jac_rho_point(double birth, double death, const RhoConfig& cfg) {
  Tape t;
  const Var b = make_var(t, birth);
  const Var d = make_var(t, death);
  const VecT<Var> out = rho(b, d, cfg);
  return pull_back(t, out, {b, d});
}

std::pair<Jacobian, Jacobian> jac_phi(const Vec& x, const Vec& theta) {
  Tape t;
  const VecT<Var> vx = leaves(t, x);
  const VecT<Var> vt = leaves(t, theta);
  const VecT<Var> out = phi(vx, vt);
  return {pull_back(t, out, vx), pull_back(t, out, vt)};
}

std::pair<Jacobian, Jacobian> jac_mobius_add(const Vec& x, const Vec& y) {
  Tape t;
  const VecT<Var> vx = leaves(t, x);
  const VecT<Var> vy = leaves(t, y);
  const VecT<Var> out = mobius_add(vx, vy);
  return {pull_back(t, out, vx), pull_back(t, out, vy)};
}

std::pair<Jacobian, Jacobian> jac_exp_map(const Vec& x, const Vec& v) {
  Tape t;
  const VecT<Var> vx = leaves(t, x);
  const VecT<Var> vv = leaves(t, v);
  const VecT<Var> out = exp_map(vx, vv);
  return {pull_back(t, out, vx), pull_back(t, out, vv)};
}

std::pair<Jacobian, Jacobian> jac_log_map(const Vec& x, const Vec& y) {
  Tape t;
  const VecT<Var> vx = leaves(t, x);
  const VecT<Var> vy = leaves(t, y);
  const VecT<Var> out = log_map(vx, vy);
  return {pull_back(t, out, vx), pull_back(t, out, vy)};
}

Jacobian jac_chart(const Vec& y) {
  Tape t;
  const VecT<Var> vy = leaves(t, y);
  const VecT<Var> out = chart(vy);
  return pull_back(t, out, vy);
}

std::pair<Vec, Vec> grad_ball_distance(const Vec& x, const Vec& y) {
  Tape t;
  const VecT<Var> vx = leaves(t, x);
  const VecT<Var> vy = leaves(t, y);
  const Var d = ball_distance(vx, vy);
  const Vec adj = t.backward(d.id);
  Vec gx, gy;
  for (const Var& v : vx) gx.push_back(adj[v.id]);
  for (const Var& v : vy) gy.push_back(adj[v.id]);
  return {gx, gy};
}

}  // namespace pdball
