#include "pdball/representation.hpp"

#include <algorithm>
#include <cmath>

namespace pdball {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::poinc: return "poinc";
    case Variant::hybrid: return "hybrid";
    case Variant::eucl: return "eucl";
  }
  return "?";
}

Variant variant_from_string(const std::string& s) {
  if (s == "poinc") return Variant::poinc;
  if (s == "hybrid") return Variant::hybrid;
  if (s == "eucl") return Variant::eucl;
  throw std::invalid_argument("unknown variant: " + s);
}

std::string to_string(EssentialPolicy p) {
  return p == EssentialPolicy::max_scale ? "max-scale" : "separate-base";
}

EssentialPolicy essential_policy_from_string(const std::string& s) {
  if (s == "max-scale") return EssentialPolicy::max_scale;
  if (s == "separate-base") return EssentialPolicy::separate_base;
  throw std::invalid_argument("unknown essential policy: " + s);
}

void validate(const ReprParams& p) {
  if (p.m < 2) throw std::invalid_argument("representation: m must be at least 2");
  if (p.K < 1) throw std::invalid_argument("representation: K must be positive");
  if (p.n_hom_dims < 1 || p.n_hom_dims > 3)
    throw std::invalid_argument("representation: homology dimensions out of range");
  if (p.essential_policy == EssentialPolicy::separate_base && p.K < 2)
    throw std::invalid_argument("representation: separate-base policy needs K >= 2");
  if (p.rho_cfg.dim() != p.m)
    throw std::invalid_argument("representation: rho means must have dimension m");
  validate(p.rho_cfg);
  if (static_cast<int>(p.phis.size()) != p.n_slots())
    throw std::invalid_argument("representation: wrong number of phi parameter vectors");
  for (const PhiParams& ph : p.phis)
    if (static_cast<int>(ph.theta.size()) != p.m)
      throw std::invalid_argument("representation: phi parameter vector has wrong size");
  if (!std::isfinite(p.max_scale))
    throw std::invalid_argument("representation: max_scale must be finite");
}

ReprParams make_repr_params(Variant variant, int m, int K, int n_hom_dims,
                            EssentialPolicy policy, RhoConfig rho_cfg, double max_scale,
                            std::mt19937_64& rng) {
  ReprParams p;
  p.variant = variant;
  p.m = m;
  p.K = K;
  p.n_hom_dims = n_hom_dims;
  p.essential_policy = policy;
  p.rho_cfg = std::move(rho_cfg);
  p.max_scale = max_scale;
  p.phis.reserve(p.n_slots());
  for (int i = 0; i < p.n_slots(); ++i) p.phis.push_back(random_phi_params(m, rng));
  validate(p);
  return p;
}

PersistenceDiagram finite_part(const PersistenceDiagram& d) {
  PersistenceDiagram out;
  out.max_filtration = d.max_filtration;
  for (const DiagramPoint& p : d.points)
    if (!p.essential()) out.points.push_back(p);
  return out;
}

PersistenceDiagram essential_substitute(const PersistenceDiagram& d, EssentialPolicy policy,
                                        double max_scale) {
  PersistenceDiagram out;
  out.max_filtration = d.max_filtration;
  for (const DiagramPoint& p : d.points) {
    if (p.essential()) {
      DiagramPoint q = p;
      q.death = max_scale;
      out.points.push_back(q);
    } else if (policy == EssentialPolicy::max_scale) {
      out.points.push_back(p);
    }
  }
  normalize(out);
  return out;
}

namespace {

// (birth, death) pairs of one homology dimension, expanded by multiplicity
// and sorted, so the tangent sum has a fixed order and a point with
// multiplicity k contributes exactly like k copies.
std::vector<std::pair<double, double>> expanded_points(const PersistenceDiagram& d, int dim,
                                                       bool essentials, double max_scale) {
  std::vector<std::pair<double, double>> pts;
  for (const DiagramPoint& p : d.points) {
    if (p.dim != dim) continue;
    if (p.essential() != essentials) continue;
    const double death = p.essential() ? max_scale : p.death;
    for (long long k = 0; k < p.mult; ++k) pts.push_back({p.birth, death});
  }
  std::sort(pts.begin(), pts.end());
  return pts;
}

template <class S>
VecT<S> constant_vec(const S& like, int m, double value) {
  VecT<S> v;
  v.reserve(m);
  for (int i = 0; i < m; ++i) v.push_back(detail::const_like(like, value));
  return v;
}

// One (dim, base) slot of Φ: tangent-space sum over the active points.
template <class S>
VecT<S> represent_slot(const std::vector<std::pair<double, double>>& pts,
                       const VecT<S>& theta, const RhoConfig& cfg, Variant variant) {
  const int m = cfg.dim();
  VecT<S> acc = constant_vec(theta[0], m, 0.0);
  const VecT<S> origin = constant_vec(theta[0], m, 0.0);
  for (const auto& [b, d] : pts) {
    if (!(d > b)) continue;  // diagonal points contribute exactly nothing
    const Vec r = rho(b, d, cfg);
    VecT<S> term;
    if (variant == Variant::eucl) {
      term.reserve(m);
      for (int i = 0; i < m; ++i) term.push_back(theta[i] + r[i]);
    } else {
      term = phi(r, theta);
      if (variant == Variant::poinc) term = log_map(origin, term);
    }
    for (int i = 0; i < m; ++i) acc[i] = acc[i] + term[i];
  }
  if (variant == Variant::poinc) return exp_map(origin, acc);
  return acc;
}

std::vector<std::vector<std::pair<double, double>>> slot_points(const PersistenceDiagram& d,
                                                                const ReprParams& p) {
  std::vector<std::vector<std::pair<double, double>>> per_slot(p.n_slots());
  for (int dim = 0; dim < p.n_hom_dims; ++dim) {
    const auto finite = expanded_points(d, dim, false, p.max_scale);
    const auto essential = expanded_points(d, dim, true, p.max_scale);
    for (int base = 0; base < p.K; ++base) {
      auto& pts = per_slot[dim * p.K + base];
      if (p.essential_policy == EssentialPolicy::max_scale) {
        pts = finite;
        pts.insert(pts.end(), essential.begin(), essential.end());
        std::sort(pts.begin(), pts.end());
      } else {
        pts = p.base_is_essential(base) ? essential : finite;
      }
    }
  }
  return per_slot;
}

}  // namespace

ReprOutput represent(const PersistenceDiagram& d, const ReprParams& p) {
  validate(p);
  const auto per_slot = slot_points(d, p);
  ReprOutput out;
  out.slots.resize(p.n_slots());
  out.features.reserve(p.feature_dim());
  for (int slot = 0; slot < p.n_slots(); ++slot) {
    Vec y = represent_slot(per_slot[slot], p.phis[slot].theta, p.rho_cfg, p.variant);
    const Vec f = p.variant == Variant::poinc ? chart(y) : y;
    out.features.insert(out.features.end(), f.begin(), f.end());
    out.slots[slot] = std::move(y);
  }
  return out;
}

std::vector<Vec> represent_grad(const PersistenceDiagram& d, const ReprParams& p,
                                const Vec& upstream) {
  validate(p);
  if (static_cast<int>(upstream.size()) != p.feature_dim())
    throw std::invalid_argument("representation: upstream gradient has wrong size");
  const auto per_slot = slot_points(d, p);
  std::vector<Vec> grads(p.n_slots());
  for (int slot = 0; slot < p.n_slots(); ++slot) {
    Tape t;
    VecT<Var> theta;
    theta.reserve(p.m);
    for (double v : p.phis[slot].theta) theta.push_back(make_var(t, v));
    VecT<Var> y = represent_slot(per_slot[slot], theta, p.rho_cfg, p.variant);
    const VecT<Var> f = p.variant == Variant::poinc ? chart(y) : y;
    std::vector<int> roots;
    Vec seeds;
    for (int i = 0; i < p.m; ++i) {
      roots.push_back(f[i].id);
      seeds.push_back(upstream[static_cast<std::size_t>(slot) * p.m + i]);
    }
    const Vec adj = t.backward(roots, seeds);
    Vec g;
    g.reserve(p.m);
    for (const Var& v : theta) g.push_back(adj[v.id]);
    grads[slot] = std::move(g);
  }
  return grads;
}

Vec baseline_histogram(const PersistenceDiagram& d, int bins, bool include_essential,
                       double max_scale, int n_hom_dims) {
  if (bins < 1) throw std::invalid_argument("baseline: bins must be positive");
  if (!(max_scale > 0.0)) throw std::invalid_argument("baseline: max_scale must be positive");
  auto bin_of = [&](double v) {
    const int b = static_cast<int>(std::floor(v / max_scale * bins));
    return std::clamp(b, 0, bins - 1);
  };
  const int blocks_per_dim = include_essential ? 2 : 1;
  Vec out(static_cast<std::size_t>(n_hom_dims) * blocks_per_dim * bins, 0.0);
  for (const DiagramPoint& p : d.points) {
    if (p.dim < 0 || p.dim >= n_hom_dims) continue;
    if (!p.essential()) {
      const int b = bin_of(p.death - p.birth);
      out[static_cast<std::size_t>(p.dim) * blocks_per_dim * bins + b] += p.mult;
    } else if (include_essential) {
      const int b = bin_of(p.birth);
      out[static_cast<std::size_t>(p.dim) * blocks_per_dim * bins + bins + b] += p.mult;
    }
  }
  return out;
}

}  // namespace pdball
