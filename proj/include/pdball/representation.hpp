#pragma once

#include <string>

#include "pdball/hyperbolic.hpp"
#include "pdball/persistence.hpp"

namespace pdball {

enum class Variant { poinc, hybrid, eucl };
enum class EssentialPolicy { max_scale, separate_base };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);
std::string to_string(EssentialPolicy p);
EssentialPolicy essential_policy_from_string(const std::string& s);

/// Parameters of the full representation: K projection bases per homology
/// dimension, each with its own φ parameters; the ρ means and the essential
/// substitution value are shared. Base point fixed at the origin.
struct ReprParams {
  Variant variant = Variant::poinc;
  int m = 3;
  int K = 5;
  int n_hom_dims = 2;
  EssentialPolicy essential_policy = EssentialPolicy::max_scale;
  RhoConfig rho_cfg;
  double max_scale = 1.0;        // death value substituted for essentials
  std::vector<PhiParams> phis;   // [dim*K + base]

  int n_slots() const { return K * n_hom_dims; }
  int feature_dim() const { return n_slots() * m; }
  PhiParams& phi_at(int dim, int base) { return phis[dim * K + base]; }
  const PhiParams& phi_at(int dim, int base) const { return phis[dim * K + base]; }
  /// Under the separate-base policy, the upper half of the bases receives the
  /// substituted essential points and the lower half the finite points.
  bool base_is_essential(int base) const {
    return essential_policy == EssentialPolicy::separate_base && base >= (K + 1) / 2;
  }
};

void validate(const ReprParams& p);
ReprParams make_repr_params(Variant variant, int m, int K, int n_hom_dims,
                            EssentialPolicy policy, RhoConfig rho_cfg, double max_scale,
                            std::mt19937_64& rng);

struct ReprOutput {
  // One m-vector per (dim, base) slot, index dim*K + base: a ball point for
  // the poinc variant, a plain vector for hybrid/eucl.
  std::vector<Vec> slots;
  // Chart-projected (poinc) or raw (hybrid/eucl) slots, concatenated in slot
  // order; length K × n_hom_dims × m.
  Vec features;
};

/// Φ(D; θ) = exp₀(Σ_x log₀(φ(ρ(x)))) per slot for the poinc variant; hybrid
/// replaces exp/log by identities, eucl replaces φ(x) by x + θ. Points are
/// expanded by multiplicity and summed in (birth, death) order; diagonal
/// points contribute exactly nothing.
ReprOutput represent(const PersistenceDiagram& d, const ReprParams& p);

/// Gradients of a scalar loss w.r.t. every PhiParams vector, given the loss
/// gradient w.r.t. the feature vector. Layout matches ReprParams::phis.
std::vector<Vec> represent_grad(const PersistenceDiagram& d, const ReprParams& p,
                                const Vec& upstream);

/// Death = max_scale for every essential point. Under the max-scale policy
/// this is the diagram the representation consumes; under separate-base it is
/// the diagram seen by the essential bases (which receive nothing else).
PersistenceDiagram essential_substitute(const PersistenceDiagram& d, EssentialPolicy policy,
                                        double max_scale);
PersistenceDiagram finite_part(const PersistenceDiagram& d);

/// Per-dimension histogram of persistence values over [0, max_scale], plus —
/// when include_essential — the birth-time histogram of essential points.
/// Concatenation order: dims ascending, finite block then essential block.
Vec baseline_histogram(const PersistenceDiagram& d, int bins, bool include_essential,
                       double max_scale, int n_hom_dims = 2);

}  // namespace pdball
