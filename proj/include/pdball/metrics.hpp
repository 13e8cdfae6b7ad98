#pragma once

#include "pdball/representation.hpp"

namespace pdball {

/// Raised when two diagrams have different essential counts and no finite
/// surrogate is configured — no bijection respecting essentials exists.
struct incomparable_diagrams : std::runtime_error {
  using std::runtime_error::runtime_error;
};

enum class EssentialMode {
  match_by_birth,  // essential-to-essential 1-D transport on birth values
  as_finite,       // substitute death = max_scale and treat as ordinary points
};

struct WassersteinOpts {
  EssentialMode essential = EssentialMode::match_by_birth;
  double max_scale = 0.0;  // surrogate death under as_finite
};

/// Exact min-cost assignment on a square cost matrix (Hungarian algorithm
/// with potentials, O(n³)).
struct Assignment {
  double cost = 0.0;
  std::vector<int> col_of_row;
};
Assignment hungarian(const std::vector<Vec>& cost);

/// Wasserstein-p distance between the dim-slices of two diagrams, Euclidean
/// ground metric, diagonal projections allowed; p = kInf gives the bottleneck
/// distance (max matched edge).
double wasserstein(const PersistenceDiagram& a, const PersistenceDiagram& b, double p, int dim,
                   const WassersteinOpts& opts = {});
double bottleneck(const PersistenceDiagram& a, const PersistenceDiagram& b, int dim,
                  const WassersteinOpts& opts = {});

/// Condensed pairwise w_p matrix (row-major n×n, zero diagonal); parallel
/// over pairs, plus the serial reference kept for testing.
std::vector<double> pairwise_wasserstein(const std::vector<PersistenceDiagram>& ds, double p,
                                         int dim, const WassersteinOpts& opts = {});
std::vector<double> pairwise_wasserstein_serial(const std::vector<PersistenceDiagram>& ds,
                                                double p, int dim,
                                                const WassersteinOpts& opts = {});

struct StabilityRow {
  int pair = 0;
  int dim = 0;
  double w1 = 0.0;
  double d_ball = 0.0;
  double ratio = 0.0;  // d_ball / w1, 0 when w1 <= 1e-9
};

struct StabilityReport {
  std::vector<StabilityRow> rows;
  double max_ratio = 0.0;  // over rows with w1 > 1e-9
};

/// Lipschitz audit: for each perturbed diagram and homology dimension,
/// w₁(base, perturbed) against the distance between the two representations
/// (max over projection bases; ball distance for poinc, Euclidean
/// otherwise). Both representations use the same parameters.
StabilityReport stability_audit(const PersistenceDiagram& base,
                                const std::vector<PersistenceDiagram>& perturbed,
                                const ReprParams& params);

}  // namespace pdball
