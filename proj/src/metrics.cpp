#include "pdball/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>

namespace pdball {

Assignment hungarian(const std::vector<Vec>& cost) {
  const int n = static_cast<int>(cost.size());
  Assignment res;
  if (n == 0) return res;
  for (const Vec& row : cost)
    if (static_cast<int>(row.size()) != n)
      throw std::invalid_argument("hungarian: cost matrix must be square");

  // Potentials-based shortest augmenting paths, 1-indexed internals.
  std::vector<double> u(n + 1, 0.0), v(n + 1, 0.0);
  std::vector<int> p(n + 1, 0), way(n + 1, 0);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::vector<double> minv(n + 1, kInf);
    std::vector<char> used(n + 1, 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = kInf;
      int j1 = 0;
      for (int j = 1; j <= n; ++j) {
        if (used[j]) continue;
        const double cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= n; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0 != 0);
  }
  res.col_of_row.assign(n, -1);
  for (int j = 1; j <= n; ++j)
    if (p[j] != 0) res.col_of_row[p[j] - 1] = j - 1;
  for (int i = 0; i < n; ++i) res.cost += cost[i][res.col_of_row[i]];
  return res;
}

namespace {

struct Slice {
  std::vector<std::pair<double, double>> finite;
  std::vector<double> essential_births;
};

Slice dim_slice(const PersistenceDiagram& d, int dim, const WassersteinOpts& opts) {
  Slice s;
  for (const DiagramPoint& p : d.points) {
    if (p.dim != dim) continue;
    for (long long k = 0; k < p.mult; ++k) {
      if (!p.essential())
        s.finite.push_back({p.birth, p.death});
      else if (opts.essential == EssentialMode::as_finite)
        s.finite.push_back({p.birth, opts.max_scale});
      else
        s.essential_births.push_back(p.birth);
    }
  }
  std::sort(s.finite.begin(), s.finite.end());
  std::sort(s.essential_births.begin(), s.essential_births.end());
  return s;
}

double point_dist(const std::pair<double, double>& a, const std::pair<double, double>& b) {
  return std::hypot(a.first - b.first, a.second - b.second);
}

double diag_dist(const std::pair<double, double>& a) {
  return (a.second - a.first) / std::numbers::sqrt2;
}

// Square augmented cost matrix: rows = A-points then B-diagonals, columns =
// B-points then A-diagonals.
std::vector<Vec> augmented_costs(const Slice& a, const Slice& b) {
  const int na = static_cast<int>(a.finite.size());
  const int nb = static_cast<int>(b.finite.size());
  const int n = na + nb;
  std::vector<Vec> c(n, Vec(n, 0.0));
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) {
      if (i < na && j < nb)
        c[i][j] = point_dist(a.finite[i], b.finite[j]);
      else if (i < na)
        c[i][j] = diag_dist(a.finite[i]);
      else if (j < nb)
        c[i][j] = diag_dist(b.finite[j]);
    }
  return c;
}

// Smallest c such that a perfect matching using only edges of cost ≤ c
// exists (binary search over the distinct costs + Kuhn's matching).
double bottleneck_assignment(const std::vector<Vec>& cost) {
  const int n = static_cast<int>(cost.size());
  if (n == 0) return 0.0;
  Vec cands;
  cands.push_back(0.0);
  for (const Vec& row : cost) cands.insert(cands.end(), row.begin(), row.end());
  std::sort(cands.begin(), cands.end());
  cands.erase(std::unique(cands.begin(), cands.end()), cands.end());

  std::vector<int> match_col(n);
  auto feasible = [&](double limit) {
    std::fill(match_col.begin(), match_col.end(), -1);
    std::vector<char> visited(n);
    std::function<bool(int)> try_row = [&](int r) {
      for (int j = 0; j < n; ++j) {
        if (visited[j] || cost[r][j] > limit) continue;
        visited[j] = 1;
        if (match_col[j] < 0 || try_row(match_col[j])) {
          match_col[j] = r;
          return true;
        }
      }
      return false;
    };
    for (int r = 0; r < n; ++r) {
      std::fill(visited.begin(), visited.end(), 0);
      if (!try_row(r)) return false;
    }
    return true;
  };

  std::size_t lo = 0, hi = cands.size() - 1;
  while (lo < hi) {
    const std::size_t mid = (lo + hi) / 2;
    if (feasible(cands[mid]))
      hi = mid;
    else
      lo = mid + 1;
  }
  return cands[lo];
}

}  // namespace

namespace {

// Strict lexicographic order on the raw point lists; any total order works,
// it only has to pick the same representative for (a, b) and (b, a).
bool precedes(const PersistenceDiagram& a, const PersistenceDiagram& b) {
  auto lt = [](const DiagramPoint& x, const DiagramPoint& y) {
    return std::tie(x.dim, x.birth, x.death, x.mult) < std::tie(y.dim, y.birth, y.death, y.mult);
  };
  return std::lexicographical_compare(a.points.begin(), a.points.end(), b.points.begin(),
                                      b.points.end(), lt);
}

}  // namespace

double wasserstein(const PersistenceDiagram& a, const PersistenceDiagram& b, double p, int dim,
                   const WassersteinOpts& opts) {
  if (!(p >= 1.0)) throw std::invalid_argument("wasserstein: p must be >= 1");
  // Bit-exact symmetry: both argument orders run the identical computation.
  if (precedes(b, a)) return wasserstein(b, a, p, dim, opts);
  const Slice sa = dim_slice(a, dim, opts);
  const Slice sb = dim_slice(b, dim, opts);
  if (sa.essential_births.size() != sb.essential_births.size())
    throw incomparable_diagrams(
        "wasserstein: diagrams have different essential counts in dim " + std::to_string(dim));

  const std::vector<Vec> costs = augmented_costs(sa, sb);
  if (p == kInf) {
    double worst = bottleneck_assignment(costs);
    for (std::size_t i = 0; i < sa.essential_births.size(); ++i)
      worst = std::max(worst, std::abs(sa.essential_births[i] - sb.essential_births[i]));
    return worst;
  }

  double total = 0.0;
  if (!costs.empty()) {
    std::vector<Vec> powered = costs;
    for (Vec& row : powered)
      for (double& c : row) c = std::pow(c, p);
    total += hungarian(powered).cost;
  }
  for (std::size_t i = 0; i < sa.essential_births.size(); ++i)
    total += std::pow(std::abs(sa.essential_births[i] - sb.essential_births[i]), p);
  return std::pow(total, 1.0 / p);
}

double bottleneck(const PersistenceDiagram& a, const PersistenceDiagram& b, int dim,
                  const WassersteinOpts& opts) {
  return wasserstein(a, b, kInf, dim, opts);
}

namespace {

std::vector<double> pairwise_impl(const std::vector<PersistenceDiagram>& ds, double p, int dim,
                                  const WassersteinOpts& opts, bool parallel) {
  const int n = static_cast<int>(ds.size());
  std::vector<double> m(static_cast<std::size_t>(n) * n, 0.0);
  std::vector<std::pair<int, int>> pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) pairs.push_back({i, j});
  const int np = static_cast<int>(pairs.size());
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int k = 0; k < np; ++k) {
    const auto [i, j] = pairs[k];
    const double w = wasserstein(ds[i], ds[j], p, dim, opts);
    m[static_cast<std::size_t>(i) * n + j] = w;
    m[static_cast<std::size_t>(j) * n + i] = w;
  }
  return m;
}

}  // namespace

std::vector<double> pairwise_wasserstein(const std::vector<PersistenceDiagram>& ds, double p,
                                         int dim, const WassersteinOpts& opts) {
  return pairwise_impl(ds, p, dim, opts, true);
}

std::vector<double> pairwise_wasserstein_serial(const std::vector<PersistenceDiagram>& ds,
                                                double p, int dim, const WassersteinOpts& opts) {
  return pairwise_impl(ds, p, dim, opts, false);
}

StabilityReport stability_audit(const PersistenceDiagram& base,
                                const std::vector<PersistenceDiagram>& perturbed,
                                const ReprParams& params) {
  StabilityReport report;
  const ReprOutput rb = represent(base, params);
  for (std::size_t pi = 0; pi < perturbed.size(); ++pi) {
    const ReprOutput rp = represent(perturbed[pi], params);
    for (int dim = 0; dim < params.n_hom_dims; ++dim) {
      StabilityRow row;
      row.pair = static_cast<int>(pi);
      row.dim = dim;
      row.w1 = wasserstein(base, perturbed[pi], 1.0, dim);
      for (int k = 0; k < params.K; ++k) {
        const Vec& x = rb.slots[dim * params.K + k];
        const Vec& y = rp.slots[dim * params.K + k];
        double dist;
        if (params.variant == Variant::poinc) {
          dist = ball_distance(x, y);
        } else {
          double s = 0.0;
          for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - y[i]) * (x[i] - y[i]);
          dist = std::sqrt(s);
        }
        row.d_ball = std::max(row.d_ball, dist);
      }
      if (row.w1 > 1e-9) {
        row.ratio = row.d_ball / row.w1;
        report.max_ratio = std::max(report.max_ratio, row.ratio);
      }
      report.rows.push_back(row);
    }
  }
  return report;
}

}  // namespace pdball
