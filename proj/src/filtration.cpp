#include "pdball/filtration.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <queue>
#include <unordered_map>

namespace pdball {

double FilteredComplex::max_value() const {
  double best = 0.0;
  for (const Cell& c : cells) best = std::max(best, c.value);
  return best;
}

void validate_filtration(const FilteredComplex& fc) {
  const int n = static_cast<int>(fc.cells.size());
  if (static_cast<int>(fc.ordering.size()) != n)
    throw std::invalid_argument("complex: ordering size mismatch");
  std::vector<bool> seen(n, false);
  for (int idx : fc.ordering) {
    if (idx < 0 || idx >= n || seen[idx])
      throw std::invalid_argument("complex: ordering is not a permutation");
    seen[idx] = true;
  }
  for (int i = 0; i < n; ++i) {
    const Cell& c = fc.cells[i];
    if (c.id != i) throw std::invalid_argument("complex: cell id must equal its index");
    if (c.dim < 0 || c.dim > 2) throw std::invalid_argument("complex: cell dimension out of range");
    if (!std::isfinite(c.value)) throw std::invalid_argument("complex: non-finite cell value");
    if (c.dim == 0 && !c.boundary.empty())
      throw std::invalid_argument("complex: vertex with nonempty boundary");
    if (c.dim > 0 && (c.boundary.size() < 2 || c.boundary.size() > 4))
      throw std::invalid_argument("complex: boundary face count out of range");
    if (!std::is_sorted(c.boundary.begin(), c.boundary.end()))
      throw std::invalid_argument("complex: boundary must be sorted");
    for (int f : c.boundary) {
      if (f < 0 || f >= n || fc.cells[f].dim != c.dim - 1)
        throw std::invalid_argument("complex: boundary face has wrong dimension");
      if (fc.cells[f].value > c.value)
        throw std::invalid_argument("complex: sublevel property violated");
    }
  }
}

FilteredComplex finalize_complex(std::vector<Cell> cells) {
  FilteredComplex fc;
  fc.cells = std::move(cells);
  fc.ordering.resize(fc.cells.size());
  for (std::size_t i = 0; i < fc.ordering.size(); ++i) fc.ordering[i] = static_cast<int>(i);
  std::sort(fc.ordering.begin(), fc.ordering.end(), [&](int a, int b) {
    const Cell& ca = fc.cells[a];
    const Cell& cb = fc.cells[b];
    if (ca.value != cb.value) return ca.value < cb.value;
    if (ca.dim != cb.dim) return ca.dim < cb.dim;
    return ca.id < cb.id;
  });
  validate_filtration(fc);
  return fc;
}

namespace {

struct Adjacency {
  std::vector<std::vector<std::pair<int, double>>> nbr;
  explicit Adjacency(const Graph& g) : nbr(g.n_vertices) {
    for (const auto& e : g.edges) {
      nbr[e.u].push_back({e.v, e.w});
      nbr[e.v].push_back({e.u, e.w});
    }
  }
};

void dijkstra_row(const Adjacency& adj, int src, DistanceMatrix& m) {
  const int n = static_cast<int>(adj.nbr.size());
  std::vector<double> dist(n, kInf);
  dist[src] = 0.0;
  using Item = std::pair<double, int>;
  std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
  q.push({0.0, src});
  while (!q.empty()) {
    auto [d, u] = q.top();
    q.pop();
    if (d > dist[u]) continue;
    for (auto [v, w] : adj.nbr[u]) {
      const double nd = d + w;
      if (nd < dist[v]) {
        dist[v] = nd;
        q.push({nd, v});
      }
    }
  }
  for (int v = 0; v < n; ++v) m.at(src, v) = dist[v];
}

// Dijkstra from s and from v can sum the same path in different association
// orders; taking the min over both directions restores exact symmetry.
void symmetrize(DistanceMatrix& m) {
  for (int i = 0; i < m.n; ++i)
    for (int j = i + 1; j < m.n; ++j) {
      const double d = std::min(m.at(i, j), m.at(j, i));
      m.at(i, j) = d;
      m.at(j, i) = d;
    }
}

}  // namespace

DistanceMatrix shortest_path_metric(const Graph& g) {
  validate(g);
  const Adjacency adj(g);
  DistanceMatrix m(g.n_vertices);
#pragma omp parallel for schedule(dynamic)
  for (int s = 0; s < g.n_vertices; ++s) dijkstra_row(adj, s, m);
  symmetrize(m);
  return m;
}

DistanceMatrix shortest_path_metric_serial(const Graph& g) {
  validate(g);
  const int n = g.n_vertices;
  DistanceMatrix m(n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) m.at(i, j) = i == j ? 0.0 : kInf;
  for (const auto& e : g.edges) {
    m.at(e.u, e.v) = std::min(m.at(e.u, e.v), e.w);
    m.at(e.v, e.u) = std::min(m.at(e.v, e.u), e.w);
  }
  for (int k = 0; k < n; ++k)
    for (int i = 0; i < n; ++i) {
      if (m.at(i, k) == kInf) continue;
      for (int j = 0; j < n; ++j) {
        const double via = m.at(i, k) + m.at(k, j);
        if (via < m.at(i, j)) m.at(i, j) = via;
      }
    }
  symmetrize(m);
  return m;
}

FilteredComplex vietoris_rips(const DistanceMatrix& d, int max_dim, double max_scale) {
  if (max_dim < 0 || max_dim > 2)
    throw std::invalid_argument("vietoris-rips: max_dim must be 0, 1, or 2");
  const int n = d.n;
  for (int i = 0; i < n; ++i) {
    if (d.at(i, i) != 0.0) throw std::invalid_argument("vietoris-rips: nonzero diagonal");
    for (int j = i + 1; j < n; ++j)
      if (d.at(i, j) != d.at(j, i))
        throw std::invalid_argument("vietoris-rips: non-symmetric distance matrix");
  }
  std::vector<Cell> cells;
  for (int v = 0; v < n; ++v) cells.push_back({v, 0, {}, 0.0});
  // Edge ids for triangle boundaries.
  std::unordered_map<long long, int> edge_id;
  auto key = [n](int u, int v) { return static_cast<long long>(u) * n + v; };
  if (max_dim >= 1) {
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) {
        const double w = d.at(u, v);
        if (!(w <= max_scale) || !std::isfinite(w)) continue;
        const int id = static_cast<int>(cells.size());
        edge_id[key(u, v)] = id;
        cells.push_back({id, 1, {u, v}, w});
      }
  }
  if (max_dim >= 2) {
    for (int u = 0; u < n; ++u)
      for (int v = u + 1; v < n; ++v) {
        auto euv = edge_id.find(key(u, v));
        if (euv == edge_id.end()) continue;
        for (int w = v + 1; w < n; ++w) {
          auto euw = edge_id.find(key(u, w));
          if (euw == edge_id.end()) continue;
          auto evw = edge_id.find(key(v, w));
          if (evw == edge_id.end()) continue;
          const double value = std::max({d.at(u, v), d.at(u, w), d.at(v, w)});
          std::vector<int> bd = {euv->second, euw->second, evw->second};
          std::sort(bd.begin(), bd.end());
          cells.push_back({static_cast<int>(cells.size()), 2, std::move(bd), value});
        }
      }
  }
  return finalize_complex(std::move(cells));
}

FilteredComplex degree_filtration(const Graph& g) {
  validate(g);
  const std::vector<int> deg = vertex_degrees(g);
  std::vector<Cell> cells;
  for (int v = 0; v < g.n_vertices; ++v)
    cells.push_back({v, 0, {}, static_cast<double>(deg[v])});
  for (const auto& e : g.edges) {
    std::vector<int> bd = {std::min(e.u, e.v), std::max(e.u, e.v)};
    cells.push_back({static_cast<int>(cells.size()), 1, std::move(bd),
                     static_cast<double>(std::max(deg[e.u], deg[e.v]))});
  }
  return finalize_complex(std::move(cells));
}

FilteredComplex cubical_filtration(const GreyImage& img) {
  validate(img);
  const int w = img.width, h = img.height;
  const int nv = (w + 1) * (h + 1);
  const int nhe = w * (h + 1);
  const int nve = (w + 1) * h;
  auto vertex = [w](int x, int y) { return y * (w + 1) + x; };
  auto hedge = [w, nv](int x, int y) { return nv + y * w + x; };
  auto vedge = [w, nv, nhe](int x, int y) { return nv + nhe + y * (w + 1) + x; };
  auto square = [w, nv, nhe, nve](int x, int y) { return nv + nhe + nve + y * w + x; };
  // Face value = min over incident pixels.
  auto pixel_min = [&](int x0, int y0, int x1, int y1) {
    double m = kInf;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (x >= 0 && x < w && y >= 0 && y < h) m = std::min(m, img.at(x, y));
    return m;
  };
  std::vector<Cell> cells(nv + nhe + nve + w * h);
  for (int y = 0; y <= h; ++y)
    for (int x = 0; x <= w; ++x) {
      const int id = vertex(x, y);
      cells[id] = {id, 0, {}, pixel_min(x - 1, y - 1, x, y)};
    }
  for (int y = 0; y <= h; ++y)
    for (int x = 0; x < w; ++x) {
      const int id = hedge(x, y);
      cells[id] = {id, 1, {vertex(x, y), vertex(x + 1, y)}, pixel_min(x, y - 1, x, y)};
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x <= w; ++x) {
      const int id = vedge(x, y);
      std::vector<int> bd = {vertex(x, y), vertex(x, y + 1)};
      std::sort(bd.begin(), bd.end());
      cells[id] = {id, 1, std::move(bd), pixel_min(x - 1, y, x, y)};
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int id = square(x, y);
      std::vector<int> bd = {hedge(x, y), hedge(x, y + 1), vedge(x, y), vedge(x + 1, y)};
      std::sort(bd.begin(), bd.end());
      cells[id] = {id, 2, std::move(bd), img.at(x, y)};
    }
  return finalize_complex(std::move(cells));
}

GreyImage height_transform(const GreyImage& img, double dir_x, double dir_y, double threshold) {
  validate(img);
  const double norm = std::sqrt(dir_x * dir_x + dir_y * dir_y);
  if (std::abs(norm - 1.0) > 1e-9)
    throw std::invalid_argument("height transform: direction must have unit norm");
  const double sx = dir_x * (img.width - 1);
  const double sy = dir_y * (img.height - 1);
  const double lo = std::min(0.0, sx) + std::min(0.0, sy);
  const double hi = std::max(0.0, sx) + std::max(0.0, sy);
  const double span = hi - lo;
  GreyImage out{img.width, img.height, std::vector<double>(img.values.size(), 1.0)};
  for (int y = 0; y < img.height; ++y)
    for (int x = 0; x < img.width; ++x) {
      if (img.at(x, y) < threshold) continue;
      const double s = x * dir_x + y * dir_y;
      out.at(x, y) = span > 0.0 ? (s - lo) / span : 0.0;
    }
  return out;
}

std::vector<std::array<double, 2>> uniform_directions(int k) {
  if (k < 1) throw std::invalid_argument("directions: k must be positive");
  std::vector<std::array<double, 2>> out;
  out.reserve(k);
  for (int i = 0; i < k; ++i) {
    const double a = 2.0 * std::numbers::pi * i / k;
    out.push_back({std::cos(a), std::sin(a)});
  }
  return out;
}

}  // namespace pdball
