#include "pdball/types.hpp"

#include <cmath>
#include <set>
#include <utility>

namespace pdball {

void validate(const Graph& g) {
  if (g.n_vertices < 0) throw std::invalid_argument("graph: negative vertex count");
  std::set<std::pair<int, int>> seen;
  for (const auto& e : g.edges) {
    if (e.u < 0 || e.u >= g.n_vertices || e.v < 0 || e.v >= g.n_vertices)
      throw std::invalid_argument("graph: edge endpoint out of range");
    if (e.u == e.v) throw std::invalid_argument("graph: self-loop");
    if (!(e.w >= 0.0) || !std::isfinite(e.w))
      throw std::invalid_argument("graph: edge weight must be finite and nonnegative");
    auto key = std::minmax(e.u, e.v);
    if (!seen.insert(key).second) throw std::invalid_argument("graph: parallel edge");
  }
}

std::vector<int> vertex_degrees(const Graph& g) {
  std::vector<int> deg(g.n_vertices, 0);
  for (const auto& e : g.edges) {
    ++deg[e.u];
    ++deg[e.v];
  }
  return deg;
}

void validate(const GreyImage& img) {
  if (img.width <= 0 || img.height <= 0)
    throw std::invalid_argument("image: dimensions must be positive");
  if (img.values.size() != static_cast<std::size_t>(img.width) * img.height)
    throw std::invalid_argument("image: value buffer size mismatch");
  for (double v : img.values)
    if (!(v >= 0.0 && v <= 1.0))
      throw std::invalid_argument("image: values must lie in [0, 1]");
}

double max_finite_distance(const DistanceMatrix& m) {
  double best = 0.0;
  for (double v : m.d)
    if (std::isfinite(v) && v > best) best = v;
  return best;
}

}  // namespace pdball
