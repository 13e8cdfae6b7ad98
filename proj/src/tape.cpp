#include "pdball/tape.hpp"

#include <string>

namespace pdball {

namespace {
thread_local std::uint64_t t_clamp_events = 0;
}

std::uint64_t clamp_events() { return t_clamp_events; }
void reset_clamp_events() { t_clamp_events = 0; }
void note_clamp_event() { ++t_clamp_events; }

tape_nan_error::tape_nan_error(int node_id)
    : std::runtime_error("NaN encountered at tape node " + std::to_string(node_id)),
      node(node_id) {}

std::vector<double> Tape::backward(int root) const {
  const double seed = 1.0;
  return backward(std::span<const int>(&root, 1), std::span<const double>(&seed, 1));
}

std::vector<double> Tape::backward(std::span<const int> roots,
                                   std::span<const double> seeds) const {
  // Attribute value NaNs to the node where they first appeared, not to the
  // downstream node the reverse sweep happens to meet first.
  for (std::size_t i = 0; i < nodes_.size(); ++i)
    if (std::isnan(nodes_[i].value)) throw tape_nan_error(static_cast<int>(i));
  std::vector<double> adj(nodes_.size(), 0.0);
  for (std::size_t k = 0; k < roots.size(); ++k) adj[roots[k]] += seeds[k];
  for (int i = static_cast<int>(nodes_.size()) - 1; i >= 0; --i) {
    const Node& n = nodes_[i];
    if (std::isnan(adj[i])) throw tape_nan_error(i);
    const double a = adj[i];
    if (a == 0.0) continue;
    if (n.parent[0] >= 0) adj[n.parent[0]] += a * n.partial[0];
    if (n.parent[1] >= 0) adj[n.parent[1]] += a * n.partial[1];
  }
  return adj;
}

}  // namespace pdball
