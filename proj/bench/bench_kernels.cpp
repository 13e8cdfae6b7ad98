// Timing comparison of the OpenMP kernels against their serial reference
// implementations. Not a test; build target `bench_kernels`.

#include <chrono>
#include <cstdio>
#include <random>
#include <set>

#include "pdball/data.hpp"
#include "pdball/metrics.hpp"
#include "pdball/parallel.hpp"
#include "pdball/train.hpp"

using namespace pdball;

namespace {

template <class F>
double time_ms(F&& f) {
  const auto t0 = std::chrono::steady_clock::now();
  f();
  const auto t1 = std::chrono::steady_clock::now();
  return std::chrono::duration<double, std::milli>(t1 - t0).count();
}

void row(const char* name, double serial_ms, double parallel_ms) {
  std::printf("%-24s %10.1f ms %10.1f ms %8.2fx\n", name, serial_ms, parallel_ms,
              serial_ms / parallel_ms);
}

Graph random_graph(int n, int extra_edges, std::mt19937_64& rng) {
  Graph g;
  g.n_vertices = n;
  std::uniform_int_distribution<int> pick(0, n - 1);
  for (int v = 1; v < n; ++v)
    g.edges.push_back({std::uniform_int_distribution<int>(0, v - 1)(rng), v, 1.0});
  std::set<std::pair<int, int>> seen;
  for (const auto& e : g.edges) seen.insert({std::min(e.u, e.v), std::max(e.u, e.v)});
  while (extra_edges > 0) {
    int u = pick(rng), v = pick(rng);
    if (u == v) continue;
    if (!seen.insert({std::min(u, v), std::max(u, v)}).second) continue;
    g.edges.push_back({u, v, 1.0});
    --extra_edges;
  }
  return g;
}

PersistenceDiagram random_diagram(std::mt19937_64& rng, int pts) {
  std::uniform_real_distribution<double> ub(0.0, 0.8), up(0.05, 1.0);
  PersistenceDiagram d;
  d.max_filtration = 2.0;
  for (int dim = 0; dim < 2; ++dim)
    for (int k = 0; k < pts; ++k) {
      const double b = ub(rng);
      d.points.push_back({dim, b, b + up(rng), 1});
    }
  normalize(d);
  return d;
}

}  // namespace

int main() {
  std::mt19937_64 rng(7);
  std::printf("%-24s %13s %13s %9s   (%d threads)\n", "kernel", "serial", "parallel", "speedup",
              max_jobs());

  {
    const Graph g = random_graph(700, 1400, rng);
    DistanceMatrix a, b;
    const double ts = time_ms([&] { a = shortest_path_metric_serial(g); });
    const double tp = time_ms([&] { b = shortest_path_metric(g); });
    row("shortest paths", ts, tp);
  }
  {
    const GraphDataset ds = synth_graphs(SynthKind::cycles_vs_trees, 150, 11);
    const std::vector<FiltrationConfig> cfgs{FiltrationConfig{"vr", 2, -1.0, 1, 0.5}};
    DiagramDataset a, b;
    const double ts = time_ms([&] { a = compute_diagrams_serial(ds, cfgs); });
    const double tp = time_ms([&] { b = compute_diagrams(ds, cfgs); });
    row("batch diagrams (vr)", ts, tp);
  }
  {
    std::vector<PersistenceDiagram> ds;
    for (int i = 0; i < 60; ++i) ds.push_back(random_diagram(rng, 24));
    std::vector<double> a, b;
    const double ts = time_ms([&] { a = pairwise_wasserstein_serial(ds, 1.0, 0); });
    const double tp = time_ms([&] { b = pairwise_wasserstein(ds, 1.0, 0); });
    row("pairwise wasserstein", ts, tp);
  }
  {
    std::vector<PersistenceDiagram> ds;
    for (int i = 0; i < 400; ++i) ds.push_back(random_diagram(rng, 30));
    const RhoConfig rc = lattice_rho_config(3, 0.8, 0.05, 1.0);
    const ReprParams params =
        make_repr_params(Variant::poinc, 3, 5, 2, EssentialPolicy::max_scale, rc, 2.0, rng);
    std::vector<Vec> out(ds.size());
    const double ts = time_ms([&] {
      for (std::size_t i = 0; i < ds.size(); ++i) out[i] = represent(ds[i], params).features;
    });
    const double tp = time_ms([&] {
#pragma omp parallel for schedule(dynamic)
      for (int i = 0; i < static_cast<int>(ds.size()); ++i)
        out[i] = represent(ds[i], params).features;
    });
    row("batch represent", ts, tp);
  }
  return 0;
}
