#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pdball/data.hpp"
#include "pdball/filtration.hpp"
#include "pdball/persistence.hpp"

using namespace pdball;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("pdball_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name) const { return (path / name).string(); }
};

int n_components(const Graph& g) {
  oracle::UnionFind uf(g.n_vertices);
  for (const Graph::Edge& e : g.edges) uf.parent[uf.find(e.u)] = uf.find(e.v);
  int roots = 0;
  for (int v = 0; v < g.n_vertices; ++v)
    if (uf.find(v) == v) ++roots;
  return roots;
}

PersistenceDiagram vr_diagram(const Graph& g, int max_dim) {
  const DistanceMatrix d = shortest_path_metric_serial(g);
  return reduce(vietoris_rips(d, max_dim, max_finite_distance(d)));
}

bool dataset_equal(const DiagramDataset& a, const DiagramDataset& b) {
  if (a.n_classes != b.n_classes || a.labels != b.labels) return false;
  if (a.diagrams.size() != b.diagrams.size()) return false;
  for (std::size_t i = 0; i < a.diagrams.size(); ++i) {
    if (a.diagrams[i].size() != b.diagrams[i].size()) return false;
    for (std::size_t s = 0; s < a.diagrams[i].size(); ++s)
      if (!same_diagram(a.diagrams[i][s], b.diagrams[i][s])) return false;
  }
  if (a.stats.size() != b.stats.size()) return false;
  for (std::size_t s = 0; s < a.stats.size(); ++s) {
    if (a.stats[s].name != b.stats[s].name) return false;
    if (a.stats[s].max_value != b.stats[s].max_value) return false;
    if (a.stats[s].p_min != b.stats[s].p_min) return false;
    if (a.stats[s].p_max != b.stats[s].p_max) return false;
    if (a.stats[s].max_birth != b.stats[s].max_birth) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("cycles-vs-trees generator") {
  const GraphDataset ds = synth_graphs(SynthKind::cycles_vs_trees, 10, 5);
  REQUIRE(ds.graphs.size() == 20);
  REQUIRE(ds.n_classes == 2);
  int per_class[2] = {0, 0};
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    const Graph& g = ds.graphs[i];
    const int cls = ds.labels[i];
    ++per_class[cls];
    CHECK(n_components(g) == 1);
    // Trees have n-1 edges, unicyclic graphs exactly n.
    CHECK(static_cast<int>(g.edges.size()) == g.n_vertices - 1 + cls);
    // At scale 1 the complex is the graph itself (unit weights, triangle-free),
    // so loops born at 1 count the graph's independent cycles; anything the
    // thickening creates later is born at scale >= 2.
    const PersistenceDiagram d = vr_diagram(g, 2);
    long long born_at_one = 0;
    for (const auto& p : d.points)
      if (p.dim == 1 && p.birth == 1.0) born_at_one += p.mult;
    CHECK(born_at_one == cls);
  }
  CHECK(per_class[0] == 10);
  CHECK(per_class[1] == 10);
}

TEST_CASE("components-count generator") {
  const GraphDataset ds = synth_graphs(SynthKind::components_count, 200, 42);
  std::vector<double> finite_counts[2];
  for (std::size_t i = 0; i < ds.graphs.size(); ++i) {
    const int cls = ds.labels[i];
    CHECK(n_components(ds.graphs[i]) == cls + 1);
    // Forests: every edge is a merge, so the finite H0 count is n - components.
    finite_counts[cls].push_back(
        static_cast<double>(ds.graphs[i].n_vertices - (cls + 1)));
  }
  // The classes differ only in the essential count; the finite H0 size has the
  // same distribution in both.
  CHECK(oracle::ks_two_sample_p(finite_counts[0], finite_counts[1]) > 0.01);

  SUBCASE("essential H0 matches the component count through the pipeline") {
    std::mt19937_64 pick_rng(7);
    std::uniform_int_distribution<std::size_t> pick(0, ds.graphs.size() - 1);
    for (int rep = 0; rep < 5; ++rep) {
      const std::size_t i = pick(pick_rng);
      const PersistenceDiagram d = vr_diagram(ds.graphs[i], 1);
      long long essential = 0;
      for (const auto& p : d.points)
        if (p.dim == 0 && p.essential()) essential += p.mult;
      CHECK(essential == ds.labels[i] + 1);
    }
  }
}

TEST_CASE("generators are deterministic in the seed") {
  const GraphDataset a = synth_graphs(SynthKind::cycles_vs_trees, 3, 9);
  const GraphDataset b = synth_graphs(SynthKind::cycles_vs_trees, 3, 9);
  REQUIRE(a.graphs.size() == b.graphs.size());
  for (std::size_t i = 0; i < a.graphs.size(); ++i) {
    CHECK(a.graphs[i].n_vertices == b.graphs[i].n_vertices);
    REQUIRE(a.graphs[i].edges.size() == b.graphs[i].edges.size());
    for (std::size_t e = 0; e < a.graphs[i].edges.size(); ++e) {
      CHECK(a.graphs[i].edges[e].u == b.graphs[i].edges[e].u);
      CHECK(a.graphs[i].edges[e].v == b.graphs[i].edges[e].v);
    }
  }
  const ImageDataset x = synth_digits(2, 11);
  const ImageDataset y = synth_digits(2, 11);
  const ImageDataset z = synth_digits(2, 12);
  REQUIRE(x.images.size() == 4);
  CHECK(x.labels == y.labels);
  bool all_same = true, differs_from_z = false;
  for (std::size_t i = 0; i < x.images.size(); ++i) {
    all_same = all_same && x.images[i].values == y.images[i].values;
    differs_from_z = differs_from_z || x.images[i].values != z.images[i].values;
    for (double v : x.images[i].values) {
      CHECK(v >= 0.0);
      CHECK(v <= 1.0);
    }
  }
  CHECK(all_same);
  CHECK(differs_from_z);
}

TEST_CASE("synth_kind string round-trip") {
  for (SynthKind k : {SynthKind::cycles_vs_trees, SynthKind::components_count})
    CHECK(synth_kind_from_string(to_string(k)) == k);
  CHECK_THROWS_AS(synth_kind_from_string("lollipops"), std::invalid_argument);
}

TEST_CASE("graph files") {
  TempDir tmp;
  SUBCASE("round-trip keeps vertices, edges and weights") {
    std::mt19937_64 rng(3);
    for (int rep = 0; rep < 10; ++rep) {
      const Graph g = oracle::random_graph(8, rng);
      const std::string path = tmp.file("g.txt");
      write_graph_file(path, g);
      const Graph back = read_graph_file(path);
      CHECK(back.n_vertices == g.n_vertices);
      REQUIRE(back.edges.size() == g.edges.size());
      for (std::size_t e = 0; e < g.edges.size(); ++e) {
        CHECK(back.edges[e].u == g.edges[e].u);
        CHECK(back.edges[e].v == g.edges[e].v);
        CHECK(back.edges[e].w == g.edges[e].w);
      }
    }
  }
  SUBCASE("omitted weights default to one") {
    std::ofstream(tmp.file("w.txt")) << "3 2\n0 1\n1 2 0.25\n";
    const Graph g = read_graph_file(tmp.file("w.txt"));
    CHECK(g.edges[0].w == 1.0);
    CHECK(g.edges[1].w == 0.25);
  }
  SUBCASE("comments and blank lines are skipped") {
    std::ofstream(tmp.file("c.txt")) << "# a graph\n\n2 1\n# the only edge\n0 1\n";
    CHECK(read_graph_file(tmp.file("c.txt")).edges.size() == 1);
  }
  SUBCASE("malformed edge reports the line number") {
    std::ofstream(tmp.file("bad.txt")) << "2 1\nnonsense\n";
    try {
      read_graph_file(tmp.file("bad.txt"));
      FAIL("expected a parse error");
    } catch (const std::runtime_error& e) {
      CHECK(std::string(e.what()).find(":2:") != std::string::npos);
    }
  }
  SUBCASE("edge count mismatch is rejected") {
    std::ofstream(tmp.file("short.txt")) << "3 2\n0 1\n";
    CHECK_THROWS_WITH_AS(read_graph_file(tmp.file("short.txt")),
                         doctest::Contains("promises"), std::runtime_error);
  }
  SUBCASE("out-of-range endpoint is rejected with the file name") {
    std::ofstream(tmp.file("range.txt")) << "2 1\n0 5\n";
    CHECK_THROWS_AS(read_graph_file(tmp.file("range.txt")), std::runtime_error);
  }
  SUBCASE("trailing tokens are rejected") {
    std::ofstream(tmp.file("trail.txt")) << "2 1\n0 1 1.0 oops\n";
    CHECK_THROWS_AS(read_graph_file(tmp.file("trail.txt")), std::runtime_error);
  }
  SUBCASE("empty file is rejected") {
    std::ofstream(tmp.file("empty.txt")) << "";
    CHECK_THROWS_AS(read_graph_file(tmp.file("empty.txt")), std::runtime_error);
  }
}

TEST_CASE("graph dataset directory") {
  TempDir tmp;
  write_graph_file(tmp.file("a.txt"), Graph{2, {{0, 1, 1.0}}});
  write_graph_file(tmp.file("b.txt"), Graph{3, {{0, 1, 1.0}, {1, 2, 1.0}}});
  SUBCASE("loads files against the label index") {
    std::ofstream(tmp.file("labels.txt")) << "a.txt 0\nb.txt 1\n";
    const GraphDataset ds = load_graph_dataset(tmp.path.string());
    REQUIRE(ds.graphs.size() == 2);
    CHECK(ds.labels == std::vector<int>{0, 1});
    CHECK(ds.n_classes == 2);
    CHECK(ds.graphs[1].n_vertices == 3);
  }
  SUBCASE("missing index file") {
    CHECK_THROWS_AS(load_graph_dataset((tmp.path / "nowhere").string()), std::runtime_error);
  }
  SUBCASE("single class is rejected") {
    std::ofstream(tmp.file("labels.txt")) << "a.txt 0\nb.txt 0\n";
    CHECK_THROWS_AS(load_graph_dataset(tmp.path.string()), std::runtime_error);
  }
}

TEST_CASE("idx images") {
  TempDir tmp;
  const ImageDataset src = synth_digits(3, 1);
  write_idx_images(tmp.file("im.idx"), src.images);
  write_idx_labels(tmp.file("lb.idx"), src.labels);
  SUBCASE("round-trip within quantization error") {
    const ImageDataset back = load_idx_images(tmp.file("im.idx"), tmp.file("lb.idx"));
    REQUIRE(back.images.size() == src.images.size());
    CHECK(back.labels == src.labels);
    CHECK(back.n_classes == 2);
    for (std::size_t i = 0; i < src.images.size(); ++i) {
      CHECK(back.images[i].width == 28);
      CHECK(back.images[i].height == 28);
      for (std::size_t k = 0; k < src.images[i].values.size(); ++k)
        CHECK(std::abs(back.images[i].values[k] - src.images[i].values[k]) <= 0.5 / 255.0 + 1e-12);
    }
  }
  SUBCASE("limit truncates the load") {
    const ImageDataset four = load_idx_images(tmp.file("im.idx"), tmp.file("lb.idx"), 4);
    CHECK(four.images.size() == 4);
    CHECK(load_idx_images(tmp.file("im.idx"), tmp.file("lb.idx"), 1000).images.size() == 6);
    CHECK_THROWS_AS(load_idx_images(tmp.file("im.idx"), tmp.file("lb.idx"), 0),
                    std::runtime_error);
  }
  SUBCASE("bad magic numbers are rejected") {
    CHECK_THROWS_WITH_AS(load_idx_images(tmp.file("lb.idx"), tmp.file("lb.idx")),
                         doctest::Contains("IDX3"), std::runtime_error);
    CHECK_THROWS_WITH_AS(load_idx_images(tmp.file("im.idx"), tmp.file("im.idx")),
                         doctest::Contains("IDX1"), std::runtime_error);
  }
  SUBCASE("truncated pixel data is rejected") {
    std::ifstream is(tmp.file("im.idx"), std::ios::binary);
    std::vector<char> head(16 + 28 * 28 / 2);
    is.read(head.data(), static_cast<std::streamsize>(head.size()));
    std::ofstream(tmp.file("trunc.idx"), std::ios::binary)
        .write(head.data(), static_cast<std::streamsize>(head.size()));
    CHECK_THROWS_WITH_AS(load_idx_images(tmp.file("trunc.idx"), tmp.file("lb.idx")),
                         doctest::Contains("truncated"), std::runtime_error);
  }
  SUBCASE("count mismatch between images and labels") {
    write_idx_labels(tmp.file("lb5.idx"), std::vector<int>(5, 0));
    CHECK_THROWS_WITH_AS(load_idx_images(tmp.file("im.idx"), tmp.file("lb5.idx")),
                         doctest::Contains("differ"), std::runtime_error);
  }
}

TEST_CASE("pgm images") {
  TempDir tmp;
  SUBCASE("ascii variant with comments") {
    std::ofstream(tmp.file("a.pgm")) << "P2\n# comment\n3 2\n4\n0 1 2\n3 4 4\n";
    const GreyImage img = load_pgm(tmp.file("a.pgm"));
    CHECK(img.width == 3);
    CHECK(img.height == 2);
    CHECK(img.at(0, 0) == 0.0);
    CHECK(img.at(1, 0) == 0.25);
    CHECK(img.at(2, 1) == 1.0);
  }
  SUBCASE("binary variant") {
    std::ofstream os(tmp.file("b.pgm"), std::ios::binary);
    os << "P5\n2 2\n255\n";
    const unsigned char px[4] = {0, 51, 102, 255};
    os.write(reinterpret_cast<const char*>(px), 4);
    os.close();
    const GreyImage img = load_pgm(tmp.file("b.pgm"));
    CHECK(img.at(0, 0) == 0.0);
    CHECK(img.at(1, 0) == doctest::Approx(0.2));
    CHECK(img.at(1, 1) == 1.0);
  }
  SUBCASE("sixteen-bit binary variant") {
    std::ofstream os(tmp.file("w.pgm"), std::ios::binary);
    os << "P5\n1 1\n65535\n";
    const unsigned char px[2] = {0x80, 0x00};
    os.write(reinterpret_cast<const char*>(px), 2);
    os.close();
    CHECK(load_pgm(tmp.file("w.pgm")).at(0, 0) == doctest::Approx(0x8000 / 65535.0));
  }
  SUBCASE("wrong magic") {
    std::ofstream(tmp.file("c.pgm")) << "P6\n1 1\n255\nx";
    CHECK_THROWS_AS(load_pgm(tmp.file("c.pgm")), std::runtime_error);
  }
  SUBCASE("truncated body") {
    std::ofstream(tmp.file("d.pgm")) << "P2\n2 2\n255\n0 1 2\n";
    CHECK_THROWS_AS(load_pgm(tmp.file("d.pgm")), std::runtime_error);
  }
}

TEST_CASE("filtration config validation") {
  FiltrationConfig cfg;
  cfg.type = "vr";
  CHECK_NOTHROW(validate(cfg, true));
  CHECK_THROWS_AS(validate(cfg, false), std::invalid_argument);
  cfg.max_dim = 3;
  CHECK_THROWS_AS(validate(cfg, true), std::invalid_argument);
  cfg = {};
  cfg.type = "cubical";
  CHECK_NOTHROW(validate(cfg, false));
  CHECK_THROWS_AS(validate(cfg, true), std::invalid_argument);
  cfg.type = "height";
  cfg.directions = 0;
  CHECK_THROWS_AS(validate(cfg, false), std::invalid_argument);
  cfg.directions = 2;
  cfg.threshold = 1.0;
  CHECK_THROWS_AS(validate(cfg, false), std::invalid_argument);
  cfg.threshold = 0.5;
  CHECK_NOTHROW(validate(cfg, false));
  cfg.type = "alpha";
  CHECK_THROWS_AS(validate(cfg, true), std::invalid_argument);
}

TEST_CASE("slot expansion") {
  FiltrationConfig vr;
  vr.type = "vr";
  FiltrationConfig height;
  height.type = "height";
  height.directions = 4;
  CHECK(diagram_slots({vr, height}) == 5);
  CHECK(slot_name(vr, 0) == "vr");
  CHECK(slot_name(height, 2) == "height-2");
}

TEST_CASE("diagram computation fills stats from the data") {
  GraphDataset ds;
  ds.n_classes = 2;
  ds.graphs = {Graph{2, {{0, 1, 0.7}}}, Graph{2, {{0, 1, 0.7}}}};
  ds.labels = {0, 1};
  FiltrationConfig vr;
  vr.type = "vr";
  vr.max_dim = 1;
  const DiagramDataset dd = compute_diagrams_serial(ds, {vr});
  REQUIRE(dd.stats.size() == 1);
  CHECK(dd.stats[0].name == "vr");
  CHECK(dd.stats[0].max_value == 0.7);
  CHECK(dd.stats[0].p_min == 0.7);  // the merge and the essential both span 0.7
  CHECK(dd.stats[0].p_max == 0.7);
  CHECK(dd.stats[0].max_birth == 0.0);
  REQUIRE(dd.diagrams.size() == 2);
  long long essential = 0, finite = 0;
  for (const auto& p : dd.diagrams[0][0].points)
    (p.essential() ? essential : finite) += p.mult;
  CHECK(essential == 1);
  CHECK(finite == 1);
}

TEST_CASE("parallel and serial diagram pipelines agree") {
  SUBCASE("graphs") {
    const GraphDataset ds = synth_graphs(SynthKind::cycles_vs_trees, 4, 13);
    FiltrationConfig vr;
    vr.type = "vr";
    vr.max_dim = 1;
    FiltrationConfig degree;
    degree.type = "degree";
    const DiagramDataset par = compute_diagrams(ds, {vr, degree});
    const DiagramDataset ser = compute_diagrams_serial(ds, {vr, degree});
    CHECK(dataset_equal(par, ser));
  }
  SUBCASE("images") {
    ImageDataset ds;
    const ImageDataset all = synth_digits(2, 17);
    ds.images = all.images;
    ds.labels = all.labels;
    ds.n_classes = all.n_classes;
    FiltrationConfig cubical;
    cubical.type = "cubical";
    FiltrationConfig height;
    height.type = "height";
    height.directions = 3;
    const DiagramDataset par = compute_diagrams(ds, {cubical, height});
    const DiagramDataset ser = compute_diagrams_serial(ds, {cubical, height});
    CHECK(par.stats.size() == 4);
    CHECK(par.stats[1].name == "height-0");
    CHECK(dataset_equal(par, ser));
  }
}

TEST_CASE("subset recomputes statistics for the chosen rows") {
  const GraphDataset gs = synth_graphs(SynthKind::cycles_vs_trees, 3, 23);
  FiltrationConfig vr;
  vr.type = "vr";
  vr.max_dim = 1;
  const DiagramDataset dd = compute_diagrams_serial(gs, {vr});
  const DiagramDataset sub = subset(dd, {0, 3, 5});
  REQUIRE(sub.diagrams.size() == 3);
  CHECK(sub.labels == std::vector<int>{dd.labels[0], dd.labels[3], dd.labels[5]});
  CHECK(same_diagram(sub.diagrams[1][0], dd.diagrams[3][0]));
  CHECK(sub.stats[0].name == "vr");
  CHECK(sub.stats[0].max_value <= dd.stats[0].max_value);
  CHECK_THROWS_AS(subset(dd, {99}), std::out_of_range);
}

TEST_CASE("diagram cache") {
  TempDir tmp;
  const GraphDataset gs = synth_graphs(SynthKind::components_count, 2, 29);
  FiltrationConfig vr;
  vr.type = "vr";
  vr.max_dim = 1;
  const std::vector<FiltrationConfig> cfgs = {vr};
  const DiagramDataset dd = compute_diagrams_serial(gs, cfgs);
  const std::string hash = filtration_config_hash(cfgs);
  const std::string dir = tmp.file("cache");
  write_diagram_cache(dir, dd, hash);
  SUBCASE("round-trip") {
    const auto back = read_diagram_cache(dir, hash);
    REQUIRE(back.has_value());
    CHECK(dataset_equal(*back, dd));
  }
  SUBCASE("stale hash misses") {
    FiltrationConfig other = vr;
    other.max_dim = 2;
    CHECK(!read_diagram_cache(dir, filtration_config_hash({other})).has_value());
    CHECK(filtration_config_hash({other}) != hash);
  }
  SUBCASE("missing directory misses") {
    CHECK(!read_diagram_cache(tmp.file("nowhere"), hash).has_value());
  }
  SUBCASE("corrupt index misses") {
    std::ofstream((fs::path(dir) / "index.json").string()) << "{broken";
    CHECK(!read_diagram_cache(dir, hash).has_value());
  }
}
