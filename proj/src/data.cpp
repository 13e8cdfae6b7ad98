#include "pdball/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <queue>
#include <random>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace pdball {
namespace {

[[noreturn]] void fail(const std::string& path, int line, const std::string& what) {
  throw std::runtime_error(path + ":" + std::to_string(line) + ": " + what);
}

bool skippable(const std::string& line) {
  for (char c : line)
    if (!std::isspace(static_cast<unsigned char>(c))) return c == '#';
  return true;
}

}  // namespace

Graph read_graph_file(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open graph file: " + path);
  Graph g;
  std::string line;
  int lineno = 0, m = -1, seen = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (skippable(line)) continue;
    std::istringstream ss(line);
    if (m < 0) {
      if (!(ss >> g.n_vertices >> m) || g.n_vertices < 0 || m < 0)
        fail(path, lineno, "expected header 'n m'");
      continue;
    }
    Graph::Edge e;
    if (!(ss >> e.u >> e.v)) fail(path, lineno, "expected edge 'u v [w]'");
    if (!(ss >> e.w)) e.w = 1.0;
    std::string rest;
    if (ss >> rest) fail(path, lineno, "trailing tokens after edge");
    g.edges.push_back(e);
    ++seen;
  }
  if (m < 0) throw std::runtime_error(path + ": empty graph file");
  if (seen != m)
    throw std::runtime_error(path + ": header promises " + std::to_string(m) + " edges, found " +
                             std::to_string(seen));
  try {
    validate(g);
  } catch (const std::exception& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return g;
}

void write_graph_file(const std::string& path, const Graph& g) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot write graph file: " + path);
  os.precision(17);
  os << g.n_vertices << ' ' << g.edges.size() << '\n';
  for (const Graph::Edge& e : g.edges) {
    os << e.u << ' ' << e.v;
    if (e.w != 1.0) os << ' ' << e.w;
    os << '\n';
  }
}

GraphDataset load_graph_dataset(const std::string& dir) {
  const std::string index = (fs::path(dir) / "labels.txt").string();
  std::ifstream is(index);
  if (!is) throw std::runtime_error("cannot open " + index);
  GraphDataset ds;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (skippable(line)) continue;
    std::istringstream ss(line);
    std::string file;
    int label;
    if (!(ss >> file >> label)) fail(index, lineno, "expected '<graph-file> <label>'");
    if (label < 0) fail(index, lineno, "labels must be non-negative");
    ds.graphs.push_back(read_graph_file((fs::path(dir) / file).string()));
    ds.labels.push_back(label);
  }
  if (ds.graphs.empty()) throw std::runtime_error(index + ": no samples listed");
  ds.n_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  if (ds.n_classes < 2) throw std::runtime_error(index + ": need at least two classes");
  return ds;
}

namespace {

std::uint32_t read_be32(std::istream& is, const std::string& path) {
  unsigned char b[4];
  if (!is.read(reinterpret_cast<char*>(b), 4)) throw std::runtime_error(path + ": truncated");
  return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) | (std::uint32_t(b[2]) << 8) |
         std::uint32_t(b[3]);
}

void write_be32(std::ostream& os, std::uint32_t v) {
  const unsigned char b[4] = {static_cast<unsigned char>(v >> 24),
                              static_cast<unsigned char>(v >> 16),
                              static_cast<unsigned char>(v >> 8), static_cast<unsigned char>(v)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

}  // namespace

ImageDataset load_idx_images(const std::string& images_path, const std::string& labels_path,
                             long long limit) {
  std::ifstream im(images_path, std::ios::binary);
  if (!im) throw std::runtime_error("cannot open " + images_path);
  std::ifstream lb(labels_path, std::ios::binary);
  if (!lb) throw std::runtime_error("cannot open " + labels_path);

  if (read_be32(im, images_path) != 0x803u)
    throw std::runtime_error(images_path + ": not an IDX3 image file");
  const std::uint32_t n_img = read_be32(im, images_path);
  const std::uint32_t rows = read_be32(im, images_path);
  const std::uint32_t cols = read_be32(im, images_path);
  if (read_be32(lb, labels_path) != 0x801u)
    throw std::runtime_error(labels_path + ": not an IDX1 label file");
  const std::uint32_t n_lab = read_be32(lb, labels_path);
  if (n_img != n_lab) throw std::runtime_error("image/label counts differ");

  std::uint32_t n = n_img;
  if (limit >= 0 && static_cast<std::uint32_t>(limit) < n) n = static_cast<std::uint32_t>(limit);

  ImageDataset ds;
  std::vector<unsigned char> buf(static_cast<std::size_t>(rows) * cols);
  for (std::uint32_t i = 0; i < n; ++i) {
    if (!im.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw std::runtime_error(images_path + ": truncated pixel data");
    GreyImage img;
    img.width = static_cast<int>(cols);
    img.height = static_cast<int>(rows);
    img.values.resize(buf.size());
    for (std::size_t k = 0; k < buf.size(); ++k) img.values[k] = buf[k] / 255.0;
    ds.images.push_back(std::move(img));
    unsigned char l;
    if (!lb.read(reinterpret_cast<char*>(&l), 1))
      throw std::runtime_error(labels_path + ": truncated label data");
    ds.labels.push_back(l);
  }
  if (ds.images.empty()) throw std::runtime_error(images_path + ": no images");
  ds.n_classes = *std::max_element(ds.labels.begin(), ds.labels.end()) + 1;
  if (ds.n_classes < 2) ds.n_classes = 2;
  return ds;
}

void write_idx_images(const std::string& path, const std::vector<GreyImage>& images) {
  if (images.empty()) throw std::invalid_argument("no images to write");
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_be32(os, 0x803u);
  write_be32(os, static_cast<std::uint32_t>(images.size()));
  write_be32(os, static_cast<std::uint32_t>(images[0].height));
  write_be32(os, static_cast<std::uint32_t>(images[0].width));
  for (const GreyImage& img : images) {
    if (img.width != images[0].width || img.height != images[0].height)
      throw std::invalid_argument("IDX images must share one shape");
    for (double v : img.values) {
      const unsigned char b =
          static_cast<unsigned char>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
      os.write(reinterpret_cast<const char*>(&b), 1);
    }
  }
}

void write_idx_labels(const std::string& path, const std::vector<int>& labels) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + path);
  write_be32(os, 0x801u);
  write_be32(os, static_cast<std::uint32_t>(labels.size()));
  for (int l : labels) {
    const unsigned char b = static_cast<unsigned char>(l);
    os.write(reinterpret_cast<const char*>(&b), 1);
  }
}

GreyImage load_pgm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot open " + path);
  auto next_token = [&is, &path]() {
    std::string tok;
    while (is >> tok) {
      if (tok[0] == '#') {
        std::string rest;
        std::getline(is, rest);
        continue;
      }
      return tok;
    }
    throw std::runtime_error(path + ": truncated PGM header");
  };
  const std::string magic = next_token();
  if (magic != "P2" && magic != "P5") throw std::runtime_error(path + ": not a PGM file");
  GreyImage img;
  img.width = std::stoi(next_token());
  img.height = std::stoi(next_token());
  const int maxval = std::stoi(next_token());
  if (img.width <= 0 || img.height <= 0 || maxval <= 0 || maxval > 65535)
    throw std::runtime_error(path + ": bad PGM dimensions");
  const std::size_t n = static_cast<std::size_t>(img.width) * img.height;
  img.values.resize(n);
  if (magic == "P2") {
    for (std::size_t k = 0; k < n; ++k) img.values[k] = std::stoi(next_token()) / double(maxval);
  } else {
    is.get();  // single whitespace after maxval
    const int bytes = maxval > 255 ? 2 : 1;
    std::vector<unsigned char> buf(n * bytes);
    if (!is.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size())))
      throw std::runtime_error(path + ": truncated pixel data");
    for (std::size_t k = 0; k < n; ++k) {
      const int raw = bytes == 1 ? buf[k] : (buf[2 * k] << 8) | buf[2 * k + 1];
      img.values[k] = raw / double(maxval);
    }
  }
  validate(img);
  return img;
}

SynthKind synth_kind_from_string(const std::string& s) {
  if (s == "cycles-vs-trees") return SynthKind::cycles_vs_trees;
  if (s == "components-count") return SynthKind::components_count;
  throw std::invalid_argument("unknown synthetic dataset: " + s);
}

std::string to_string(SynthKind k) {
  return k == SynthKind::cycles_vs_trees ? "cycles-vs-trees" : "components-count";
}

namespace {

// Random recursive tree on vertices base..base+n-1, unit weights.
void add_tree_edges(Graph& g, int base, int n, std::mt19937_64& rng) {
  for (int v = 1; v < n; ++v) {
    const int p = std::uniform_int_distribution<int>(0, v - 1)(rng);
    g.edges.push_back({base + p, base + v, 1.0});
  }
}

std::vector<int> hop_distances(const Graph& g, int src) {
  std::vector<std::vector<int>> adj(g.n_vertices);
  for (const Graph::Edge& e : g.edges) {
    adj[e.u].push_back(e.v);
    adj[e.v].push_back(e.u);
  }
  std::vector<int> dist(g.n_vertices, -1);
  std::queue<int> q;
  dist[src] = 0;
  q.push(src);
  while (!q.empty()) {
    const int u = q.front();
    q.pop();
    for (int v : adj[u])
      if (dist[v] < 0) {
        dist[v] = dist[u] + 1;
        q.push(v);
      }
  }
  return dist;
}

Graph unicyclic_graph(int n, std::mt19937_64& rng) {
  for (;;) {
    Graph g;
    g.n_vertices = n;
    add_tree_edges(g, 0, n, rng);
    // Chords between vertices ≥ 3 hops apart close a cycle of length ≥ 4,
    // keeping the graph triangle-free so H1 is born at scale 1.
    std::vector<std::pair<int, int>> chords;
    for (int u = 0; u < n; ++u) {
      const std::vector<int> dist = hop_distances(g, u);
      for (int v = u + 1; v < n; ++v)
        if (dist[v] >= 3) chords.emplace_back(u, v);
    }
    if (chords.empty()) continue;  // pathological star-like tree; redraw
    const auto [u, v] =
        chords[std::uniform_int_distribution<std::size_t>(0, chords.size() - 1)(rng)];
    g.edges.push_back({u, v, 1.0});
    return g;
  }
}

}  // namespace

GraphDataset synth_graphs(SynthKind kind, int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  std::mt19937_64 rng(seed);
  GraphDataset ds;
  ds.n_classes = 2;
  for (int i = 0; i < n_per_class; ++i)
    for (int cls = 0; cls < 2; ++cls) {
      Graph g;
      if (kind == SynthKind::cycles_vs_trees) {
        const int n = std::uniform_int_distribution<int>(8, 16)(rng);
        if (cls == 0) {
          g.n_vertices = n;
          add_tree_edges(g, 0, n, rng);
        } else {
          g = unicyclic_graph(n, rng);
        }
      } else {
        // Class k: k+1 tree components on m0+k vertices, so the number of
        // finite H0 points (m0−1) is identically distributed across classes
        // and only the essential count separates them.
        const int m0 = std::uniform_int_distribution<int>(10, 18)(rng);
        const int components = cls + 1;
        const int n = m0 + cls;
        g.n_vertices = n;
        std::vector<int> sizes(components, 3);
        for (int r = n - 3 * components; r > 0; --r)
          ++sizes[std::uniform_int_distribution<int>(0, components - 1)(rng)];
        int base = 0;
        for (int s : sizes) {
          add_tree_edges(g, base, s, rng);
          base += s;
        }
      }
      validate(g);
      ds.graphs.push_back(std::move(g));
      ds.labels.push_back(cls);
    }
  return ds;
}

ImageDataset synth_digits(int n_per_class, std::uint64_t seed) {
  if (n_per_class < 1) throw std::invalid_argument("n_per_class must be >= 1");
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> noise(0.0, 0.05);
  auto u = [&rng](double lo, double hi) {
    return std::uniform_real_distribution<double>(lo, hi)(rng);
  };
  constexpr int W = 28, H = 28;
  ImageDataset ds;
  ds.n_classes = 2;
  for (int i = 0; i < n_per_class; ++i)
    for (int cls = 0; cls < 2; ++cls) {
      GreyImage img;
      img.width = W;
      img.height = H;
      img.values.assign(static_cast<std::size_t>(W) * H, 0.0);
      if (cls == 0) {
        // Ring: bright closed loop around a dark pocket.
        const double cx = u(11, 17), cy = u(11, 17);
        const double rx = u(5.5, 8.5), ry = u(5.5, 8.5);
        const double sig = u(1.0, 1.6), rim = 0.5 * (rx + ry);
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            const double ex = (x - cx) / rx, ey = (y - cy) / ry;
            const double d = std::abs(std::sqrt(ex * ex + ey * ey) - 1.0) * rim;
            img.at(x, y) = std::exp(-d * d / (2.0 * sig * sig));
          }
      } else {
        // Stroke: bright open curve, no enclosed region.
        const double x0 = u(9, 19), y0 = u(3, 7);
        const double x1 = std::clamp(x0 + u(-5, 5), 2.0, 25.0), y1 = u(21, 25);
        const double sig = u(1.0, 1.7);
        const double dx = x1 - x0, dy = y1 - y0, len2 = dx * dx + dy * dy;
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            const double t = std::clamp(((x - x0) * dx + (y - y0) * dy) / len2, 0.0, 1.0);
            const double px = x0 + t * dx - x, py = y0 + t * dy - y;
            const double d2 = px * px + py * py;
            img.at(x, y) = std::exp(-d2 / (2.0 * sig * sig));
          }
      }
      for (double& v : img.values) v = std::clamp(v + noise(rng), 0.0, 1.0);
      ds.images.push_back(std::move(img));
      ds.labels.push_back(cls);
    }
  return ds;
}

void validate(const FiltrationConfig& cfg, bool graphs) {
  if (cfg.type == "vr" || cfg.type == "degree") {
    if (!graphs) throw std::invalid_argument(cfg.type + " filtration needs graph input");
  } else if (cfg.type == "cubical" || cfg.type == "height") {
    if (graphs) throw std::invalid_argument(cfg.type + " filtration needs image input");
  } else {
    throw std::invalid_argument("unknown filtration type: " + cfg.type);
  }
  if (cfg.type == "vr" && (cfg.max_dim < 0 || cfg.max_dim > 2))
    throw std::invalid_argument("vr max_dim must be in [0,2]");
  if (cfg.type == "height") {
    if (cfg.directions < 1) throw std::invalid_argument("height needs directions >= 1");
    if (!(cfg.threshold > 0.0 && cfg.threshold < 1.0))
      throw std::invalid_argument("height threshold must be in (0,1)");
  }
}

int diagram_slots(const std::vector<FiltrationConfig>& cfgs) {
  int k = 0;
  for (const FiltrationConfig& c : cfgs) k += c.type == "height" ? c.directions : 1;
  return k;
}

std::string slot_name(const FiltrationConfig& cfg, int direction_index) {
  if (cfg.type != "height") return cfg.type;
  return "height-" + std::to_string(direction_index);
}

namespace {

struct SlotSpec {
  FiltrationConfig cfg;
  std::array<double, 2> direction{1.0, 0.0};
  std::string name;
};

std::vector<SlotSpec> expand_slots(const std::vector<FiltrationConfig>& cfgs, bool graphs) {
  if (cfgs.empty()) throw std::invalid_argument("need at least one filtration");
  std::vector<SlotSpec> slots;
  for (const FiltrationConfig& c : cfgs) {
    validate(c, graphs);
    if (c.type == "height") {
      const auto dirs = uniform_directions(c.directions);
      for (int i = 0; i < c.directions; ++i)
        slots.push_back({c, dirs[i], slot_name(c, i)});
    } else {
      slots.push_back({c, {1.0, 0.0}, slot_name(c, 0)});
    }
  }
  return slots;
}

void compute_stats(DiagramDataset& ds, const std::vector<std::string>& names) {
  ds.stats.assign(names.size(), {});
  for (std::size_t s = 0; s < names.size(); ++s) {
    FiltrationStats& st = ds.stats[s];
    st.name = names[s];
    for (const auto& row : ds.diagrams)
      st.max_value = std::max(st.max_value, row[s].max_filtration);
    for (const auto& row : ds.diagrams)
      for (const DiagramPoint& pt : row[s].points) {
        st.max_birth = std::max(st.max_birth, pt.birth);
        const double p = (pt.essential() ? st.max_value : pt.death) - pt.birth;
        if (p > 0.0) {
          st.p_min = std::min(st.p_min, p);
          st.p_max = std::max(st.p_max, p);
        }
      }
    if (st.p_min == kInf) st.p_min = 0.0;
  }
}

std::vector<std::string> stat_names(const DiagramDataset& ds) {
  std::vector<std::string> names;
  for (const FiltrationStats& st : ds.stats) names.push_back(st.name);
  return names;
}

DiagramDataset compute_graphs_impl(const GraphDataset& ds,
                                   const std::vector<FiltrationConfig>& cfgs, bool parallel) {
  const auto slots = expand_slots(cfgs, true);
  DiagramDataset out;
  out.n_classes = ds.n_classes;
  out.labels = ds.labels;
  const int n = static_cast<int>(ds.graphs.size());
  out.diagrams.resize(n);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < n; ++i) {
    const Graph& g = ds.graphs[i];
    std::optional<DistanceMatrix> dm;
    std::vector<PersistenceDiagram> row;
    row.reserve(slots.size());
    for (const SlotSpec& s : slots) {
      if (s.cfg.type == "vr") {
        if (!dm) dm = parallel ? shortest_path_metric(g) : shortest_path_metric_serial(g);
        const double scale = s.cfg.max_scale > 0.0 ? s.cfg.max_scale : max_finite_distance(*dm);
        row.push_back(reduce(vietoris_rips(*dm, s.cfg.max_dim, scale)));
      } else {
        row.push_back(reduce(degree_filtration(g)));
      }
    }
    out.diagrams[i] = std::move(row);
  }
  std::vector<std::string> names;
  for (const SlotSpec& s : slots) names.push_back(s.name);
  compute_stats(out, names);
  return out;
}

DiagramDataset compute_images_impl(const ImageDataset& ds,
                                   const std::vector<FiltrationConfig>& cfgs, bool parallel) {
  const auto slots = expand_slots(cfgs, false);
  DiagramDataset out;
  out.n_classes = ds.n_classes;
  out.labels = ds.labels;
  const int n = static_cast<int>(ds.images.size());
  out.diagrams.resize(n);
#pragma omp parallel for schedule(dynamic) if (parallel)
  for (int i = 0; i < n; ++i) {
    std::vector<PersistenceDiagram> row;
    row.reserve(slots.size());
    for (const SlotSpec& s : slots) {
      if (s.cfg.type == "cubical") {
        row.push_back(reduce(cubical_filtration(ds.images[i])));
      } else {
        const GreyImage h =
            height_transform(ds.images[i], s.direction[0], s.direction[1], s.cfg.threshold);
        row.push_back(reduce(cubical_filtration(h)));
      }
    }
    out.diagrams[i] = std::move(row);
  }
  std::vector<std::string> names;
  for (const SlotSpec& s : slots) names.push_back(s.name);
  compute_stats(out, names);
  return out;
}

}  // namespace

DiagramDataset compute_diagrams(const GraphDataset& ds,
                                const std::vector<FiltrationConfig>& cfgs) {
  return compute_graphs_impl(ds, cfgs, true);
}

DiagramDataset compute_diagrams(const ImageDataset& ds,
                                const std::vector<FiltrationConfig>& cfgs) {
  return compute_images_impl(ds, cfgs, true);
}

DiagramDataset compute_diagrams_serial(const GraphDataset& ds,
                                       const std::vector<FiltrationConfig>& cfgs) {
  return compute_graphs_impl(ds, cfgs, false);
}

DiagramDataset compute_diagrams_serial(const ImageDataset& ds,
                                       const std::vector<FiltrationConfig>& cfgs) {
  return compute_images_impl(ds, cfgs, false);
}

DiagramDataset subset(const DiagramDataset& ds, const std::vector<int>& idx) {
  DiagramDataset out;
  out.n_classes = ds.n_classes;
  for (int i : idx) {
    if (i < 0 || i >= static_cast<int>(ds.diagrams.size()))
      throw std::out_of_range("subset index out of range");
    out.labels.push_back(ds.labels[i]);
    out.diagrams.push_back(ds.diagrams[i]);
  }
  compute_stats(out, stat_names(ds));
  return out;
}

std::string filtration_config_hash(const std::vector<FiltrationConfig>& cfgs) {
  std::ostringstream ss;
  for (const FiltrationConfig& c : cfgs) {
    ss << c.type << ';' << c.max_dim << ';' << c.max_scale << ';' << c.directions << ';'
       << c.threshold << '|';
  }
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016zx", std::hash<std::string>{}(ss.str()));
  return buf;
}

void write_diagram_cache(const std::string& dir, const DiagramDataset& ds,
                         const std::string& config_hash) {
  fs::create_directories(dir);
  json idx;
  idx["config_hash"] = config_hash;
  idx["n_classes"] = ds.n_classes;
  idx["labels"] = ds.labels;
  idx["n_samples"] = ds.diagrams.size();
  idx["n_slots"] = ds.stats.size();
  json stats = json::array();
  for (const FiltrationStats& st : ds.stats)
    stats.push_back(json{{"name", st.name},
                         {"max_value", st.max_value},
                         {"p_min", st.p_min},
                         {"p_max", st.p_max},
                         {"max_birth", st.max_birth}});
  idx["stats"] = std::move(stats);
  {
    std::ofstream os((fs::path(dir) / "index.json").string());
    if (!os) throw std::runtime_error("cannot write diagram cache index in " + dir);
    os << idx.dump(2) << '\n';
  }
  for (std::size_t i = 0; i < ds.diagrams.size(); ++i)
    for (std::size_t s = 0; s < ds.diagrams[i].size(); ++s) {
      const std::string name =
          "d" + std::to_string(i) + "_" + std::to_string(s) + ".jsonl";
      std::ofstream os((fs::path(dir) / name).string());
      if (!os) throw std::runtime_error("cannot write " + name + " in " + dir);
      write_diagram_jsonl(os, ds.diagrams[i][s]);
    }
}

std::optional<DiagramDataset> read_diagram_cache(const std::string& dir,
                                                 const std::string& config_hash) {
  std::ifstream is((fs::path(dir) / "index.json").string());
  if (!is) return std::nullopt;
  json idx;
  try {
    is >> idx;
  } catch (const json::exception&) {
    return std::nullopt;
  }
  if (idx.value("config_hash", std::string()) != config_hash) return std::nullopt;
  DiagramDataset ds;
  ds.n_classes = idx.at("n_classes").get<int>();
  ds.labels = idx.at("labels").get<std::vector<int>>();
  const std::size_t n = idx.at("n_samples").get<std::size_t>();
  const std::size_t k = idx.at("n_slots").get<std::size_t>();
  for (const json& st : idx.at("stats"))
    ds.stats.push_back({st.at("name").get<std::string>(), st.at("max_value").get<double>(),
                        st.at("p_min").get<double>(), st.at("p_max").get<double>(),
                        st.at("max_birth").get<double>()});
  if (ds.stats.size() != k || ds.labels.size() != n) return std::nullopt;
  ds.diagrams.resize(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t s = 0; s < k; ++s) {
      const std::string name =
          "d" + std::to_string(i) + "_" + std::to_string(s) + ".jsonl";
      std::ifstream ds_is((fs::path(dir) / name).string());
      if (!ds_is) return std::nullopt;
      ds.diagrams[i].push_back(read_diagram_jsonl(ds_is));
    }
  return ds;
}

}  // namespace pdball
