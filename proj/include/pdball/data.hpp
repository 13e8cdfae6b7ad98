#pragma once

#include <cstdint>
#include <optional>
#include <string>

#include "pdball/filtration.hpp"
#include "pdball/persistence.hpp"

namespace pdball {

struct GraphDataset {
  std::vector<Graph> graphs;
  std::vector<int> labels;
  int n_classes = 0;
};

struct ImageDataset {
  std::vector<GreyImage> images;
  std::vector<int> labels;
  int n_classes = 0;
};

/// Directory layout: `labels.txt` with one `<graph-file> <label>` line per
/// sample; each graph file holds an `n m` header followed by m lines
/// `u v [w]` (0-based vertex ids, weight defaults to 1).
GraphDataset load_graph_dataset(const std::string& dir);

Graph read_graph_file(const std::string& path);
void write_graph_file(const std::string& path, const Graph& g);

/// IDX image/label pairs (the MNIST container format); pixel bytes are
/// rescaled to [0,1]. `limit` < 0 loads everything.
ImageDataset load_idx_images(const std::string& images_path, const std::string& labels_path,
                             long long limit = -1);
void write_idx_images(const std::string& path, const std::vector<GreyImage>& images);
void write_idx_labels(const std::string& path, const std::vector<int>& labels);

GreyImage load_pgm(const std::string& path);

enum class SynthKind { cycles_vs_trees, components_count };
SynthKind synth_kind_from_string(const std::string& s);
std::string to_string(SynthKind k);

/// Deterministic two-class graph benchmarks.
///  - cycles_vs_trees: random trees vs. unicyclic graphs whose cycle has
///    length ≥ 4 (so H1 carries the signal).
///  - components_count: class k has k+1 tree components but the same finite
///    H0 count, so only the essential classes separate the labels.
GraphDataset synth_graphs(SynthKind kind, int n_per_class, std::uint64_t seed);

/// Deterministic 28×28 grey-scale digits stand-in: closed rings (one enclosed
/// dark pocket) vs. open strokes, with intensity falloff and mild noise.
ImageDataset synth_digits(int n_per_class, std::uint64_t seed);

/// One filtration recipe. `type` ∈ {"vr", "degree", "cubical", "height"};
/// vr/degree apply to graphs, cubical/height to images. A height recipe
/// expands into `directions` diagram slots (uniform directions on the circle).
struct FiltrationConfig {
  std::string type = "vr";
  int max_dim = 2;          // vr
  double max_scale = -1.0;  // vr: ≤ 0 means the graph's finite diameter
  int directions = 1;       // height
  double threshold = 0.5;   // height
};

void validate(const FiltrationConfig& cfg, bool graphs);
int diagram_slots(const std::vector<FiltrationConfig>& cfgs);
std::string slot_name(const FiltrationConfig& cfg, int direction_index);

/// Per-slot dataset statistics that size the representations: the largest
/// filtration value (used as the essential substitute), the finite persistence
/// range after that substitution, and the largest birth.
struct FiltrationStats {
  std::string name;
  double max_value = 0.0;
  double p_min = kInf;
  double p_max = 0.0;
  double max_birth = 0.0;
};

struct DiagramDataset {
  int n_classes = 0;
  std::vector<int> labels;
  std::vector<std::vector<PersistenceDiagram>> diagrams;  // [sample][slot]
  std::vector<FiltrationStats> stats;                     // [slot]
};

DiagramDataset compute_diagrams(const GraphDataset& ds, const std::vector<FiltrationConfig>& cfgs);
DiagramDataset compute_diagrams(const ImageDataset& ds, const std::vector<FiltrationConfig>& cfgs);
DiagramDataset compute_diagrams_serial(const GraphDataset& ds,
                                       const std::vector<FiltrationConfig>& cfgs);
DiagramDataset compute_diagrams_serial(const ImageDataset& ds,
                                       const std::vector<FiltrationConfig>& cfgs);

/// Subset by sample indices (stats recomputed on the subset's diagrams).
DiagramDataset subset(const DiagramDataset& ds, const std::vector<int>& idx);

/// Diagram cache: one JSONL file per sample×slot plus an index.json carrying
/// the config hash, labels and stats. Reading returns nothing when the hash
/// differs (stale cache).
std::string filtration_config_hash(const std::vector<FiltrationConfig>& cfgs);
void write_diagram_cache(const std::string& dir, const DiagramDataset& ds,
                         const std::string& config_hash);
std::optional<DiagramDataset> read_diagram_cache(const std::string& dir,
                                                 const std::string& config_hash);

}  // namespace pdball
