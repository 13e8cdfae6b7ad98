#pragma once

#include <array>

#include "pdball/types.hpp"

namespace pdball {

/// One cell of a filtered complex. `boundary` lists the ids of the
/// codimension-1 faces (2 endpoints for an edge, 3 edges for a triangle,
/// 4 edges for a pixel square).
struct Cell {
  int id = 0;
  int dim = 0;  // 0..2
  std::vector<int> boundary;
  double value = 0.0;
};

/// Cells plus a filtration order: `ordering[p]` is the index of the cell at
/// position p when sorted by (value, dimension, id). The dimension tie-break
/// puts faces before cofaces of equal value, so the order is a valid
/// sublevel filtration whenever value(face) ≤ value(coface).
struct FilteredComplex {
  std::vector<Cell> cells;
  std::vector<int> ordering;

  std::size_t size() const { return cells.size(); }
  double max_value() const;
};

/// Sorts the ordering and checks invariants (ids, boundaries, sublevel
/// property). All builders below funnel through this.
FilteredComplex finalize_complex(std::vector<Cell> cells);
void validate_filtration(const FilteredComplex& fc);

/// All-pairs shortest paths; parallel over source vertices.
DistanceMatrix shortest_path_metric(const Graph& g);
/// Serial reference implementation (Floyd–Warshall) kept for testing.
DistanceMatrix shortest_path_metric_serial(const Graph& g);

/// Vietoris–Rips complex of a finite metric: vertices at 0, edges at their
/// distance, triangles at the max of their three edge values; cells with
/// value > max_scale (or non-finite) are dropped. max_dim ≤ 2.
FilteredComplex vietoris_rips(const DistanceMatrix& d, int max_dim, double max_scale);

/// Vertex-degree sublevel filtration of the graph itself (dimension ≤ 1):
/// vertex at its degree, edge at the max of its endpoint degrees.
FilteredComplex degree_filtration(const Graph& g);

/// Cubical complex of an image: one square per pixel at the pixel value,
/// every edge/vertex at the min over its incident pixels.
FilteredComplex cubical_filtration(const GreyImage& img);

/// Binarize at `threshold`, then assign each foreground pixel the inner
/// product of its (column, row) coordinates with `direction`, rescaled to
/// [0,1] over the image grid; background pixels get 1 so they enter last.
GreyImage height_transform(const GreyImage& img, double dir_x, double dir_y,
                           double threshold = 0.5);

/// k unit vectors at angles 2πi/k, i = 0..k−1.
std::vector<std::array<double, 2>> uniform_directions(int k);

}  // namespace pdball
