#pragma once

#include <limits>
#include <stdexcept>
#include <string>
#include <vector>

namespace pdball {

constexpr double kInf = std::numeric_limits<double>::infinity();

/// Numerical failure (non-finite loss, divergent optimization); the CLI maps
/// it to exit code 2, distinct from validation errors.
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Undirected weighted graph. Vertices are 0..n_vertices-1; parallel edges
/// and self-loops are rejected by validate().
struct Graph {
  struct Edge {
    int u, v;
    double w = 1.0;
  };
  int n_vertices = 0;
  std::vector<Edge> edges;
};

void validate(const Graph& g);
std::vector<int> vertex_degrees(const Graph& g);

/// Grey-scale image with values in [0, 1], row-major: at(x, y) is column x of
/// row y.
struct GreyImage {
  int width = 0, height = 0;
  std::vector<double> values;

  double at(int x, int y) const { return values[static_cast<std::size_t>(y) * width + x]; }
  double& at(int x, int y) { return values[static_cast<std::size_t>(y) * width + x]; }
};

void validate(const GreyImage& img);

/// Dense symmetric distance matrix; unreachable pairs hold +inf.
struct DistanceMatrix {
  int n = 0;
  std::vector<double> d;

  explicit DistanceMatrix(int n_ = 0)
      : n(n_), d(static_cast<std::size_t>(n_) * n_, 0.0) {}
  double at(int i, int j) const { return d[static_cast<std::size_t>(i) * n + j]; }
  double& at(int i, int j) { return d[static_cast<std::size_t>(i) * n + j]; }
};

/// Largest finite entry of the matrix (0 for an empty or fully disconnected
/// one with n <= 1).
double max_finite_distance(const DistanceMatrix& m);

}  // namespace pdball
