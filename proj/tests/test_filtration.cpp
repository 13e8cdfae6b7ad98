#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>
#include <set>

#include "doctest.h"
#include "oracles.hpp"
#include "pdball/filtration.hpp"

using namespace pdball;

namespace {

Graph cycle(int n) {
  Graph g;
  g.n_vertices = n;
  for (int i = 0; i < n; ++i) g.edges.push_back({i, (i + 1) % n, 1.0});
  return g;
}

int count_cells(const FilteredComplex& fc, int dim, double value) {
  int c = 0;
  for (const Cell& cell : fc.cells)
    if (cell.dim == dim && cell.value == value) ++c;
  return c;
}

GreyImage image(int w, int h, std::vector<double> v) {
  GreyImage img;
  img.width = w;
  img.height = h;
  img.values = std::move(v);
  return img;
}

}  // namespace

TEST_CASE("shortest paths on the 4-cycle") {
  const DistanceMatrix d = shortest_path_metric(cycle(4));
  for (int i = 0; i < 4; ++i) {
    CHECK(d.at(i, i) == 0.0);
    CHECK(d.at(i, (i + 1) % 4) == 1.0);
    CHECK(d.at(i, (i + 2) % 4) == 2.0);
  }
}

TEST_CASE("shortest paths degenerate graphs") {
  Graph single;
  single.n_vertices = 1;
  CHECK(shortest_path_metric(single).at(0, 0) == 0.0);

  Graph isolated;
  isolated.n_vertices = 2;
  const DistanceMatrix d = shortest_path_metric(isolated);
  CHECK(d.at(0, 1) == kInf);
  CHECK(d.at(1, 0) == kInf);
}

TEST_CASE("parallel and serial shortest paths agree") {
  std::mt19937_64 rng(3);
  for (int rep = 0; rep < 50; ++rep) {
    const Graph g = oracle::random_graph(12, rng);
    const DistanceMatrix a = shortest_path_metric(g);
    const DistanceMatrix b = shortest_path_metric_serial(g);
    REQUIRE(a.n == b.n);
    for (int i = 0; i < a.n; ++i)
      for (int j = 0; j < a.n; ++j) {
        if (a.at(i, j) == kInf)
          CHECK(b.at(i, j) == kInf);
        else
          CHECK(a.at(i, j) == doctest::Approx(b.at(i, j)).epsilon(1e-12));
      }
  }
}

TEST_CASE("triangle inequality and symmetry on random graphs") {
  std::mt19937_64 rng(5);
  for (int rep = 0; rep < 20; ++rep) {
    const DistanceMatrix d = shortest_path_metric(oracle::random_graph(8, rng));
    for (int i = 0; i < d.n; ++i)
      for (int j = 0; j < d.n; ++j) {
        CHECK(d.at(i, j) == d.at(j, i));
        for (int k = 0; k < d.n; ++k)
          if (d.at(i, k) != kInf && d.at(k, j) != kInf)
            CHECK(d.at(i, j) <= d.at(i, k) + d.at(k, j) + 1e-12);
      }
  }
}

TEST_CASE("vietoris-rips cell census") {
  SUBCASE("3-cycle") {
    const FilteredComplex fc = vietoris_rips(shortest_path_metric(cycle(3)), 2, 2.0);
    CHECK(count_cells(fc, 0, 0.0) == 3);
    CHECK(count_cells(fc, 1, 1.0) == 3);
    CHECK(count_cells(fc, 2, 1.0) == 1);
    CHECK(fc.size() == 7);
  }
  SUBCASE("4-cycle: diagonals and triangles enter at 2") {
    const FilteredComplex fc = vietoris_rips(shortest_path_metric(cycle(4)), 2, 2.0);
    CHECK(count_cells(fc, 0, 0.0) == 4);
    CHECK(count_cells(fc, 1, 1.0) == 4);
    CHECK(count_cells(fc, 1, 2.0) == 2);
    CHECK(count_cells(fc, 2, 2.0) == 4);
  }
  SUBCASE("empty graph") {
    const FilteredComplex fc = vietoris_rips(DistanceMatrix(0), 2, 1.0);
    CHECK(fc.size() == 0);
  }
}

TEST_CASE("vietoris-rips is monotone in max_scale") {
  std::mt19937_64 rng(9);
  for (int rep = 0; rep < 20; ++rep) {
    const DistanceMatrix d = shortest_path_metric(oracle::random_graph(6, rng));
    const FilteredComplex small = vietoris_rips(d, 2, 1.0);
    const FilteredComplex big = vietoris_rips(d, 2, 2.5);
    CHECK(small.size() <= big.size());
    std::set<std::pair<int, double>> big_cells;
    for (const Cell& c : big.cells) big_cells.insert({c.dim, c.value});
    for (const Cell& c : small.cells) CHECK(big_cells.count({c.dim, c.value}) == 1);
  }
}

TEST_CASE("degree filtration") {
  SUBCASE("star with three leaves") {
    Graph g;
    g.n_vertices = 4;
    g.edges = {{0, 1}, {0, 2}, {0, 3}};
    const FilteredComplex fc = degree_filtration(g);
    CHECK(count_cells(fc, 0, 1.0) == 3);
    CHECK(count_cells(fc, 0, 3.0) == 1);
    CHECK(count_cells(fc, 1, 3.0) == 3);
  }
  SUBCASE("single edge") {
    Graph g;
    g.n_vertices = 2;
    g.edges = {{0, 1}};
    const FilteredComplex fc = degree_filtration(g);
    CHECK(count_cells(fc, 0, 1.0) == 2);
    CHECK(count_cells(fc, 1, 1.0) == 1);
  }
  SUBCASE("path on three vertices") {
    Graph g;
    g.n_vertices = 3;
    g.edges = {{0, 1}, {1, 2}};
    const FilteredComplex fc = degree_filtration(g);
    CHECK(count_cells(fc, 0, 1.0) == 2);
    CHECK(count_cells(fc, 0, 2.0) == 1);
    CHECK(count_cells(fc, 1, 2.0) == 2);
  }
  SUBCASE("regular graphs get a constant filtration") {
    const FilteredComplex fc = degree_filtration(cycle(6));
    for (const Cell& c : fc.cells) CHECK(c.value == 2.0);
  }
}

TEST_CASE("cubical filtration by-hand values") {
  SUBCASE("1x1") {
    const FilteredComplex fc = cubical_filtration(image(1, 1, {0.5}));
    CHECK(fc.size() == 9);
    for (const Cell& c : fc.cells) CHECK(c.value == 0.5);
  }
  SUBCASE("1x2: shared face takes the min") {
    const FilteredComplex fc = cubical_filtration(image(2, 1, {0.2, 0.8}));
    // 2 squares, 7 edges, 6 vertices; everything incident to the left pixel
    // (including the shared edge and its endpoints) sits at 0.2.
    CHECK(fc.size() == 15);
    CHECK(count_cells(fc, 2, 0.2) == 1);
    CHECK(count_cells(fc, 2, 0.8) == 1);
    CHECK(count_cells(fc, 1, 0.2) == 4);
    CHECK(count_cells(fc, 1, 0.8) == 3);
    CHECK(count_cells(fc, 0, 0.2) == 4);
    CHECK(count_cells(fc, 0, 0.8) == 2);
  }
  SUBCASE("2x2: center vertex is the min over all four pixels") {
    const FilteredComplex fc = cubical_filtration(image(2, 2, {0.0, 1.0, 1.0, 0.8}));
    int zero_vertices = 0;
    for (const Cell& c : fc.cells)
      if (c.dim == 0 && c.value == 0.0) ++zero_vertices;
    CHECK(zero_vertices == 4);  // the four corners of the 0-pixel, center included
  }
}

TEST_CASE("cubical faces equal the min of incident pixels") {
  std::mt19937_64 rng(21);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int rep = 0; rep < 10; ++rep) {
    const int w = 1 + static_cast<int>(rng() % 5), h = 1 + static_cast<int>(rng() % 5);
    std::vector<double> v(static_cast<std::size_t>(w) * h);
    for (double& x : v) x = u(rng);
    const GreyImage img = image(w, h, v);
    const FilteredComplex fc = cubical_filtration(img);
    // Squares carry pixel values; every face value must be the min over the
    // squares containing it, which is at most the value of any incident cell.
    for (const Cell& c : fc.cells)
      for (int b : c.boundary) CHECK(fc.cells[b].value <= c.value);
    // And each square's value must appear exactly as its pixel's value.
    std::multiset<double> squares, pixels(v.begin(), v.end());
    for (const Cell& c : fc.cells)
      if (c.dim == 2) squares.insert(c.value);
    CHECK(squares == pixels);
  }
}

TEST_CASE("every builder satisfies the sublevel property") {
  std::mt19937_64 rng(33);
  for (int rep = 0; rep < 25; ++rep) {
    const Graph g = oracle::random_graph(7, rng);
    for (const FilteredComplex& fc :
         {vietoris_rips(shortest_path_metric(g), 2, 3.0), degree_filtration(g)}) {
      for (const Cell& c : fc.cells)
        for (int b : c.boundary) CHECK(fc.cells[b].value <= c.value);
      CHECK_NOTHROW(validate_filtration(fc));
    }
  }
}

TEST_CASE("finalize rejects a sublevel violation") {
  std::vector<Cell> cells;
  cells.push_back({0, 0, {}, 1.0});
  cells.push_back({1, 0, {}, 1.0});
  cells.push_back({2, 1, {0, 1}, 0.5});  // edge before its endpoints
  CHECK_THROWS(finalize_complex(std::move(cells)));
}

TEST_CASE("height transform") {
  SUBCASE("direction (1,0) increases left to right on foreground") {
    GreyImage img = image(3, 3, {1, 1, 1, 1, 1, 1, 1, 1, 1});
    const GreyImage out = height_transform(img, 1.0, 0.0);
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x + 1 < 3; ++x) CHECK(out.at(x, y) < out.at(x + 1, y));
  }
  SUBCASE("all background is constant") {
    GreyImage img = image(2, 2, {0.0, 0.0, 0.0, 0.0});
    const GreyImage out = height_transform(img, 1.0, 0.0);
    for (double v : out.values) CHECK(v == 1.0);
  }
  SUBCASE("direction (0,1) on one foreground column is strictly monotone") {
    GreyImage img = image(3, 4, std::vector<double>(12, 0.0));
    for (int y = 0; y < 4; ++y) img.at(1, y) = 1.0;
    const GreyImage out = height_transform(img, 0.0, 1.0);
    for (int y = 0; y + 1 < 4; ++y) CHECK(out.at(1, y) < out.at(1, y + 1));
  }
  SUBCASE("foreground values stay within [0,1] and background is 1") {
    GreyImage img = image(3, 3, {1, 0, 1, 0, 1, 0, 1, 0, 1});
    const GreyImage out = height_transform(img, std::sqrt(0.5), -std::sqrt(0.5));
    for (int y = 0; y < 3; ++y)
      for (int x = 0; x < 3; ++x) {
        CHECK(out.at(x, y) >= 0.0);
        CHECK(out.at(x, y) <= 1.0);
        if (img.at(x, y) < 0.5) CHECK(out.at(x, y) == 1.0);
      }
  }
  SUBCASE("non-unit direction is rejected") {
    GreyImage img = image(1, 1, {1.0});
    CHECK_THROWS(height_transform(img, 1.0, 1.0));
  }
}

TEST_CASE("uniform directions") {
  const auto one = uniform_directions(1);
  REQUIRE(one.size() == 1);
  CHECK(one[0][0] == doctest::Approx(1.0));
  CHECK(one[0][1] == doctest::Approx(0.0).epsilon(1e-12));

  const auto two = uniform_directions(2);
  CHECK(two[1][0] == doctest::Approx(-1.0));

  const auto four = uniform_directions(4);
  REQUIRE(four.size() == 4);
  CHECK(four[1][0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(four[1][1] == doctest::Approx(1.0));
  CHECK(four[2][0] == doctest::Approx(-1.0));
  CHECK(four[3][1] == doctest::Approx(-1.0));
  for (const auto& d : four) CHECK(std::hypot(d[0], d[1]) == doctest::Approx(1.0).epsilon(1e-12));
}
