#pragma once

#include <iosfwd>

#include "pdball/filtration.hpp"

namespace pdball {

struct DiagramPoint {
  int dim = 0;
  double birth = 0.0;
  double death = kInf;  // kInf marks an essential point
  long long mult = 1;

  bool essential() const { return death == kInf; }
};

/// Multiset of birth/death points across homology dimensions. The diagonal is
/// implicit (never stored); stored points always have death > birth.
struct PersistenceDiagram {
  std::vector<DiagramPoint> points;
  double max_filtration = 0.0;  // largest cell value of the source complex
};

/// Sort by (dim, birth, death) and merge equal points into multiplicities.
void normalize(PersistenceDiagram& d);
bool same_diagram(const PersistenceDiagram& a, const PersistenceDiagram& b);

/// Persistence via boundary-matrix reduction over Z/2 (standard column
/// algorithm with the clearing optimization). Deterministic given the
/// complex's cell ordering; zero-persistence pairs are dropped.
PersistenceDiagram reduce(const FilteredComplex& fc);

/// Distinct filtration values a_1 < … < a_d; index 0 denotes the empty
/// complex throughout the Betti-table API.
std::vector<double> filtration_values(const FilteredComplex& fc);

/// Rank of the map H_n(K_i) → H_n(K_j) computed by explicit Z/2 linear
/// algebra on the two subcomplexes. A small-scale test oracle, independent of
/// `reduce`; not optimized.
int persistent_betti(const FilteredComplex& fc, int n, int i, int j);

struct BettiTable {
  int n_dims = 0;        // homology dimensions covered: 0..n_dims-1
  std::vector<double> values;  // a_1..a_d
  std::vector<int> beta;       // [n][i][j] over i,j in 0..d

  int d() const { return static_cast<int>(values.size()); }
  int at(int n, int i, int j) const {
    return beta[(static_cast<std::size_t>(n) * (d() + 1) + i) * (d() + 1) + j];
  }
};

BettiTable betti_table(const FilteredComplex& fc, int n_dims);

/// j = kEssentialIndex selects the essential multiplicity μ_n^{i,∞}.
constexpr int kEssentialIndex = -1;

/// Inclusion-exclusion multiplicity: μ_n^{i,j} = β^{i,j−1} − β^{i−1,j−1}
/// − β^{i,j} + β^{i−1,j}; essential case μ_n^{i,∞} = β^{i,d} − β^{i−1,d}.
/// Throws if the table is inconsistent (negative value).
long long multiplicity_ie(const BettiTable& bt, int n, int i, int j);

/// Diagram assembled purely from multiplicity_ie over all index pairs
/// (the cross-check oracle for `reduce`).
PersistenceDiagram diagram_from_betti(const BettiTable& bt, double max_filtration);

// JSON-lines serialization: a header line {"max_filtration": …} followed by
// one {dim, birth, death, mult} record per point, death "inf" for essential.
void write_diagram_jsonl(std::ostream& os, const PersistenceDiagram& d);
PersistenceDiagram read_diagram_jsonl(std::istream& is);

}  // namespace pdball
