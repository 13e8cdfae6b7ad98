#include "pdball/persistence.hpp"

#include <algorithm>
#include <bit>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <tuple>

#include <json.hpp>

namespace pdball {

void normalize(PersistenceDiagram& d) {
  auto key = [](const DiagramPoint& p) { return std::tuple(p.dim, p.birth, p.death); };
  std::sort(d.points.begin(), d.points.end(),
            [&](const DiagramPoint& a, const DiagramPoint& b) { return key(a) < key(b); });
  std::vector<DiagramPoint> merged;
  for (const DiagramPoint& p : d.points) {
    if (!merged.empty() && key(merged.back()) == key(p))
      merged.back().mult += p.mult;
    else
      merged.push_back(p);
  }
  d.points = std::move(merged);
}

bool same_diagram(const PersistenceDiagram& a, const PersistenceDiagram& b) {
  PersistenceDiagram x = a, y = b;
  normalize(x);
  normalize(y);
  if (x.points.size() != y.points.size()) return false;
  for (std::size_t i = 0; i < x.points.size(); ++i) {
    const DiagramPoint &p = x.points[i], &q = y.points[i];
    if (p.dim != q.dim || p.birth != q.birth || p.death != q.death || p.mult != q.mult)
      return false;
  }
  return true;
}

namespace {

// Symmetric difference of two sorted position lists (column addition over Z/2).
std::vector<int> add_columns(const std::vector<int>& a, const std::vector<int>& b) {
  std::vector<int> out;
  out.reserve(a.size() + b.size());
  std::size_t i = 0, j = 0;
  while (i < a.size() && j < b.size()) {
    if (a[i] < b[j])
      out.push_back(a[i++]);
    else if (b[j] < a[i])
      out.push_back(b[j++]);
    else {
      ++i;
      ++j;
    }
  }
  out.insert(out.end(), a.begin() + i, a.end());
  out.insert(out.end(), b.begin() + j, b.end());
  return out;
}

}  // namespace

PersistenceDiagram reduce(const FilteredComplex& fc) {
  validate_filtration(fc);
  const int n = static_cast<int>(fc.cells.size());
  std::vector<int> pos_of(n);
  for (int p = 0; p < n; ++p) pos_of[fc.ordering[p]] = p;
  int max_dim = 0;
  for (const Cell& c : fc.cells) max_dim = std::max(max_dim, c.dim);

  std::vector<std::vector<int>> col(n);   // reduced columns of negative cells
  std::vector<int> pivot_owner(n, -1);    // lowest-one position → column position
  std::vector<char> killed(n, 0);         // position paired as a birth
  std::vector<std::pair<int, int>> pairs;

  // Process dimensions top-down: a column paired at dimension d clears its
  // pivot's column in the dimension d-1 pass (it is known to reduce to zero).
  for (int d = max_dim; d >= 1; --d) {
    for (int j = 0; j < n; ++j) {
      const Cell& c = fc.cells[fc.ordering[j]];
      if (c.dim != d || killed[j]) continue;
      std::vector<int> cur;
      cur.reserve(c.boundary.size());
      for (int f : c.boundary) cur.push_back(pos_of[f]);
      std::sort(cur.begin(), cur.end());
      while (!cur.empty()) {
        const int owner = pivot_owner[cur.back()];
        if (owner < 0) break;
        cur = add_columns(cur, col[owner]);
      }
      if (!cur.empty()) {
        const int low = cur.back();
        pivot_owner[low] = j;
        killed[low] = 1;
        pairs.push_back({low, j});
        col[j] = std::move(cur);
      }
    }
  }

  PersistenceDiagram out;
  out.max_filtration = fc.max_value();
  for (auto [bi, di] : pairs) {
    const Cell& cb = fc.cells[fc.ordering[bi]];
    const Cell& cd = fc.cells[fc.ordering[di]];
    if (cb.value == cd.value) continue;  // zero persistence
    out.points.push_back({cb.dim, cb.value, cd.value, 1});
  }
  // Unkilled positive cells create essential classes. A position is negative
  // exactly when it owns a pivot (its reduced column is nonempty).
  for (int p = 0; p < n; ++p) {
    if (killed[p] || !col[p].empty()) continue;
    const Cell& c = fc.cells[fc.ordering[p]];
    out.points.push_back({c.dim, c.value, kInf, 1});
  }
  normalize(out);
  return out;
}

std::vector<double> filtration_values(const FilteredComplex& fc) {
  std::vector<double> vals;
  vals.reserve(fc.cells.size());
  for (const Cell& c : fc.cells) vals.push_back(c.value);
  std::sort(vals.begin(), vals.end());
  vals.erase(std::unique(vals.begin(), vals.end()), vals.end());
  return vals;
}

namespace {

// Minimal GF(2) vectors for the rank oracle.
using Bits = std::vector<std::uint64_t>;

Bits make_bits(int nbits) { return Bits((nbits + 63) / 64, 0); }
void set_bit(Bits& b, int i) { b[i >> 6] |= std::uint64_t(1) << (i & 63); }
void xor_into(Bits& a, const Bits& b) {
  for (std::size_t i = 0; i < a.size(); ++i) a[i] ^= b[i];
}
int highest_bit(const Bits& b) {
  for (int w = static_cast<int>(b.size()) - 1; w >= 0; --w)
    if (b[w]) return w * 64 + 63 - std::countl_zero(b[w]);
  return -1;
}

int gf2_rank(std::vector<Bits> vecs) {
  std::vector<std::pair<int, Bits>> pivots;
  int rank = 0;
  for (Bits& v : vecs) {
    for (const auto& [p, pv] : pivots)
      if (p >= 0 && (v[p >> 6] >> (p & 63)) & 1) xor_into(v, pv);
    const int h = highest_bit(v);
    if (h >= 0) {
      pivots.push_back({h, v});
      ++rank;
    }
  }
  return rank;
}

}  // namespace

int persistent_betti(const FilteredComplex& fc, int n, int i, int j) {
  const std::vector<double> values = filtration_values(fc);
  const int d = static_cast<int>(values.size());
  if (n < 0 || i < 0 || j < i || j > d)
    throw std::out_of_range("persistent betti: bad dimension or index");
  const double ai = i == 0 ? -kInf : values[i - 1];
  const double aj = j == 0 ? -kInf : values[j - 1];

  // Column space: n-cells of K_j, indexed by id order.
  std::vector<int> ncol_of(fc.cells.size(), -1);
  int n_cols = 0;
  for (const Cell& c : fc.cells)
    if (c.dim == n && c.value <= aj) ncol_of[c.id] = n_cols++;
  // Row space for boundaries: (n-1)-cells, indexed by id order.
  std::vector<int> row_of(fc.cells.size(), -1);
  int n_rows = 0;
  for (const Cell& c : fc.cells)
    if (c.dim == n - 1) row_of[c.id] = n_rows++;
  if (n_cols == 0) return 0;

  // Kernel of the boundary map on the n-cells of K_i, expressed over the
  // n-cells of K_j (augmented elimination tracks the column combinations).
  std::vector<Bits> kernel;
  {
    std::vector<std::pair<int, std::pair<Bits, Bits>>> pivots;  // pivot row, (bvec, track)
    for (const Cell& c : fc.cells) {
      if (c.dim != n || !(c.value <= ai)) continue;
      Bits bvec = make_bits(std::max(n_rows, 1));
      for (int f : c.boundary) set_bit(bvec, row_of[f]);
      Bits track = make_bits(n_cols);
      set_bit(track, ncol_of[c.id]);
      for (const auto& [p, pv] : pivots)
        if ((bvec[p >> 6] >> (p & 63)) & 1) {
          xor_into(bvec, pv.first);
          xor_into(track, pv.second);
        }
      const int h = highest_bit(bvec);
      if (h >= 0)
        pivots.push_back({h, {bvec, track}});
      else
        kernel.push_back(track);
    }
  }

  // Boundaries of the (n+1)-cells of K_j.
  std::vector<Bits> boundaries;
  for (const Cell& c : fc.cells) {
    if (c.dim != n + 1 || !(c.value <= aj)) continue;
    Bits v = make_bits(n_cols);
    for (int f : c.boundary) set_bit(v, ncol_of[f]);
    boundaries.push_back(v);
  }

  const int rank_b = gf2_rank(boundaries);
  std::vector<Bits> both = kernel;
  both.insert(both.end(), boundaries.begin(), boundaries.end());
  return gf2_rank(std::move(both)) - rank_b;
}

BettiTable betti_table(const FilteredComplex& fc, int n_dims) {
  BettiTable bt;
  bt.n_dims = n_dims;
  bt.values = filtration_values(fc);
  const int d = bt.d();
  bt.beta.assign(static_cast<std::size_t>(n_dims) * (d + 1) * (d + 1), 0);
  for (int n = 0; n < n_dims; ++n)
    for (int i = 0; i <= d; ++i)
      for (int j = i; j <= d; ++j)
        bt.beta[(static_cast<std::size_t>(n) * (d + 1) + i) * (d + 1) + j] =
            persistent_betti(fc, n, i, j);
  return bt;
}

long long multiplicity_ie(const BettiTable& bt, int n, int i, int j) {
  const int d = bt.d();
  if (n < 0 || n >= bt.n_dims || i < 1 || i > d)
    throw std::out_of_range("multiplicity: bad dimension or index");
  long long mu;
  if (j == kEssentialIndex) {
    mu = bt.at(n, i, d) - bt.at(n, i - 1, d);
  } else {
    if (j < i || j > d) throw std::out_of_range("multiplicity: bad death index");
    mu = static_cast<long long>(bt.at(n, i, j - 1)) - bt.at(n, i - 1, j - 1) -
         bt.at(n, i, j) + bt.at(n, i - 1, j);
  }
  if (mu < 0) throw std::runtime_error("multiplicity: inconsistent betti table");
  return mu;
}

PersistenceDiagram diagram_from_betti(const BettiTable& bt, double max_filtration) {
  PersistenceDiagram out;
  out.max_filtration = max_filtration;
  const int d = bt.d();
  for (int n = 0; n < bt.n_dims; ++n)
    for (int i = 1; i <= d; ++i) {
      for (int j = i + 1; j <= d; ++j) {
        const long long mu = multiplicity_ie(bt, n, i, j);
        if (mu > 0) out.points.push_back({n, bt.values[i - 1], bt.values[j - 1], mu});
      }
      const long long ess = multiplicity_ie(bt, n, i, kEssentialIndex);
      if (ess > 0) out.points.push_back({n, bt.values[i - 1], kInf, ess});
    }
  normalize(out);
  return out;
}

void write_diagram_jsonl(std::ostream& os, const PersistenceDiagram& d) {
  nlohmann::json header;
  header["max_filtration"] = d.max_filtration;
  os << header.dump() << '\n';
  for (const DiagramPoint& p : d.points) {
    nlohmann::json r;
    r["dim"] = p.dim;
    r["birth"] = p.birth;
    if (p.essential())
      r["death"] = "inf";
    else
      r["death"] = p.death;
    r["mult"] = p.mult;
    os << r.dump() << '\n';
  }
}

PersistenceDiagram read_diagram_jsonl(std::istream& is) {
  PersistenceDiagram d;
  std::string line;
  int line_no = 0;
  bool have_header = false;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.empty()) continue;
    nlohmann::json r;
    try {
      r = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("diagram line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!have_header) {
      if (!r.contains("max_filtration"))
        throw std::runtime_error("diagram line 1: missing max_filtration header");
      d.max_filtration = r["max_filtration"].get<double>();
      have_header = true;
      continue;
    }
    DiagramPoint p;
    try {
      p.dim = r.at("dim").get<int>();
      p.birth = r.at("birth").get<double>();
      p.death = r.at("death").is_string() ? kInf : r.at("death").get<double>();
      p.mult = r.at("mult").get<long long>();
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error("diagram line " + std::to_string(line_no) + ": " + e.what());
    }
    d.points.push_back(p);
  }
  if (!have_header) throw std::runtime_error("diagram: missing header line");
  return d;
}

}  // namespace pdball
