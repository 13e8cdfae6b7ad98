#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace pdball {

// Thread-local count of saturated clamps (ball radius cap, acos/atanh domain
// margins). Gradient code treats a saturated clamp as locally constant, so
// callers that care about differentiability (gradient checks, the gradcheck
// command) reset this counter before evaluating and poll it afterwards.
std::uint64_t clamp_events();
void reset_clamp_events();
void note_clamp_event();

/// Thrown by Tape::backward when a value or adjoint is NaN; carries the id of
/// the first offending node so the failing operation can be located.
struct tape_nan_error : std::runtime_error {
  explicit tape_nan_error(int node_id);
  int node;
};

/// Scalar reverse-mode tape. Every recorded node has at most two parents and
/// stores the local partial derivative towards each. Nodes are appended in
/// evaluation order, which is already a topological order, so the backward
/// pass is a single reverse sweep over the node array.
class Tape {
 public:
  struct Node {
    double value;
    std::int32_t parent[2];
    double partial[2];
  };

  int leaf(double v) {
    nodes_.push_back(Node{v, {-1, -1}, {0.0, 0.0}});
    return static_cast<int>(nodes_.size()) - 1;
  }
  int unary(double v, int p, double d) {
    nodes_.push_back(Node{v, {p, -1}, {d, 0.0}});
    return static_cast<int>(nodes_.size()) - 1;
  }
  int binary(double v, int p0, double d0, int p1, double d1) {
    nodes_.push_back(Node{v, {p0, p1}, {d0, d1}});
    return static_cast<int>(nodes_.size()) - 1;
  }

  std::size_t size() const { return nodes_.size(); }
  double value(int id) const { return nodes_[id].value; }
  void clear() { nodes_.clear(); }

  /// Adjoint of every node w.r.t. the scalar at `root`.
  std::vector<double> backward(int root) const;

  /// Adjoints with several output nodes seeded at once (used to pull a
  /// vector-valued output's upstream gradient back in one sweep).
  std::vector<double> backward(std::span<const int> roots,
                               std::span<const double> seeds) const;

 private:
  std::vector<Node> nodes_;
};

/// Handle to one tape node. Carries the value so arithmetic reads never touch
/// the tape; the tape is only appended to.
struct Var {
  Tape* tape = nullptr;
  int id = -1;
  double v = 0.0;
};

inline Var make_var(Tape& t, double v) { return Var{&t, t.leaf(v), v}; }

/// Uniform value access so numeric code can be templated over double / Var.
inline double val(double x) { return x; }
inline double val(const Var& x) { return x.v; }

namespace detail {
inline Var record1(const Var& x, double v, double d) {
  return Var{x.tape, x.tape->unary(v, x.id, d), v};
}
inline Var record2(const Var& x, const Var& y, double v, double dx, double dy) {
  return Var{x.tape, x.tape->binary(v, x.id, dx, y.id, dy), v};
}
}  // namespace detail

inline Var operator+(const Var& a, const Var& b) { return detail::record2(a, b, a.v + b.v, 1.0, 1.0); }
inline Var operator+(const Var& a, double b) { return detail::record1(a, a.v + b, 1.0); }
inline Var operator+(double a, const Var& b) { return b + a; }

inline Var operator-(const Var& a, const Var& b) { return detail::record2(a, b, a.v - b.v, 1.0, -1.0); }
inline Var operator-(const Var& a, double b) { return detail::record1(a, a.v - b, 1.0); }
inline Var operator-(double a, const Var& b) { return detail::record1(b, a - b.v, -1.0); }
inline Var operator-(const Var& a) { return detail::record1(a, -a.v, -1.0); }

inline Var operator*(const Var& a, const Var& b) { return detail::record2(a, b, a.v * b.v, b.v, a.v); }
inline Var operator*(const Var& a, double b) { return detail::record1(a, a.v * b, b); }
inline Var operator*(double a, const Var& b) { return b * a; }

inline Var operator/(const Var& a, const Var& b) {
  return detail::record2(a, b, a.v / b.v, 1.0 / b.v, -a.v / (b.v * b.v));
}
inline Var operator/(const Var& a, double b) { return detail::record1(a, a.v / b, 1.0 / b); }
inline Var operator/(double a, const Var& b) { return detail::record1(b, a / b.v, -a / (b.v * b.v)); }

inline Var& operator+=(Var& a, const Var& b) { return a = a + b; }
inline Var& operator+=(Var& a, double b) { return a = a + b; }
inline Var& operator-=(Var& a, const Var& b) { return a = a - b; }
inline Var& operator*=(Var& a, const Var& b) { return a = a * b; }
inline Var& operator*=(Var& a, double b) { return a = a * b; }

inline Var exp(const Var& x) {
  double e = std::exp(x.v);
  return detail::record1(x, e, e);
}
inline Var log(const Var& x) { return detail::record1(x, std::log(x.v), 1.0 / x.v); }
inline Var sqrt(const Var& x) {
  double s = std::sqrt(x.v);
  return detail::record1(x, s, 0.5 / s);
}
inline Var sin(const Var& x) { return detail::record1(x, std::sin(x.v), std::cos(x.v)); }
inline Var cos(const Var& x) { return detail::record1(x, std::cos(x.v), -std::sin(x.v)); }
inline Var tanh(const Var& x) {
  double t = std::tanh(x.v);
  return detail::record1(x, t, 1.0 - t * t);
}
inline Var atanh(const Var& x) {
  return detail::record1(x, std::atanh(x.v), 1.0 / (1.0 - x.v * x.v));
}
inline Var atan(const Var& x) {
  return detail::record1(x, std::atan(x.v), 1.0 / (1.0 + x.v * x.v));
}
inline Var asin(const Var& x) {
  return detail::record1(x, std::asin(x.v), 1.0 / std::sqrt(1.0 - x.v * x.v));
}
inline Var acos(const Var& x) {
  return detail::record1(x, std::acos(x.v), -1.0 / std::sqrt(1.0 - x.v * x.v));
}
inline Var acosh(const Var& x) {
  return detail::record1(x, std::acosh(x.v), 1.0 / std::sqrt(x.v * x.v - 1.0));
}
// |x| with the subgradient convention abs'(0) = 0.
inline Var abs(const Var& x) {
  double s = x.v > 0.0 ? 1.0 : (x.v < 0.0 ? -1.0 : 0.0);
  return detail::record1(x, std::abs(x.v), s);
}
inline Var atan2(const Var& y, const Var& x) {
  const double den = x.v * x.v + y.v * y.v;
  return detail::record2(y, x, std::atan2(y.v, x.v), x.v / den, -y.v / den);
}
inline Var sq(const Var& x) { return detail::record1(x, x.v * x.v, 2.0 * x.v); }
inline double sq(double x) { return x * x; }

// Make the double overloads visible next to the Var ones so code templated
// over the scalar type resolves either through unqualified calls.
using std::abs;
using std::acos;
using std::acosh;
using std::asin;
using std::atan;
using std::atan2;
using std::atanh;
using std::cos;
using std::exp;
using std::log;
using std::sin;
using std::sqrt;
using std::tanh;

/// Clamp to [lo, hi]. Inside the interval the gradient passes through; at a
/// saturated bound the output is treated as constant (zero derivative) and a
/// clamp event is recorded.
inline Var clamp(const Var& x, double lo, double hi) {
  if (x.v < lo) {
    note_clamp_event();
    return detail::record1(x, lo, 0.0);
  }
  if (x.v > hi) {
    note_clamp_event();
    return detail::record1(x, hi, 0.0);
  }
  return detail::record1(x, x.v, 1.0);
}
inline double clamp(double x, double lo, double hi) {
  if (x < lo) {
    note_clamp_event();
    return lo;
  }
  if (x > hi) {
    note_clamp_event();
    return hi;
  }
  return x;
}

}  // namespace pdball
