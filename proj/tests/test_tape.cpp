#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <random>

#include "doctest.h"
#include "oracles.hpp"
#include "pdball/tape.hpp"

using namespace pdball;

namespace {

double grad_of(const std::function<Var(Var)>& f, double x) {
  Tape t;
  Var v = make_var(t, x);
  Var y = f(v);
  return t.backward(y.id)[v.id];
}

}  // namespace

TEST_CASE("arithmetic adjoints match finite differences") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.1, 0.9);
  for (int rep = 0; rep < 200; ++rep) {
    const double x = u(rng);
    auto f = [](auto v) { return exp(v * v) / (1.0 + v) - log(v + 2.0) * sin(v) + sqrt(v); };
    const double analytic = grad_of(f, x);
    const double numeric = oracle::central_diff([&](double z) { return val(f(z)); }, x);
    CHECK(oracle::rel_err(analytic, numeric) < 1e-7);
  }
}

TEST_CASE("unary primitives") {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.05, 0.9);
  const std::vector<std::pair<std::function<Var(Var)>, std::function<double(double)>>> ops = {
      {[](Var v) { return tanh(v); }, [](double z) { return std::tanh(z); }},
      {[](Var v) { return atanh(v); }, [](double z) { return std::atanh(z); }},
      {[](Var v) { return atan(v); }, [](double z) { return std::atan(z); }},
      {[](Var v) { return asin(v); }, [](double z) { return std::asin(z); }},
      {[](Var v) { return acos(v); }, [](double z) { return std::acos(z); }},
      {[](Var v) { return acosh(v + 1.2); }, [](double z) { return std::acosh(z + 1.2); }},
      {[](Var v) { return sq(v); }, [](double z) { return z * z; }},
      {[](Var v) { return cos(v); }, [](double z) { return std::cos(z); }},
  };
  for (const auto& [fv, fd] : ops)
    for (int rep = 0; rep < 40; ++rep) {
      const double x = u(rng);
      CHECK(oracle::rel_err(grad_of(fv, x), oracle::central_diff(fd, x)) < 1e-6);
    }
}

TEST_CASE("atan2 partials") {
  Tape t;
  Var y = make_var(t, 0.3);
  Var x = make_var(t, -0.7);
  Var a = atan2(y, x);
  const Vec adj = t.backward(a.id);
  const double den = 0.3 * 0.3 + 0.7 * 0.7;
  CHECK(adj[y.id] == doctest::Approx(-0.7 / den).epsilon(1e-12));
  CHECK(adj[x.id] == doctest::Approx(-0.3 / den).epsilon(1e-12));
}

TEST_CASE("fan-out accumulates adjoints") {
  // y = x*x + x/2: the leaf feeds two paths, adjoints must add.
  Tape t;
  Var x = make_var(t, 3.0);
  Var y = x * x + x / 2.0;
  CHECK(t.backward(y.id)[x.id] == doctest::Approx(6.5).epsilon(1e-14));
}

TEST_CASE("multi-root backward seeds several outputs at once") {
  Tape t;
  Var x = make_var(t, 0.4);
  Var a = sq(x);
  Var b = sin(x);
  const int roots[] = {a.id, b.id};
  const double seeds[] = {2.0, -1.0};
  const Vec adj = t.backward(std::span<const int>(roots, 2), std::span<const double>(seeds, 2));
  CHECK(adj[x.id] == doctest::Approx(2.0 * 2.0 * 0.4 - std::cos(0.4)).epsilon(1e-12));
}

TEST_CASE("abs subgradient at zero is zero") {
  CHECK(grad_of([](Var v) { return abs(v); }, 0.0) == 0.0);
  CHECK(grad_of([](Var v) { return abs(v); }, -0.5) == -1.0);
  CHECK(grad_of([](Var v) { return abs(v); }, 0.5) == 1.0);
}

TEST_CASE("clamp: pass-through inside, constant beyond, event recorded") {
  reset_clamp_events();
  CHECK(grad_of([](Var v) { return clamp(v, 0.0, 1.0); }, 0.5) == 1.0);
  CHECK(clamp_events() == 0);
  CHECK(grad_of([](Var v) { return clamp(v, 0.0, 1.0); }, 1.5) == 0.0);
  CHECK(clamp_events() == 1);
  reset_clamp_events();
}

TEST_CASE("nan detection names the offending node") {
  Tape t;
  Var x = make_var(t, -1.0);
  Var y = sqrt(x);  // value NaN
  Var z = y + 1.0;
  CHECK_THROWS_AS(t.backward(z.id), tape_nan_error);
  try {
    t.backward(z.id);
  } catch (const tape_nan_error& e) {
    CHECK(e.node == y.id);
  }
}

TEST_CASE("identity chain: gradient of sum of inputs is one each") {
  Tape t;
  std::vector<Var> xs;
  for (int i = 0; i < 5; ++i) xs.push_back(make_var(t, 0.1 * (i + 1)));
  Var s = xs[0];
  for (int i = 1; i < 5; ++i) s += xs[i];
  const Vec adj = t.backward(s.id);
  for (const Var& x : xs) CHECK(adj[x.id] == 1.0);
}
