#include <doctest.h>

#include <cmath>
#include <functional>
#include <random>

#include "starvol/exprlang.hpp"

using namespace starvol;
using namespace starvol::exprlang;

namespace {

VarSet xy() { return VarSet::of({"x", "y"}); }
VarSet momenta() { return VarSet::of({"p1", "p2"}); }

double ev(const std::string& text, const Bindings& b, const VarSet& vars) {
  return parse(text, vars).eval(b);
}

}  // namespace

TEST_SUITE("exprlang") {

TEST_CASE("literals and precedence") {
  VarSet none = VarSet::of({});
  CHECK(parse("1+2*3", none).eval(Bindings{}) == doctest::Approx(7.0));
  CHECK(parse("sin(pi/2)", none).eval(Bindings{}) == doctest::Approx(1.0));
  CHECK(parse("-2^2", none).eval(Bindings{}) == doctest::Approx(-4.0));
  CHECK(parse("2^-2", none).eval(Bindings{}) == doctest::Approx(0.25));
  CHECK(parse("2^3^2", none).eval(Bindings{}) == doctest::Approx(512.0));
  CHECK(parse("6-2-1", none).eval(Bindings{}) == doctest::Approx(3.0));
  CHECK(parse("12/2/3", none).eval(Bindings{}) == doctest::Approx(2.0));
  CHECK(parse("2*-3", none).eval(Bindings{}) == doctest::Approx(-6.0));
  CHECK(parse("min(3, max(1, 2))", none).eval(Bindings{}) == doctest::Approx(2.0));
  CHECK(parse("1e-3 + 2.5E2", none).eval(Bindings{}) == doctest::Approx(250.001));
}

TEST_CASE("syntax errors carry byte offsets") {
  VarSet vars = xy();
  CHECK_THROWS_AS(parse("x^^2", vars), SyntaxError);
  try {
    parse("x^^2", vars);
  } catch (const SyntaxError& e) {
    CHECK(e.offset() == 2);
  }
  CHECK_THROWS_AS(parse("x +", vars), SyntaxError);
  CHECK_THROWS_AS(parse("(x", vars), SyntaxError);
  CHECK_THROWS_AS(parse("x y", vars), SyntaxError);
  CHECK_THROWS_AS(parse("foo(x)", vars), SyntaxError);   // unknown function
  CHECK_THROWS_AS(parse("z+1", vars), SyntaxError);      // undeclared variable
  CHECK_THROWS_AS(parse("min(1)", vars), SyntaxError);   // arity mismatch
  CHECK_THROWS_AS(parse("sin(1,2)", vars), SyntaxError);
}

TEST_CASE("depth limit") {
  std::string deep;
  for (int i = 0; i < 80; ++i) deep += "(";
  deep += "1";
  for (int i = 0; i < 80; ++i) deep += ")";
  CHECK_THROWS_AS(parse(deep, VarSet::of({})), SyntaxError);
}

TEST_CASE("evaluation") {
  CHECK(ev("1 + 0.3*sin(2*pi*y)", {{"x", 0.0}, {"y", 0.25}}, xy()) == doctest::Approx(1.3));
  CHECK(ev("sqrt(p1^2+p2^2)", {{"p1", 3.0}, {"p2", 4.0}}, momenta()) == doctest::Approx(5.0));
}

TEST_CASE("domain faults are errors, not NaN") {
  VarSet vars = xy();
  Expr lg = parse("log(x)", vars);
  CHECK_THROWS_AS(lg.eval(Bindings{{"x", -1.0}, {"y", 0.0}}), DomainFault);
  CHECK_THROWS_AS(ev("1/ (x - x)", {{"x", 2.0}, {"y", 0.0}}, vars), DomainFault);
  CHECK_THROWS_AS(ev("sqrt(-1+x)", {{"x", 0.0}, {"y", 0.0}}, vars), DomainFault);
  CHECK_THROWS_AS(ev("(-2)^0.5", {{"x", 0.0}, {"y", 0.0}}, vars), DomainFault);
  CHECK_THROWS_AS(ev("exp(x)", {{"x", 1e4}, {"y", 0.0}}, vars), DomainFault);
  CHECK(ev("abs(-2)", {{"x", 0.0}, {"y", 0.0}}, vars) == doctest::Approx(2.0));
}

TEST_CASE("missing bindings are rejected") {
  Expr e = parse("x + y", xy());
  CHECK_THROWS_AS(e.eval(Bindings{{"x", 1.0}}), Error);
}

TEST_CASE("gradients") {
  VarSet vars = xy();
  const std::string names[2] = {"x", "y"};
  Expr sq = parse("x^2", vars);
  auto g = sq.grad({names, 1}, {{"x", 2.0}, {"y", 0.0}});
  CHECK(g[0] == doctest::Approx(4.0).epsilon(1e-8));
  Expr sn = parse("sin(x)", vars);
  g = sn.grad({names, 1}, {{"x", 0.0}, {"y", 0.0}});
  CHECK(g[0] == doctest::Approx(1.0).epsilon(1e-8));
  Expr c = parse("3", vars);
  g = c.grad({names, 2}, {{"x", 1.0}, {"y", 2.0}});
  CHECK(g[0] == doctest::Approx(0.0));
  CHECK(g[1] == doctest::Approx(0.0));
}

TEST_CASE("gradient matches exact derivative on random cubics") {
  auto rng = make_rng(11, 0);
  std::uniform_real_distribution<double> coeff(-2, 2);
  const std::string names[2] = {"x", "y"};
  auto full = [](double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "(%.17g)", v);
    return std::string(buf);
  };
  for (int trial = 0; trial < 20; ++trial) {
    const double a = coeff(rng), b = coeff(rng), c = coeff(rng), d = coeff(rng);
    const std::string text = full(a) + "*x^3 + " + full(b) + "*x^2*y + " + full(c) + "*y^2 + " +
                             full(d) + "*x";
    Expr e = parse(text, xy());
    const double x = coeff(rng), y = coeff(rng);
    auto g = e.grad({names, 2}, {{"x", x}, {"y", y}});
    const double gx = 3 * a * x * x + 2 * b * x * y + d;
    const double gy = b * x * x + 2 * c * y;
    CHECK(g[0] == doctest::Approx(gx).epsilon(1e-7));
    CHECK(g[1] == doctest::Approx(gy).epsilon(1e-7));
  }
}

TEST_CASE("print/parse round trip is stable") {
  std::vector<std::string> samples = {
      "1+2*3",       "x^2 - -y",         "sin(x)*cos(y)^2", "-(x+y)/(x-2)",
      "2^-x^2",      "min(x, max(y,1))", "sqrt(abs(x))",    "x/-2",
      "1e-3*x + pi",
  };
  // seeded random expression strings exercise the printer's parenthesization
  auto rng = make_rng(3, 1);
  std::uniform_int_distribution<int> pick(0, 5);
  std::uniform_real_distribution<double> num(-3, 3);
  std::function<std::string(int)> gen = [&](int depth) -> std::string {
    if (depth > 4 || pick(rng) == 0) {
      switch (pick(rng) % 3) {
        case 0: return std::to_string(num(rng));
        case 1: return "x";
        default: return "y";
      }
    }
    switch (pick(rng)) {
      case 1: return "(" + gen(depth + 1) + "+" + gen(depth + 1) + ")";
      case 2: return "(" + gen(depth + 1) + "*" + gen(depth + 1) + ")";
      case 3: return "(-" + gen(depth + 1) + ")";
      case 4: return "sin(" + gen(depth + 1) + ")";
      default: return "(" + gen(depth + 1) + "-" + gen(depth + 1) + ")";
    }
  };
  for (int i = 0; i < 40; ++i) samples.push_back(gen(0));

  for (const std::string& s : samples) {
    Expr once = parse(s, xy());
    Expr twice = parse(once.str(), xy());
    CHECK(once.str() == twice.str());
    // printed form evaluates identically
    Bindings b{{"x", 0.7}, {"y", -0.4}};
    double v1, v2;
    bool f1 = false, f2 = false;
    try { v1 = once.eval(b); } catch (const DomainFault&) { f1 = true; v1 = 0; }
    try { v2 = twice.eval(b); } catch (const DomainFault&) { f2 = true; v2 = 0; }
    CHECK(f1 == f2);
    if (!f1) CHECK(v1 == doctest::Approx(v2).epsilon(1e-12));
  }
}

TEST_CASE("aliases resolve to the same slot") {
  VarSet vars = VarSet::of({"x1", "x2"});
  vars.alias("x", "x1");
  vars.alias("y", "x2");
  Expr e = parse("x + 2*x2", vars);
  CHECK(e.eval(std::span<const double>(std::vector<double>{1.0, 3.0})) == doctest::Approx(7.0));
}

}  // TEST_SUITE
