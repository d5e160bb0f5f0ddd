#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <set>

#include "routh/expr.hpp"
#include "test_util.hpp"

using namespace routh;
using testutil::ExprGen;

TEST_SUITE_BEGIN("expr");

TEST_CASE("parse collects free variables") {
  Expr e = parse("0.5*(dr^2 + r^2*dtheta^2) - k/r");
  std::set<std::string> expected{"dr", "r", "dtheta", "k"};
  CHECK(free_variables(e) == expected);
}

TEST_CASE("parse builds the expected tree") {
  Expr e = parse("dx*dy - y^2");
  Expr expected = Expr::variable("dx") * Expr::variable("dy") -
                  pow(Expr::variable("y"), Expr::constant(2.0));
  CHECK(e == expected);
}

TEST_CASE("parse reports syntax errors with byte offsets") {
  try {
    parse("sin(");
    FAIL("expected ParseError");
  } catch (const ParseError& e) {
    CHECK(e.offset() == 4);
  }
  CHECK_THROWS_AS(parse("1 + "), ParseError);
  CHECK_THROWS_AS(parse("(x"), ParseError);
  CHECK_THROWS_AS(parse(""), ParseError);
  CHECK_THROWS_AS(parse("x 2"), ParseError);
}

TEST_CASE("parse rejects unknown function names") {
  CHECK_THROWS_WITH_AS(parse("foo(x)"), doctest::Contains("unknown function"),
                       ParseError);
}

TEST_CASE("grammar details") {
  // '-' binds an atom, so -2^2 is (-2)^2; exponents are right-associative.
  CHECK(eval(parse("-2^2"), {}) == doctest::Approx(4.0));
  CHECK(eval(parse("2^3^2"), {}) == doctest::Approx(512.0));
  CHECK(eval(parse("x^-1"), {{"x", 4.0}}) == doctest::Approx(0.25));
  CHECK(eval(parse("2*-3"), {}) == doctest::Approx(-6.0));
  CHECK(eval(parse("1e-2 + 1E2"), {}) == doctest::Approx(100.01));
}

TEST_CASE("eval examples") {
  CHECK(eval(parse("x^2+1"), {{"x", 2.0}}) == doctest::Approx(5.0));
  CHECK(eval(parse("dx*dy - y^2"), {{"dx", 1.0}, {"dy", 2.0}, {"y", 3.0}}) ==
        doctest::Approx(-7.0));
}

TEST_CASE("eval reports domain errors naming the node") {
  CHECK_THROWS_WITH_AS(eval(parse("sqrt(x)"), {{"x", -1.0}}),
                       doctest::Contains("sqrt"), EvalError);
  CHECK_THROWS_WITH_AS(eval(parse("1/x"), {{"x", 0.0}}),
                       doctest::Contains("division by zero"), EvalError);
  CHECK_THROWS_WITH_AS(eval(parse("log(x)"), {{"x", -2.0}}),
                       doctest::Contains("log"), EvalError);
  CHECK_THROWS_WITH_AS(eval(parse("x + y"), {{"x", 1.0}}),
                       doctest::Contains("unbound variable 'y'"), EvalError);
}

TEST_CASE("diff basic rules") {
  CHECK(diff(parse("x^2"), "x") == parse("2*x"));
  CHECK(diff(parse("dx*dy - y^2"), "dy") == Expr::variable("dx"));
  CHECK(diff(parse("x"), "z").is_zero());

  // d/ddx1 sqrt(g11*dx1^2) = g11*dx1/sqrt(g11*dx1^2), up to simplification.
  Expr d = diff(parse("sqrt(g11*dx1^2)"), "dx1");
  Expr expected = parse("g11*dx1/sqrt(g11*dx1^2)");
  ExprGen gen(11, {"g11", "dx1"});
  CHECK(testutil::eval_equivalent(d, expected, gen));
}

TEST_CASE("diff with non-constant exponent via exp/log rewrite") {
  Expr e = parse("x^y");
  Expr dx = diff(e, "x");
  Expr dy = diff(e, "y");
  Binding at{{"x", 1.7}, {"y", 2.3}};
  CHECK(eval(dx, at) ==
        doctest::Approx(testutil::finite_difference(e, "x", at)).epsilon(1e-7));
  CHECK(eval(dy, at) ==
        doctest::Approx(testutil::finite_difference(e, "y", at)).epsilon(1e-7));
}

TEST_CASE("substitute") {
  ExprGen gen(12, {"a", "r", "dr", "dth", "V"});
  CHECK(substitute(parse("dy^2"), {{"dy", parse("a")}}) == parse("a^2"));
  CHECK(substitute(parse("x"), {}) == parse("x"));
  Expr pre = substitute(parse("0.5*(dr^2+r^2*dth^2)-V"), {{"dth", parse("a/r^2")}});
  CHECK(testutil::eval_equivalent(pre, parse("0.5*(dr^2+a^2/r^2)-V"), gen));
  // Simultaneous, not sequential.
  Expr swap = substitute(parse("x + y"), {{"x", parse("y")}, {"y", parse("x")}});
  CHECK(swap == parse("y + x"));
}

TEST_CASE("simplify examples") {
  CHECK(simplify(parse("x + 0")) == parse("x"));
  CHECK(simplify(parse("2*3")) == Expr::constant(6.0));
  CHECK(simplify(parse("0.5*a^2/r^2*1 + 0.5*a^2/r^2")) == parse("a^2/r^2"));
  CHECK(simplify(parse("x*1")) == parse("x"));
  CHECK(simplify(parse("x*0")).is_zero());
  CHECK(simplify(parse("x - x")).is_zero());
  CHECK(simplify(parse("x^1")) == parse("x"));
  CHECK(simplify(parse("x^0")) == Expr::constant(1.0));
  CHECK(simplify(parse("0/x")).is_zero());
  CHECK(simplify(parse("r^2 * a/r^2")) == parse("a"));
}

TEST_CASE("simplify keeps division-by-zero errors") {
  Expr e = simplify(parse("x/0"));
  CHECK_THROWS_AS(eval(e, {{"x", 1.0}}), EvalError);
}

TEST_CASE("render/parse round trip on generated expressions") {
  ExprGen gen(21, {"x", "y", "dz_1"});
  for (int i = 0; i < 500; ++i) {
    Expr raw = gen.expr();
    // The round-trip guarantee applies to parser-produced trees.
    Expr e = parse(render(raw));
    std::string s = render(e);
    CHECK(parse(s) == e);
  }
}

TEST_CASE("derivative matches finite differences on 1000 random instances") {
  ExprGen gen(33, {"x", "y", "z"});
  int checked = 0, attempts = 0;
  while (checked < 1000 && attempts < 40000) {
    ++attempts;
    Expr e = gen.expr();
    std::string var = gen.pick_var();
    Binding at = gen.binding();
    double sym, fd;
    try {
      sym = eval(diff(e, var), at);
      double v0 = eval(e, at);
      if (std::abs(v0) > 1e3) continue;
      fd = testutil::finite_difference(e, var, at);
    } catch (const EvalError&) {
      continue;
    }
    if (std::abs(sym) < 1e-3) continue;  // relative error needs a scale
    double rel = std::abs(sym - fd) / std::max(std::abs(sym), std::abs(fd));
    if (rel > 1e-6) {
      CAPTURE(render(e));
      CAPTURE(var);
      REQUIRE(rel <= 1e-6);
    }
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("substitution and differentiation commute for constant substitution") {
  ExprGen gen(44, {"u", "v", "w"});
  int checked = 0, attempts = 0;
  while (checked < 200 && attempts < 8000) {
    ++attempts;
    Expr e = gen.expr();
    Expr c = Expr::constant(1.3);
    Expr a = diff(substitute(e, {{"u", c}}), "v");
    Expr b = substitute(diff(e, "v"), {{"u", c}});
    Binding at = gen.binding();
    double va, vb;
    try {
      va = eval(a, at);
      vb = eval(b, at);
    } catch (const EvalError&) {
      continue;
    }
    REQUIRE(std::abs(va - vb) <=
            1e-9 * std::max({1.0, std::abs(va), std::abs(vb)}));
    ++checked;
  }
  CHECK(checked == 200);
}

TEST_CASE("simplify preserves eval on 1000 random instances") {
  ExprGen gen(55, {"x", "y", "z"});
  int checked = 0, attempts = 0;
  while (checked < 1000 && attempts < 40000) {
    ++attempts;
    Expr e = gen.expr();
    Expr s = simplify(e);
    Binding at = gen.binding();
    double ve, vs;
    try {
      ve = eval(e, at);
      vs = eval(s, at);
    } catch (const EvalError&) {
      continue;
    }
    double scale = std::max({1.0, std::abs(ve), std::abs(vs)});
    if (std::abs(ve - vs) > 1e-12 * scale) {
      CAPTURE(render(e));
      CAPTURE(render(s));
      REQUIRE(std::abs(ve - vs) <= 1e-12 * scale);
    }
    ++checked;
  }
  CHECK(checked == 1000);
}

TEST_CASE("simplify is idempotent") {
  ExprGen gen(66, {"x", "y"});
  for (int i = 0; i < 1000; ++i) {
    Expr s = simplify(gen.expr());
    if (!(simplify(s) == s)) {
      CAPTURE(render(s));
      CAPTURE(render(simplify(s)));
      REQUIRE(simplify(s) == s);
    }
  }
}

TEST_CASE("compiled evaluation matches tree evaluation") {
  ExprGen gen(77, {"x", "y"});
  std::map<std::string, std::size_t> slots{{"x", 0}, {"y", 1}};
  for (int i = 0; i < 300; ++i) {
    Expr e = gen.expr();
    Binding at = gen.binding();
    double values[2] = {at["x"], at["y"]};
    double tree = 0, flat = 0;
    bool tree_threw = false, flat_threw = false;
    try {
      tree = eval(e, at);
    } catch (const EvalError&) {
      tree_threw = true;
    }
    try {
      CompiledExpr c(e, slots);
      flat = c(values);
    } catch (const EvalError&) {
      flat_threw = true;
    }
    REQUIRE(tree_threw == flat_threw);
    if (!tree_threw) CHECK(tree == flat);
  }
}

TEST_SUITE_END();
