#include <catch2/catch_amalgamated.hpp>

#include "support.hpp"

using namespace propnormal;
using Catch::Approx;

namespace {

Vec vec2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

bool bit_equal(double a, double b) {
  std::uint64_t ua, ub;
  std::memcpy(&ua, &a, sizeof ua);
  std::memcpy(&ub, &b, sizeof ub);
  return ua == ub;
}

}  // namespace

TEST_CASE("parse builds the expected trees") {
  Expr ellipse = Expr::parse("x1^2 + 2*x2^2 - 1", 2);
  CHECK(ellipse.unparse() == "x1^2 + 2*x2^2 - 1");

  Expr manual = Expr::binary(
      Expr::BinaryOp::Sub,
      Expr::binary(
          Expr::BinaryOp::Add,
          Expr::binary(Expr::BinaryOp::Pow, Expr::variable(1, 2),
                       Expr::constant(2, 2)),
          Expr::binary(Expr::BinaryOp::Mul, Expr::constant(2, 2),
                       Expr::binary(Expr::BinaryOp::Pow, Expr::variable(2, 2),
                                    Expr::constant(2, 2)))),
      Expr::constant(1, 2));
  CHECK(ellipse.same_tree(manual));

  Expr id = Expr::parse("x1", 2);
  CHECK(id.eval(vec2(3, 5)) == 3.0);

  CHECK_NOTHROW(Expr::parse("x1^2 + x2^2 + x3^2 - 1", 3));
}

TEST_CASE("parse errors carry byte offsets") {
  auto offset_of = [](const std::string& text, int dim) -> std::size_t {
    try {
      Expr::parse(text, dim);
    } catch (const ParseError& e) {
      return e.offset();
    }
    FAIL("expected a parse error for: " << text);
    return 0;
  };
  CHECK(offset_of("x3 + 1", 2) == 0);       // variable out of range
  CHECK(offset_of("x1 + ", 2) == 5);        // missing operand
  CHECK(offset_of("(x1 + x2", 2) == 8);     // missing ')'
  CHECK(offset_of("sin x1", 2) == 4);       // function needs '('
  CHECK(offset_of("2x1", 2) == 1);          // no implicit multiplication
  CHECK(offset_of("x1 $ x2", 2) == 3);      // stray character
  CHECK(offset_of("foo(x1)", 2) == 0);      // unknown function
  CHECK_THROWS_AS(Expr::parse("x1", 1), ParseError);  // dim < 2
}

TEST_CASE("pow binds one level only, as a factor") {
  CHECK_THROWS_AS(Expr::parse("x1^2^3", 2), ParseError);
  CHECK_NOTHROW(Expr::parse("(x1^2)^3", 2));
  // '-' binds inside the base, so -x1^2 is (-x1)^2
  Expr direct = Expr::parse("-x1^2", 2);
  CHECK(direct.eval(vec2(3, 0)) == 9.0);
  Expr wrapped = Expr::parse("-(x1^2)", 2);
  CHECK(wrapped.eval(vec2(3, 0)) == -9.0);
  CHECK_FALSE(direct.same_tree(wrapped));
}

TEST_CASE("jets of simple expressions are exact") {
  Expr ellipse = Expr::parse("x1^2 + 2*x2^2 - 1", 2);
  Jet2 j = ellipse.eval_jet2(vec2(1, 0));
  CHECK(j.value == 0.0);
  CHECK(j.grad[0] == 2.0);
  CHECK(j.grad[1] == 0.0);
  CHECK(j.hess(0, 0) == 2.0);
  CHECK(j.hess(0, 1) == 0.0);
  CHECK(j.hess(1, 0) == 0.0);
  CHECK(j.hess(1, 1) == 4.0);

  Expr prod = Expr::parse("x1*x2", 2);
  Jet2 p = prod.eval_jet2(vec2(2, 3));
  CHECK(p.value == 6.0);
  CHECK(p.grad[0] == 3.0);
  CHECK(p.grad[1] == 2.0);
  CHECK(p.hess(0, 0) == 0.0);
  CHECK(p.hess(0, 1) == 1.0);
  CHECK(p.hess(1, 0) == 1.0);
  CHECK(p.hess(1, 1) == 0.0);
}

TEST_CASE("trig jet matches central differences") {
  Expr e = Expr::parse("sin(x1) + cos(x2)", 2);
  Vec x = vec2(0.3, 0.7);
  Jet2 j = e.eval_jet2(x);
  Vec fd = testsupport::fd_gradient([&](const Vec& p) { return e.eval(p); }, x,
                                    1e-5);
  CHECK((j.grad - fd).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("domain errors and the integer-exponent rule") {
  Vec x = vec2(0, 0);
  CHECK_THROWS_AS(Expr::parse("log(x1)", 2).eval_jet2(x), EvalError);
  CHECK_THROWS_AS(Expr::parse("sqrt(x1 - 1)", 2).eval_jet2(x), EvalError);
  CHECK_THROWS_AS(Expr::parse("1/x1", 2).eval_jet2(x), EvalError);
  CHECK_THROWS_AS(Expr::parse("abs(x1)", 2).eval_jet2(x), EvalError);
  // abs away from zero is fine
  Jet2 a = Expr::parse("abs(x1)", 2).eval_jet2(vec2(-3, 0));
  CHECK(a.value == 3.0);
  CHECK(a.grad[0] == -1.0);

  // integer exponents work for any base
  Jet2 cube = Expr::parse("x1^3", 2).eval_jet2(vec2(-2, 0));
  CHECK(cube.value == -8.0);
  CHECK(cube.grad[0] == 12.0);
  CHECK(cube.hess(0, 0) == -12.0);
  Jet2 inv = Expr::parse("x1^-2", 2).eval_jet2(vec2(2, 0));
  CHECK(inv.value == 0.25);
  CHECK(inv.grad[0] == Approx(-0.25));
  CHECK_THROWS_AS(Expr::parse("x1^-1", 2).eval_jet2(vec2(0, 0)), EvalError);

  // non-integer exponents require a positive base
  CHECK_THROWS_AS(Expr::parse("x1^0.5", 2).eval_jet2(vec2(-1, 0)), EvalError);
  Jet2 root = Expr::parse("x1^0.5", 2).eval_jet2(vec2(4, 0));
  CHECK(root.value == Approx(2.0));
  CHECK(root.grad[0] == Approx(0.25));

  // variable exponent goes through the exp(log) path
  Jet2 vp = Expr::parse("x1^x2", 2).eval_jet2(vec2(2, 3));
  CHECK(vp.value == Approx(8.0));
  CHECK(vp.grad[0] == Approx(12.0));                  // b a^(b-1)
  CHECK(vp.grad[1] == Approx(8.0 * std::log(2.0)));   // a^b log a

  // overflow to non-finite is an error, not a NaN result
  CHECK_THROWS_AS(Expr::parse("exp(exp(exp(x1)))", 2).eval_jet2(vec2(100, 0)),
                  EvalError);
}

TEST_CASE("jet gradients and Hessians agree with finite differences",
          "[property]") {
  testsupport::Rng rng(20240817);
  int checked = 0;
  for (int trial = 0; trial < 1000; ++trial) {
    int dim = 2 + static_cast<int>(rng.uniform() * 2.0);  // 2 or 3
    Expr e = testsupport::random_smooth_expr(rng, dim, 4);
    Vec x = testsupport::random_point(rng, dim);
    Jet2 j;
    try {
      j = e.eval_jet2(x);
    } catch (const EvalError&) {
      continue;  // rare: abs at 0 or an overflowing product
    }
    auto f = [&](const Vec& p) { return e.eval(p); };
    Vec fd_g = testsupport::fd_gradient(f, x, 1e-5);
    Mat fd_h = testsupport::fd_hessian(f, x, 1e-4);
    double gscale = 1.0 + j.grad.cwiseAbs().maxCoeff();
    double hscale = 1.0 + j.hess.cwiseAbs().maxCoeff();
    INFO("expr: " << e.unparse());
    INFO("point: " << format_point(x));
    REQUIRE((j.grad - fd_g).cwiseAbs().maxCoeff() <= 1e-6 * gscale);
    REQUIRE((j.hess - fd_h).cwiseAbs().maxCoeff() <= 1e-4 * hscale);
    ++checked;
  }
  // the generator must not degenerate into mostly-failing expressions
  CHECK(checked > 900);
}

TEST_CASE("Hessians are bit-identical across the diagonal", "[property]") {
  testsupport::Rng rng(31415);
  for (int trial = 0; trial < 300; ++trial) {
    int dim = 2 + static_cast<int>(rng.uniform() * 3.0);  // 2..4
    Expr e = testsupport::random_smooth_expr(rng, dim, 5);
    Vec x = testsupport::random_point(rng, dim);
    Jet2 j;
    try {
      j = e.eval_jet2(x);
    } catch (const EvalError&) {
      continue;
    }
    for (int a = 0; a < dim; ++a)
      for (int b = 0; b < a; ++b) {
        INFO("expr: " << e.unparse());
        REQUIRE(bit_equal(j.hess(a, b), j.hess(b, a)));
      }
  }
}

TEST_CASE("parse-unparse-parse is idempotent", "[property]") {
  testsupport::Rng rng(424243);
  for (int trial = 0; trial < 400; ++trial) {
    int dim = 2 + static_cast<int>(rng.uniform() * 2.0);
    Expr e = testsupport::random_smooth_expr(rng, dim, 4);
    Expr once = Expr::parse(e.unparse(), dim);
    Expr twice = Expr::parse(once.unparse(), dim);
    INFO("text: " << e.unparse());
    REQUIRE(once.same_tree(twice));
    REQUIRE(once.unparse() == twice.unparse());
  }
  // hand-picked shapes where precedence printing matters
  for (const char* text :
       {"-x1^2", "-(x1^2)", "x1 - (x2 - 1)", "x1/(x2*x2 + 3)",
        "(x1 + x2)^3", "x1^-2", "-(x1 + x2)", "2/(3/(2.5 + sin(x1)))",
        "abs(x2)*sqrt(2.5 + cos(x1))", "1e-3*x1 + 1.5E+2"}) {
    Expr once = Expr::parse(text, 2);
    Expr twice = Expr::parse(once.unparse(), 2);
    INFO("text: " << text);
    REQUIRE(once.same_tree(twice));
  }
}

TEST_CASE("expression evaluation is safe under concurrent use") {
  Expr e = Expr::parse("sin(x1)*x2 + exp(cos(x2))", 2);
  Vec x = vec2(0.4, 1.1);
  Jet2 ref = e.eval_jet2(x);
  std::vector<std::thread> pool;
  std::atomic<int> mismatches{0};
  for (int t = 0; t < 4; ++t)
    pool.emplace_back([&] {
      for (int i = 0; i < 200; ++i) {
        Jet2 j = e.eval_jet2(x);
        if (j.value != ref.value || (j.grad - ref.grad).cwiseAbs().maxCoeff() != 0.0)
          mismatches.fetch_add(1);
      }
    });
  for (auto& th : pool) th.join();
  CHECK(mismatches.load() == 0);
}
