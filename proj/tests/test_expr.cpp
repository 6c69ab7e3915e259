#include "fusemean/expr.hpp"
#include "fusemean/random.hpp"

#include <doctest.h>

#include <cmath>
#include <cstring>
#include <optional>

using namespace fusemean;
using namespace fusemean::expr;

namespace {

//! Straightforward tree walk; nullopt wherever evaluation must fail.
std::optional<double>
reference(const Node& n, const std::vector<double>& x)
{
  auto arg = [&](std::size_t k) { return reference(*n.args[k], x); };
  double r = 0.0;
  switch (n.op) {
    case Op::Number:
      r = n.value;
      break;
    case Op::Variable:
      r = x[static_cast<std::size_t>(n.var)];
      break;
    case Op::Neg: {
      auto a = arg(0);
      if (!a)
        return std::nullopt;
      r = -*a;
      break;
    }
    case Op::Exp:
    case Op::Log:
    case Op::Abs: {
      auto a = arg(0);
      if (!a)
        return std::nullopt;
      if (n.op == Op::Log && !(*a > 0.0))
        return std::nullopt;
      r = n.op == Op::Exp ? std::exp(*a) : n.op == Op::Log ? std::log(*a) : std::fabs(*a);
      break;
    }
    default: {
      auto a = arg(0);
      if (!a)
        return std::nullopt;
      auto b = arg(1);
      if (!b)
        return std::nullopt;
      switch (n.op) {
        case Op::Add:
          r = *a + *b;
          break;
        case Op::Sub:
          r = *a - *b;
          break;
        case Op::Mul:
          r = *a * *b;
          break;
        case Op::Div:
          if (*b == 0.0)
            return std::nullopt;
          r = *a / *b;
          break;
        case Op::Pow:
          r = std::pow(*a, *b);
          break;
        case Op::Min:
          r = std::min(*a, *b);
          break;
        default:
          r = std::max(*a, *b);
      }
    }
  }
  if (!std::isfinite(r))
    return std::nullopt;
  return r;
}

NodePtr
random_tree(CounterRng& rng, int depth, int d)
{
  if (depth == 0 || rng.bounded(4) == 0) {
    if (rng.bounded(2) == 0)
      return variable(static_cast<int>(rng.bounded(static_cast<std::uint64_t>(d))));
    static const double literals[] = { 0.0, 0.5, 1.0, 2.0, 3.0, 0.1, 10.0, 1e-3, 2.5e2 };
    return number(literals[rng.bounded(9)]);
  }
  static const Op ops[] = { Op::Neg, Op::Add, Op::Sub, Op::Mul, Op::Div, Op::Pow,
                            Op::Exp, Op::Log, Op::Abs, Op::Min, Op::Max };
  Op op = ops[rng.bounded(11)];
  if (arity(op) == 1)
    return unary(op, random_tree(rng, depth - 1, d));
  return binary(op, random_tree(rng, depth - 1, d), random_tree(rng, depth - 1, d));
}

} // namespace

TEST_CASE("parse examples")
{
  auto e = parse("x1*x2", 2);
  CHECK(e.root().op == Op::Mul);
  CHECK(equal(e.root(), *binary(Op::Mul, variable(0), variable(1))));

  auto c = parse("x1 - (x1+x2+x3)/3", 3);
  auto expected = binary(Op::Sub, variable(0),
                         binary(Op::Div, binary(Op::Add, binary(Op::Add, variable(0), variable(1)), variable(2)),
                                number(3)));
  CHECK(equal(c.root(), *expected));

  try {
    parse("x4", 3);
    FAIL("expected a parse error");
  } catch (const ParseError& err) {
    CHECK(std::string(err.what()).find("variable index out of range") != std::string::npos);
    CHECK(err.offset() == 0);
  }
}

TEST_CASE("precedence and associativity")
{
  std::vector<double> x{ 2.0, 3.0 };
  CHECK(parse("2^3^2", 2)(x) == 512.0);
  CHECK(parse("-2^2", 2)(x) == -4.0);
  CHECK(parse("2^-1", 2)(x) == 0.5);
  CHECK(parse("8/4/2", 2)(x) == 1.0);
  CHECK(parse("1-2-3", 2)(x) == -4.0);
  CHECK(parse("1+2*3", 2)(x) == 7.0);
  CHECK(parse("-x1*x2", 2)(x) == -6.0);
  CHECK(parse("min(x1, x2) + max(x1, x2)", 2)(x) == 5.0);
  CHECK(parse("abs(-x2) + exp(0) + log(1)", 2)(x) == 4.0);
  CHECK(parse("1.5e1 + .5", 2)(x) == 15.5);
}

TEST_CASE("evaluation examples and errors")
{
  CHECK(parse("x1*x2", 2)(std::vector<double>{ 2, 3 }) == 6.0);
  CHECK(parse("(2*x1-x2)^3", 2)(std::vector<double>{ 1, 1 }) == 1.0);
  try {
    parse("1/x1", 2)(std::vector<double>{ 0, 1 });
    FAIL("expected an evaluation error");
  } catch (const EvalError& e) {
    CHECK(e.subexpression() == "(1 / x1)");
  }
  CHECK_THROWS_AS(parse("log(x1 - 1)", 1 + 1)(std::vector<double>{ 1, 0 }), EvalError);
  CHECK_THROWS_AS(parse("exp(x1)", 2)(std::vector<double>{ 1000, 0 }), EvalError);
  CHECK_THROWS_AS(parse("x1", 2)(std::vector<double>{ 1 }), ValidationError);
}

TEST_CASE("syntax errors carry offsets")
{
  auto offset_of = [](const char* src) -> std::size_t {
    try {
      parse(src, 2);
    } catch (const ParseError& e) {
      return e.offset();
    }
    return 9999;
  };
  CHECK(offset_of("x1 +") == 4);
  CHECK(offset_of("x1 $ x2") == 3);
  CHECK(offset_of("foo(x1)") == 0);
  CHECK(offset_of("(x1") == 3);
  CHECK(offset_of("min(x1)") == 6);
  CHECK_THROWS_AS(parse("1e999", 2), ParseError);
  CHECK_THROWS_AS(parse("", 2), ParseError);
}

TEST_CASE("restricted parsing for shift expressions")
{
  auto e = parse_restricted("1 + x3", 3, { 0, 2 });
  CHECK(e(std::vector<double>{ 10.0, 4.0 }) == 5.0);
  CHECK_THROWS_AS(parse_restricted("x2", 3, { 0, 2 }), ParseError);
}

TEST_CASE("compiled evaluation agrees with a reference interpreter")
{
  CounterRng rng(2024, 1);
  int mismatches = 0;
  for (int t = 0; t < 1000; ++t) {
    int d = 1 + static_cast<int>(rng.bounded(3));
    Expr e(random_tree(rng, 6, d), d);
    std::vector<double> x(static_cast<std::size_t>(d));
    for (auto& v : x)
      v = rng.normal() * 2.0;
    auto ref = reference(e.root(), x);
    try {
      double got = e(x);
      if (!ref || std::memcmp(&got, &*ref, sizeof(double)) != 0)
        ++mismatches;
    } catch (const EvalError&) {
      if (ref)
        ++mismatches;
    }
  }
  CHECK(mismatches == 0);
}

TEST_CASE("print and parse round-trip")
{
  CounterRng rng(99, 2);
  for (int t = 0; t < 500; ++t) {
    Expr e(random_tree(rng, 5, 3), 3);
    std::string text = print(e);
    Expr back = parse(text, 3);
    REQUIRE(back == e);
    CHECK(print(back) == text);
  }
  for (const char* src : { "x1*x2", "-x1^2", "2^3^2", "min(x1, -x2)/3", "x1 - (x1+x2+x3)/3", "0.1+1e-7" }) {
    Expr e = parse(src, 3);
    CHECK(parse(print(e), 3) == e);
  }
  CHECK(format_number(0.1) == "0.1");
  CHECK(std::stod(format_number(1.0 / 3.0)) == 1.0 / 3.0);
}

TEST_CASE("variables and functional wrappers")
{
  auto e = parse("x3 + x1*x3", 3);
  CHECK(variables(e.root()) == std::vector<int>{ 0, 2 });
  auto f = make_functional(e, "x3 + x1*x3");
  CHECK(f(std::vector<double>{ 2, 0, 1 }) == 3.0);
  CHECK(f.source == "x3 + x1*x3");
}
