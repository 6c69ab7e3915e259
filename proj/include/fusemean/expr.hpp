#pragma once

#include "fusemean/core_model.hpp"
#include "fusemean/errors.hpp"

#include <cstddef>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

//! Arithmetic expression language used for a(x) and r_S(x_S).
//! Grammar (docs/grammar.ebnf):
//!   expr    = term { ("+" | "-") term }
//!   term    = unary { ("*" | "/") unary }
//!   unary   = "-" unary | power
//!   power   = primary [ "^" unary ]
//!   primary = number | variable | func "(" expr ["," expr] ")" | "(" expr ")"
namespace fusemean::expr {

enum class Op
{
  Number,
  Variable,
  Neg,
  Add,
  Sub,
  Mul,
  Div,
  Pow,
  Exp,
  Log,
  Abs,
  Min,
  Max
};

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node
{
  Op op = Op::Number;
  double value = 0.0; //!< Number only.
  int var = 0;        //!< Variable only, 0-based.
  std::vector<NodePtr> args;
};

NodePtr number(double v);
NodePtr variable(int index);
NodePtr unary(Op op, NodePtr a);
NodePtr binary(Op op, NodePtr a, NodePtr b);

//! Structural equality (numbers compared bitwise as doubles).
bool equal(const Node& a, const Node& b);

//! Number of arguments an operator takes.
int arity(Op op);

class ParseError : public ValidationError
{
public:
  ParseError(const std::string& what, std::size_t offset);
  std::size_t offset() const { return offset_; }

private:
  std::size_t offset_;
};

class EvalError : public NumericalError
{
public:
  EvalError(const std::string& what, std::string subexpression);
  const std::string& subexpression() const { return subexpression_; }

private:
  std::string subexpression_;
};

struct Program;

//! Parsed expression over `dimension` variables, compiled to a postfix
//! program for evaluation. Immutable and cheap to copy.
class Expr
{
public:
  Expr(NodePtr root, int dimension);

  const Node& root() const { return *root_; }
  const NodePtr& root_ptr() const { return root_; }
  int dimension() const { return d_; }

  //! Throws EvalError on division by zero, log of a nonpositive value or
  //! any non-finite intermediate.
  double operator()(std::span<const double> x) const;

  friend bool operator==(const Expr& a, const Expr& b)
  {
    return a.d_ == b.d_ && equal(*a.root_, *b.root_);
  }

private:
  NodePtr root_;
  int d_;
  std::shared_ptr<const Program> program_;
};

//! Parses `source` over variables x1..xd.
Expr parse(std::string_view source, int d);

//! Parses an expression that may reference only the variables in `allowed`
//! (0-based, sorted) and renumbers them to local positions 0..|allowed|-1.
Expr parse_restricted(std::string_view source, int d, const Pattern& allowed);

//! Fully parenthesized canonical text; parse(print(e)) == e.
std::string print(const Node& node);
inline std::string print(const Expr& e) { return print(e.root()); }

//! Shortest decimal text that reads back to the same double.
std::string format_number(double v);

//! Sorted distinct 0-based variable indices referenced by the tree.
std::vector<int> variables(const Node& node);

Functional make_functional(const Expr& e, std::string source);
ShiftFunction make_shift(const Expr& e);

} // namespace fusemean::expr
