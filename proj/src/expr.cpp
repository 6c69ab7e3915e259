#include "fusemean/expr.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <set>

namespace fusemean::expr {

NodePtr
number(double v)
{
  auto n = std::make_shared<Node>();
  n->op = Op::Number;
  n->value = v;
  return n;
}

NodePtr
variable(int index)
{
  auto n = std::make_shared<Node>();
  n->op = Op::Variable;
  n->var = index;
  return n;
}

NodePtr
unary(Op op, NodePtr a)
{
  auto n = std::make_shared<Node>();
  n->op = op;
  n->args = { std::move(a) };
  return n;
}

NodePtr
binary(Op op, NodePtr a, NodePtr b)
{
  auto n = std::make_shared<Node>();
  n->op = op;
  n->args = { std::move(a), std::move(b) };
  return n;
}

int
arity(Op op)
{
  switch (op) {
    case Op::Number:
    case Op::Variable:
      return 0;
    case Op::Neg:
    case Op::Exp:
    case Op::Log:
    case Op::Abs:
      return 1;
    default:
      return 2;
  }
}

bool
equal(const Node& a, const Node& b)
{
  if (a.op != b.op || a.args.size() != b.args.size())
    return false;
  if (a.op == Op::Number)
    return std::memcmp(&a.value, &b.value, sizeof(double)) == 0;
  if (a.op == Op::Variable)
    return a.var == b.var;
  for (std::size_t k = 0; k < a.args.size(); ++k)
    if (!equal(*a.args[k], *b.args[k]))
      return false;
  return true;
}

ParseError::ParseError(const std::string& what, std::size_t offset)
  : ValidationError(what + " at offset " + std::to_string(offset))
  , offset_(offset)
{
}

EvalError::EvalError(const std::string& what, std::string subexpression)
  : NumericalError(what + " in " + subexpression)
  , subexpression_(std::move(subexpression))
{
}

// ---------------------------------------------------------------------------
// Parser

namespace {

class Parser
{
public:
  Parser(std::string_view src, int d)
    : src_(src)
    , d_(d)
  {
  }

  NodePtr parse_all()
  {
    auto e = parse_expr();
    skip_ws();
    if (pos_ != src_.size())
      throw ParseError("syntax error: unexpected '" + std::string(1, src_[pos_]) + "'",
                       pos_);
    return e;
  }

private:
  void skip_ws()
  {
    while (pos_ < src_.size() &&
           (src_[pos_] == ' ' || src_[pos_] == '\t' || src_[pos_] == '\n' ||
            src_[pos_] == '\r'))
      ++pos_;
  }

  bool accept(char c)
  {
    skip_ws();
    if (pos_ < src_.size() && src_[pos_] == c) {
      ++pos_;
      return true;
    }
    return false;
  }

  void expect(char c)
  {
    if (!accept(c)) {
      std::string found = pos_ < src_.size() ? std::string(1, src_[pos_]) : "end of input";
      throw ParseError(std::string("syntax error: expected '") + c + "' but found " + found,
                       pos_);
    }
  }

  NodePtr parse_expr()
  {
    auto lhs = parse_term();
    for (;;) {
      if (accept('+'))
        lhs = binary(Op::Add, lhs, parse_term());
      else if (accept('-'))
        lhs = binary(Op::Sub, lhs, parse_term());
      else
        return lhs;
    }
  }

  NodePtr parse_term()
  {
    auto lhs = parse_unary();
    for (;;) {
      if (accept('*'))
        lhs = binary(Op::Mul, lhs, parse_unary());
      else if (accept('/'))
        lhs = binary(Op::Div, lhs, parse_unary());
      else
        return lhs;
    }
  }

  NodePtr parse_unary()
  {
    if (accept('-'))
      return unary(Op::Neg, parse_unary());
    return parse_power();
  }

  NodePtr parse_power()
  {
    auto base = parse_primary();
    if (accept('^'))
      return binary(Op::Pow, base, parse_unary());
    return base;
  }

  NodePtr parse_primary()
  {
    skip_ws();
    if (pos_ >= src_.size())
      throw ParseError("syntax error: unexpected end of input", pos_);
    char c = src_[pos_];
    if (accept('(')) {
      auto e = parse_expr();
      expect(')');
      return e;
    }
    if ((c >= '0' && c <= '9') || c == '.')
      return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)))
      return parse_identifier();
    throw ParseError("syntax error: unexpected '" + std::string(1, c) + "'", pos_);
  }

  NodePtr parse_number()
  {
    std::size_t start = pos_;
    auto digits = [&] {
      std::size_t k = pos_;
      while (pos_ < src_.size() && src_[pos_] >= '0' && src_[pos_] <= '9')
        ++pos_;
      return pos_ - k;
    };
    std::size_t mantissa = digits();
    if (pos_ < src_.size() && src_[pos_] == '.') {
      ++pos_;
      mantissa += digits();
    }
    if (mantissa == 0)
      throw ParseError("syntax error: malformed number", start);
    if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
      ++pos_;
      if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-'))
        ++pos_;
      if (digits() == 0)
        throw ParseError("syntax error: malformed exponent", start);
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(src_.data() + start, src_.data() + pos_, v);
    if (ec != std::errc() || ptr != src_.data() + pos_ || !std::isfinite(v))
      throw ParseError("non-finite or malformed literal", start);
    return number(v);
  }

  NodePtr parse_identifier()
  {
    std::size_t start = pos_;
    while (pos_ < src_.size() && std::isalnum(static_cast<unsigned char>(src_[pos_])))
      ++pos_;
    std::string_view name = src_.substr(start, pos_ - start);

    if (name.size() >= 2 && name[0] == 'x' &&
        std::all_of(name.begin() + 1, name.end(), [](char ch) { return ch >= '0' && ch <= '9'; })) {
      int index = 0;
      auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), index);
      if (ec != std::errc() || index < 1 || index > d_)
        throw ParseError("variable index out of range: " + std::string(name), start);
      return variable(index - 1);
    }

    Op op;
    if (name == "exp")
      op = Op::Exp;
    else if (name == "log")
      op = Op::Log;
    else if (name == "abs")
      op = Op::Abs;
    else if (name == "min")
      op = Op::Min;
    else if (name == "max")
      op = Op::Max;
    else
      throw ParseError("unknown identifier: " + std::string(name), start);

    expect('(');
    auto first = parse_expr();
    if (arity(op) == 2) {
      expect(',');
      auto second = parse_expr();
      expect(')');
      return binary(op, first, second);
    }
    expect(')');
    return unary(op, first);
  }

  std::string_view src_;
  int d_;
  std::size_t pos_ = 0;
};

NodePtr
remap(const NodePtr& node, const std::vector<int>& local_of)
{
  if (node->op == Op::Variable)
    return variable(local_of[static_cast<std::size_t>(node->var)]);
  if (node->args.empty())
    return node;
  auto copy = std::make_shared<Node>(*node);
  for (auto& a : copy->args)
    a = remap(a, local_of);
  return copy;
}

void
collect_variables(const Node& node, std::set<int>& out)
{
  if (node.op == Op::Variable)
    out.insert(node.var);
  for (const auto& a : node.args)
    collect_variables(*a, out);
}

} // namespace

Expr
parse(std::string_view source, int d)
{
  if (d < 1)
    throw ValidationError("expression dimension must be positive");
  return Expr(Parser(source, d).parse_all(), d);
}

Expr
parse_restricted(std::string_view source, int d, const Pattern& allowed)
{
  Expr full = parse(source, d);
  std::vector<int> local_of(static_cast<std::size_t>(d), -1);
  for (std::size_t k = 0; k < allowed.size(); ++k)
    local_of[static_cast<std::size_t>(allowed[k])] = static_cast<int>(k);
  for (int v : variables(full.root()))
    if (local_of[static_cast<std::size_t>(v)] < 0)
      throw ParseError("variable x" + std::to_string(v + 1) + " is not in pattern " +
                         format_pattern(allowed),
                       0);
  return Expr(remap(full.root_ptr(), local_of), static_cast<int>(allowed.size()));
}

std::vector<int>
variables(const Node& node)
{
  std::set<int> vars;
  collect_variables(node, vars);
  return { vars.begin(), vars.end() };
}

// ---------------------------------------------------------------------------
// Printer

std::string
format_number(double v)
{
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

std::string
print(const Node& node)
{
  switch (node.op) {
    case Op::Number: {
      // A negative literal can only come from constructed trees; print it as
      // a negation so the text stays inside the grammar.
      if (std::signbit(node.value))
        return "(-" + format_number(-node.value) + ")";
      return format_number(node.value);
    }
    case Op::Variable:
      return "x" + std::to_string(node.var + 1);
    case Op::Neg:
      return "(-" + print(*node.args[0]) + ")";
    case Op::Exp:
      return "exp(" + print(*node.args[0]) + ")";
    case Op::Log:
      return "log(" + print(*node.args[0]) + ")";
    case Op::Abs:
      return "abs(" + print(*node.args[0]) + ")";
    case Op::Min:
      return "min(" + print(*node.args[0]) + ", " + print(*node.args[1]) + ")";
    case Op::Max:
      return "max(" + print(*node.args[0]) + ", " + print(*node.args[1]) + ")";
    default:
      break;
  }
  const char* sym = node.op == Op::Add   ? " + "
                    : node.op == Op::Sub ? " - "
                    : node.op == Op::Mul ? " * "
                    : node.op == Op::Div ? " / "
                                         : " ^ ";
  return "(" + print(*node.args[0]) + sym + print(*node.args[1]) + ")";
}

// ---------------------------------------------------------------------------
// Compiled evaluation

struct Instr
{
  Op op;
  double value;
  int var;
  const Node* node;
};

struct Program
{
  std::vector<Instr> code;
  std::size_t max_depth = 0;
};

namespace {

void
emit(const Node& node, Program& prog, std::size_t depth)
{
  // Children are pushed left to right; depth tracks the stack height after
  // each push.
  std::size_t k = 0;
  for (const auto& a : node.args)
    emit(*a, prog, depth + k++);
  prog.code.push_back({ node.op, node.value, node.var, &node });
  prog.max_depth = std::max(prog.max_depth, depth + 1);
}

[[noreturn]] void
fail(const char* what, const Node* node)
{
  throw EvalError(what, print(*node));
}

} // namespace

Expr::Expr(NodePtr root, int dimension)
  : root_(std::move(root))
  , d_(dimension)
{
  auto prog = std::make_shared<Program>();
  emit(*root_, *prog, 0);
  program_ = std::move(prog);
}

double
Expr::operator()(std::span<const double> x) const
{
  if (x.size() != static_cast<std::size_t>(d_))
    throw ValidationError("expression expects " + std::to_string(d_) + " inputs, got " +
                          std::to_string(x.size()));
  double small[64] = {};
  std::vector<double> big;
  double* st = small;
  if (program_->max_depth > 64) {
    big.resize(program_->max_depth);
    st = big.data();
  }
  std::size_t top = 0;
  for (const Instr& in : program_->code) {
    double r;
    switch (in.op) {
      case Op::Number:
        st[top++] = in.value;
        continue;
      case Op::Variable:
        st[top++] = x[static_cast<std::size_t>(in.var)];
        continue;
      case Op::Neg:
        r = -st[top - 1];
        break;
      case Op::Exp:
        r = std::exp(st[top - 1]);
        break;
      case Op::Log:
        if (!(st[top - 1] > 0.0))
          fail("log of nonpositive value", in.node);
        r = std::log(st[top - 1]);
        break;
      case Op::Abs:
        r = std::fabs(st[top - 1]);
        break;
      default: {
        double b = st[--top];
        double a = st[top - 1];
        switch (in.op) {
          case Op::Add:
            r = a + b;
            break;
          case Op::Sub:
            r = a - b;
            break;
          case Op::Mul:
            r = a * b;
            break;
          case Op::Div:
            if (b == 0.0)
              fail("division by zero", in.node);
            r = a / b;
            break;
          case Op::Pow:
            r = std::pow(a, b);
            break;
          case Op::Min:
            r = std::min(a, b);
            break;
          default:
            r = std::max(a, b);
            break;
        }
      }
    }
    if (!std::isfinite(r))
      fail("non-finite result", in.node);
    st[top - 1] = r;
  }
  return st[0];
}

Functional
make_functional(const Expr& e, std::string source)
{
  Functional f;
  f.a = [e](std::span<const double> x) { return e(x); };
  f.source = std::move(source);
  return f;
}

ShiftFunction
make_shift(const Expr& e)
{
  return [e](std::span<const double> x) { return e(x); };
}

} // namespace fusemean::expr
