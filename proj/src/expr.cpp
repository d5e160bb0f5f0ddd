#include "routh/expr.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <functional>
#include <sstream>

namespace routh {

struct Expr::Node {
  Kind kind;
  double value = 0.0;       // Constant
  std::string name;         // Variable
  UnaryOp uop = UnaryOp::Neg;
  BinaryOp bop = BinaryOp::Add;
  std::shared_ptr<const Node> a, b;
};

namespace {

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, p);
}

}  // namespace

Expr::Expr() : Expr(constant(0.0)) {}

Expr Expr::constant(double value) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Constant;
  n->value = value;
  return Expr(std::move(n));
}

Expr Expr::variable(std::string name) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Variable;
  n->name = std::move(name);
  return Expr(std::move(n));
}

Expr Expr::unary(UnaryOp op, Expr operand) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Unary;
  n->uop = op;
  n->a = operand.node_;
  return Expr(std::move(n));
}

Expr Expr::binary(BinaryOp op, Expr lhs, Expr rhs) {
  auto n = std::make_shared<Node>();
  n->kind = Kind::Binary;
  n->bop = op;
  n->a = lhs.node_;
  n->b = rhs.node_;
  return Expr(std::move(n));
}

Expr::Kind Expr::kind() const { return node_->kind; }
double Expr::constant_value() const { return node_->value; }
const std::string& Expr::variable_name() const { return node_->name; }
UnaryOp Expr::unary_op() const { return node_->uop; }
BinaryOp Expr::binary_op() const { return node_->bop; }
Expr Expr::operand() const { return Expr(node_->a); }
Expr Expr::lhs() const { return Expr(node_->a); }
Expr Expr::rhs() const { return Expr(node_->b); }

bool Expr::is_constant(double value) const {
  return node_->kind == Kind::Constant && node_->value == value;
}

bool operator==(const Expr& a, const Expr& b) {
  const auto* x = a.node_.get();
  const auto* y = b.node_.get();
  if (x == y) return true;
  if (x->kind != y->kind) return false;
  switch (x->kind) {
    case Expr::Kind::Constant:
      return x->value == y->value;
    case Expr::Kind::Variable:
      return x->name == y->name;
    case Expr::Kind::Unary:
      return x->uop == y->uop && Expr(x->a) == Expr(y->a);
    case Expr::Kind::Binary:
      return x->bop == y->bop && Expr(x->a) == Expr(y->a) &&
             Expr(x->b) == Expr(y->b);
  }
  return false;
}

Expr operator+(Expr a, Expr b) { return Expr::binary(BinaryOp::Add, a, b); }
Expr operator-(Expr a, Expr b) { return Expr::binary(BinaryOp::Sub, a, b); }
Expr operator*(Expr a, Expr b) { return Expr::binary(BinaryOp::Mul, a, b); }
Expr operator/(Expr a, Expr b) { return Expr::binary(BinaryOp::Div, a, b); }
Expr operator-(Expr a) { return Expr::unary(UnaryOp::Neg, a); }
Expr pow(Expr base, Expr exponent) {
  return Expr::binary(BinaryOp::Pow, base, exponent);
}
Expr sin(Expr e) { return Expr::unary(UnaryOp::Sin, e); }
Expr cos(Expr e) { return Expr::unary(UnaryOp::Cos, e); }
Expr exp(Expr e) { return Expr::unary(UnaryOp::Exp, e); }
Expr log(Expr e) { return Expr::unary(UnaryOp::Log, e); }
Expr sqrt(Expr e) { return Expr::unary(UnaryOp::Sqrt, e); }

// ---------------------------------------------------------------------------
// Parsing

ParseError::ParseError(std::string message, std::size_t offset,
                       std::string expected)
    : std::runtime_error(message + " at offset " + std::to_string(offset) +
                         " (expected " + expected + ")"),
      offset_(offset),
      expected_(std::move(expected)) {}

EvalError::EvalError(std::string message) : std::runtime_error(std::move(message)) {}

namespace {

struct Parser {
  const std::string& text;
  std::size_t pos = 0;

  explicit Parser(const std::string& t) : text(t) {}

  void skip_ws() {
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
  }

  char peek() {
    skip_ws();
    return pos < text.size() ? text[pos] : '\0';
  }

  bool accept(char c) {
    if (peek() == c) {
      ++pos;
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& expected) {
    skip_ws();
    throw ParseError("syntax error", pos, expected);
  }

  Expr parse_expr() {
    Expr e = parse_term();
    for (;;) {
      if (accept('+'))
        e = e + parse_term();
      else if (accept('-'))
        e = e - parse_term();
      else
        return e;
    }
  }

  Expr parse_term() {
    Expr e = parse_factor();
    for (;;) {
      if (accept('*'))
        e = e * parse_factor();
      else if (accept('/'))
        e = e / parse_factor();
      else
        return e;
    }
  }

  Expr parse_factor() {
    Expr base = parse_atom();
    if (accept('^')) return pow(base, parse_factor());
    return base;
  }

  Expr parse_atom() {
    char c = peek();
    if (c == '-') {
      ++pos;
      Expr inner = parse_atom();
      // Fold a negated literal so "-2" round-trips as the constant -2.
      if (inner.kind() == Expr::Kind::Constant)
        return Expr::constant(-inner.constant_value());
      return -inner;
    }
    if (c == '(') {
      ++pos;
      Expr e = parse_expr();
      if (!accept(')')) fail("')'");
      return e;
    }
    if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_ident();
    fail("number, identifier, '(', or '-'");
  }

  Expr parse_number() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    if (pos < text.size() && text[pos] == '.') {
      ++pos;
      while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
    }
    if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
      std::size_t mark = pos;
      ++pos;
      if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
      if (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) {
        while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
      } else {
        pos = mark;  // "2e" is the number 2 followed by identifier "e"... reject below
      }
    }
    if (pos == start) fail("number");
    double v = std::strtod(text.c_str() + start, nullptr);
    return Expr::constant(v);
  }

  Expr parse_ident() {
    skip_ws();
    std::size_t start = pos;
    while (pos < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
      ++pos;
    std::string name = text.substr(start, pos - start);
    if (accept('(')) {
      UnaryOp op;
      if (name == "sin")
        op = UnaryOp::Sin;
      else if (name == "cos")
        op = UnaryOp::Cos;
      else if (name == "exp")
        op = UnaryOp::Exp;
      else if (name == "log")
        op = UnaryOp::Log;
      else if (name == "sqrt")
        op = UnaryOp::Sqrt;
      else
        throw ParseError("unknown function '" + name + "'", start,
                         "sin, cos, exp, log, or sqrt");
      Expr arg = parse_expr();
      if (!accept(')')) fail("')'");
      return Expr::unary(op, arg);
    }
    return Expr::variable(std::move(name));
  }
};

}  // namespace

Expr parse(const std::string& text) {
  Parser p(text);
  Expr e = p.parse_expr();
  p.skip_ws();
  if (p.pos != text.size()) p.fail("operator or end of input");
  return e;
}

// ---------------------------------------------------------------------------
// Rendering

namespace {

const char* unary_name(UnaryOp op) {
  switch (op) {
    case UnaryOp::Neg: return "-";
    case UnaryOp::Sin: return "sin";
    case UnaryOp::Cos: return "cos";
    case UnaryOp::Exp: return "exp";
    case UnaryOp::Log: return "log";
    case UnaryOp::Sqrt: return "sqrt";
  }
  return "?";
}

// Precedence levels: 1 add/sub, 2 mul/div, 3 pow/neg, 4 atom.
int precedence(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return e.constant_value() < 0 ? 3 : 4;
    case Expr::Kind::Variable:
      return 4;
    case Expr::Kind::Unary:
      return e.unary_op() == UnaryOp::Neg ? 3 : 4;  // function calls are atoms
    case Expr::Kind::Binary:
      switch (e.binary_op()) {
        case BinaryOp::Add:
        case BinaryOp::Sub: return 1;
        case BinaryOp::Mul:
        case BinaryOp::Div: return 2;
        case BinaryOp::Pow: return 3;
      }
  }
  return 4;
}

void render_impl(const Expr& e, int min_prec, std::string& out) {
  auto paren = [&](const Expr& sub, int need) {
    if (precedence(sub) < need) {
      out += '(';
      render_impl(sub, 1, out);
      out += ')';
    } else {
      render_impl(sub, need, out);
    }
  };
  switch (e.kind()) {
    case Expr::Kind::Constant: {
      double v = e.constant_value();
      if (v < 0 && min_prec == 4) {
        out += '(';
        out += format_double(v);
        out += ')';
      } else {
        out += format_double(v);
      }
      return;
    }
    case Expr::Kind::Variable:
      out += e.variable_name();
      return;
    case Expr::Kind::Unary: {
      if (e.unary_op() == UnaryOp::Neg) {
        out += '-';
        // '-' binds an atom in the grammar, so anything below a function
        // call or variable needs parentheses.
        paren(e.operand(), 4);
      } else {
        out += unary_name(e.unary_op());
        out += '(';
        render_impl(e.operand(), 1, out);
        out += ')';
      }
      return;
    }
    case Expr::Kind::Binary: {
      switch (e.binary_op()) {
        case BinaryOp::Add:
          paren(e.lhs(), 1);
          out += " + ";
          paren(e.rhs(), 2);  // right side must not re-associate
          return;
        case BinaryOp::Sub:
          paren(e.lhs(), 1);
          out += " - ";
          paren(e.rhs(), 2);
          return;
        case BinaryOp::Mul:
          paren(e.lhs(), 2);
          out += '*';
          paren(e.rhs(), 3);
          return;
        case BinaryOp::Div:
          paren(e.lhs(), 2);
          out += '/';
          paren(e.rhs(), 3);
          return;
        case BinaryOp::Pow:
          paren(e.lhs(), 4);  // base must be an atom
          out += '^';
          paren(e.rhs(), 3);  // exponent is a factor ('-' and '^' allowed)
          return;
      }
    }
  }
}

}  // namespace

std::string render(const Expr& e) {
  std::string out;
  render_impl(e, 1, out);
  return out;
}

// ---------------------------------------------------------------------------
// Evaluation

namespace {

[[noreturn]] void domain_error(const char* what, const Expr& node) {
  throw EvalError(std::string("domain error: ") + what + " in '" +
                  render(node) + "'");
}

double eval_impl(const Expr& e, const Binding& b) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return e.constant_value();
    case Expr::Kind::Variable: {
      auto it = b.find(e.variable_name());
      if (it == b.end())
        throw EvalError("unbound variable '" + e.variable_name() + "'");
      return it->second;
    }
    case Expr::Kind::Unary: {
      double x = eval_impl(e.operand(), b);
      switch (e.unary_op()) {
        case UnaryOp::Neg: return -x;
        case UnaryOp::Sin: return std::sin(x);
        case UnaryOp::Cos: return std::cos(x);
        case UnaryOp::Exp: {
          double r = std::exp(x);
          if (!std::isfinite(r)) domain_error("exp overflow", e);
          return r;
        }
        case UnaryOp::Log:
          if (x <= 0) domain_error("log of non-positive value", e);
          return std::log(x);
        case UnaryOp::Sqrt:
          if (x < 0) domain_error("sqrt of negative value", e);
          return std::sqrt(x);
      }
      return 0;
    }
    case Expr::Kind::Binary: {
      double x = eval_impl(e.lhs(), b);
      double y = eval_impl(e.rhs(), b);
      double r = 0;
      switch (e.binary_op()) {
        case BinaryOp::Add: r = x + y; break;
        case BinaryOp::Sub: r = x - y; break;
        case BinaryOp::Mul: r = x * y; break;
        case BinaryOp::Div:
          if (y == 0) domain_error("division by zero", e);
          r = x / y;
          break;
        case BinaryOp::Pow:
          if (x < 0 && y != std::nearbyint(y))
            domain_error("negative base with non-integer exponent", e);
          if (x == 0 && y < 0) domain_error("zero base with negative exponent", e);
          r = std::pow(x, y);
          break;
      }
      if (!std::isfinite(r)) domain_error("non-finite result", e);
      return r;
    }
  }
  return 0;
}

}  // namespace

double eval(const Expr& e, const Binding& binding) { return eval_impl(e, binding); }

// ---------------------------------------------------------------------------
// Differentiation

namespace {

Expr diff_raw(const Expr& e, const std::string& var) {
  const Expr zero = Expr::constant(0.0);
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return zero;
    case Expr::Kind::Variable:
      return Expr::constant(e.variable_name() == var ? 1.0 : 0.0);
    case Expr::Kind::Unary: {
      Expr u = e.operand();
      Expr du = diff_raw(u, var);
      switch (e.unary_op()) {
        case UnaryOp::Neg: return -du;
        case UnaryOp::Sin: return cos(u) * du;
        case UnaryOp::Cos: return -(sin(u) * du);
        case UnaryOp::Exp: return exp(u) * du;
        case UnaryOp::Log: return du / u;
        case UnaryOp::Sqrt:
          return du / (Expr::constant(2.0) * sqrt(u));
      }
      return zero;
    }
    case Expr::Kind::Binary: {
      Expr u = e.lhs(), w = e.rhs();
      Expr du = diff_raw(u, var), dw = diff_raw(w, var);
      switch (e.binary_op()) {
        case BinaryOp::Add: return du + dw;
        case BinaryOp::Sub: return du - dw;
        case BinaryOp::Mul: return du * w + u * dw;
        case BinaryOp::Div: return (du * w - u * dw) / (w * w);
        case BinaryOp::Pow: {
          if (w.kind() == Expr::Kind::Constant) {
            double c = w.constant_value();
            return Expr::constant(c) * pow(u, Expr::constant(c - 1.0)) * du;
          }
          // General exponent via u^w = exp(w*log(u)).
          return pow(u, w) * (dw * log(u) + w * du / u);
        }
      }
      return zero;
    }
  }
  return zero;
}

}  // namespace

Expr diff(const Expr& e, const std::string& var) {
  if (!depends_on(e, var)) return Expr::constant(0.0);
  return simplify(diff_raw(e, var));
}

// ---------------------------------------------------------------------------
// Substitution

Expr substitute(const Expr& e, const std::map<std::string, Expr>& map) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return e;
    case Expr::Kind::Variable: {
      auto it = map.find(e.variable_name());
      return it == map.end() ? e : it->second;
    }
    case Expr::Kind::Unary:
      return Expr::unary(e.unary_op(), substitute(e.operand(), map));
    case Expr::Kind::Binary:
      return Expr::binary(e.binary_op(), substitute(e.lhs(), map),
                          substitute(e.rhs(), map));
  }
  return e;
}

// ---------------------------------------------------------------------------
// Free variables

namespace {

void collect_vars(const Expr& e, std::set<std::string>& out) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
      return;
    case Expr::Kind::Variable:
      out.insert(e.variable_name());
      return;
    case Expr::Kind::Unary:
      collect_vars(e.operand(), out);
      return;
    case Expr::Kind::Binary:
      collect_vars(e.lhs(), out);
      collect_vars(e.rhs(), out);
      return;
  }
}

}  // namespace

std::set<std::string> free_variables(const Expr& e) {
  std::set<std::string> out;
  collect_vars(e, out);
  return out;
}

bool depends_on(const Expr& e, const std::string& var) {
  switch (e.kind()) {
    case Expr::Kind::Constant: return false;
    case Expr::Kind::Variable: return e.variable_name() == var;
    case Expr::Kind::Unary: return depends_on(e.operand(), var);
    case Expr::Kind::Binary:
      return depends_on(e.lhs(), var) || depends_on(e.rhs(), var);
  }
  return false;
}

// ---------------------------------------------------------------------------
// Simplification
//
// Strategy: simplify children, then normalize multiplicative subtrees to
// (coefficient, {base -> exponent}) and additive subtrees to
// {monomial-key -> coefficient}, rebuilding in a deterministic sorted order.
// Rebuilding is a pure function of the collected structure, which makes the
// whole pass idempotent.

namespace {

bool is_integer(double v) {
  return v == std::nearbyint(v) && std::abs(v) < 1e15;
}

struct Factor {
  Expr base;
  double exponent;
};

struct Product {
  double coeff = 1.0;
  std::vector<Factor> factors;  // keyed and merged by render(base)
};

Expr rebuild_product(const Product& p);

// Flattens a simplified multiplicative tree into coeff * prod(base^exp).
void flatten_product(const Expr& e, double outer_exp, Product& out) {
  switch (e.kind()) {
    case Expr::Kind::Constant: {
      double v = e.constant_value();
      if (outer_exp == 1.0) {
        out.coeff *= v;
      } else if (outer_exp == -1.0) {
        if (v == 0) {  // keep 1/0 unfolded so eval still reports the error
          out.factors.push_back({e, outer_exp});
        } else {
          out.coeff /= v;
        }
      } else {
        out.factors.push_back({e, outer_exp});
      }
      return;
    }
    case Expr::Kind::Unary:
      if (e.unary_op() == UnaryOp::Neg) {
        if (outer_exp == 1.0) {
          out.coeff = -out.coeff;
          flatten_product(e.operand(), 1.0, out);
          return;
        }
        if (outer_exp == -1.0) {
          out.coeff = -out.coeff;
          flatten_product(e.operand(), -1.0, out);
          return;
        }
      }
      out.factors.push_back({e, outer_exp});
      return;
    case Expr::Kind::Binary:
      switch (e.binary_op()) {
        case BinaryOp::Mul:
          flatten_product(e.lhs(), outer_exp, out);
          flatten_product(e.rhs(), outer_exp, out);
          return;
        case BinaryOp::Div:
          flatten_product(e.lhs(), outer_exp, out);
          flatten_product(e.rhs(), -outer_exp, out);
          return;
        case BinaryOp::Pow:
          // (u^c)^t = u^(c*t) is only sound for integer t.
          if (e.rhs().kind() == Expr::Kind::Constant && is_integer(outer_exp)) {
            flatten_product(e.lhs(), e.rhs().constant_value() * outer_exp, out);
            return;
          }
          out.factors.push_back({e, outer_exp});
          return;
        default:
          out.factors.push_back({e, outer_exp});
          return;
      }
    default:
      out.factors.push_back({e, outer_exp});
      return;
  }
}

struct MergedFactor {
  std::string key;
  Expr base;
  double exponent;
};

std::vector<MergedFactor> merge_factors(const Product& p) {
  std::vector<MergedFactor> merged;
  for (const auto& f : p.factors) {
    std::string key = render(f.base);
    auto it = std::find_if(merged.begin(), merged.end(),
                           [&](const MergedFactor& m) { return m.key == key; });
    if (it == merged.end())
      merged.push_back({std::move(key), f.base, f.exponent});
    else
      it->exponent += f.exponent;
  }
  merged.erase(std::remove_if(merged.begin(), merged.end(),
                              [](const MergedFactor& m) { return m.exponent == 0.0; }),
               merged.end());
  std::sort(merged.begin(), merged.end(),
            [](const MergedFactor& a, const MergedFactor& b) { return a.key < b.key; });
  return merged;
}

Expr factor_to_expr(const Expr& base, double exponent) {
  if (exponent == 1.0) return base;
  return pow(base, Expr::constant(exponent));
}

Expr rebuild_product(const Product& p) {
  if (p.coeff == 0.0) return Expr::constant(0.0);
  auto merged = merge_factors(p);

  std::vector<Expr> num, den;
  for (const auto& m : merged) {
    if (m.exponent > 0)
      num.push_back(factor_to_expr(m.base, m.exponent));
    else
      den.push_back(factor_to_expr(m.base, -m.exponent));
  }

  bool negative = std::signbit(p.coeff) && p.coeff != 0.0;
  double mag = negative ? -p.coeff : p.coeff;

  Expr numerator = Expr::constant(1.0);
  bool have_num = false;
  if (mag != 1.0 || num.empty()) {
    numerator = Expr::constant(mag);
    have_num = true;
  }
  for (const auto& f : num) {
    numerator = have_num ? numerator * f : f;
    have_num = true;
  }

  Expr result = numerator;
  if (!den.empty()) {
    Expr denominator = den[0];
    for (std::size_t i = 1; i < den.size(); ++i) denominator = denominator * den[i];
    result = numerator / denominator;
  }
  if (negative) result = -result;
  return result;
}

// One additive term: coefficient times a canonical monomial expression.
struct Term {
  std::string key;  // render of the monomial; empty for the constant term
  Expr monomial;
  double coeff;
};

void flatten_sum(const Expr& e, double sign, std::vector<Term>& terms,
                 double& constant) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
      constant += sign * e.constant_value();
      return;
    case Expr::Kind::Unary:
      if (e.unary_op() == UnaryOp::Neg) {
        flatten_sum(e.operand(), -sign, terms, constant);
        return;
      }
      break;
    case Expr::Kind::Binary:
      if (e.binary_op() == BinaryOp::Add) {
        flatten_sum(e.lhs(), sign, terms, constant);
        flatten_sum(e.rhs(), sign, terms, constant);
        return;
      }
      if (e.binary_op() == BinaryOp::Sub) {
        flatten_sum(e.lhs(), sign, terms, constant);
        flatten_sum(e.rhs(), -sign, terms, constant);
        return;
      }
      break;
    default:
      break;
  }
  // Leaf term: normalize through the product machinery to split off the
  // numeric coefficient and canonicalize the monomial part.
  Product p;
  flatten_product(e, 1.0, p);
  if (p.coeff == 0.0) return;
  double coeff = sign * p.coeff;
  Product mono = p;
  mono.coeff = 1.0;
  Expr monomial = rebuild_product(mono);
  if (monomial.kind() == Expr::Kind::Constant) {
    constant += coeff * monomial.constant_value();
    return;
  }
  std::string key = render(monomial);
  auto it = std::find_if(terms.begin(), terms.end(),
                         [&](const Term& t) { return t.key == key; });
  if (it == terms.end())
    terms.push_back({std::move(key), monomial, coeff});
  else
    it->coeff += coeff;
}

Expr rebuild_sum(std::vector<Term>& terms, double constant) {
  terms.erase(std::remove_if(terms.begin(), terms.end(),
                             [](const Term& t) { return t.coeff == 0.0; }),
              terms.end());
  std::sort(terms.begin(), terms.end(),
            [](const Term& a, const Term& b) { return a.key < b.key; });

  if (terms.empty()) return Expr::constant(constant);

  auto term_expr = [](const Term& t) -> Expr {
    double mag = std::abs(t.coeff);
    if (mag == 1.0) return t.monomial;
    Product p;
    p.coeff = mag;
    flatten_product(t.monomial, 1.0, p);
    return rebuild_product(p);
  };

  Expr acc = term_expr(terms[0]);
  if (terms[0].coeff < 0) acc = -acc;
  for (std::size_t i = 1; i < terms.size(); ++i) {
    Expr t = term_expr(terms[i]);
    acc = terms[i].coeff < 0 ? acc - t : acc + t;
  }
  if (constant != 0.0) {
    acc = constant < 0 ? acc - Expr::constant(-constant)
                       : acc + Expr::constant(constant);
  }
  return acc;
}

bool fold_unary(UnaryOp op, double x, double& out) {
  switch (op) {
    case UnaryOp::Neg: out = -x; return true;
    case UnaryOp::Sin: out = std::sin(x); return true;
    case UnaryOp::Cos: out = std::cos(x); return true;
    case UnaryOp::Exp: out = std::exp(x); return std::isfinite(out);
    case UnaryOp::Log:
      if (x <= 0) return false;
      out = std::log(x);
      return true;
    case UnaryOp::Sqrt:
      if (x < 0) return false;
      out = std::sqrt(x);
      return true;
  }
  return false;
}

Expr simplify_impl(const Expr& e);

Expr simplify_pow(const Expr& base, const Expr& exponent) {
  if (exponent.kind() == Expr::Kind::Constant) {
    double c = exponent.constant_value();
    if (c == 0.0) return Expr::constant(1.0);
    if (c == 1.0) return base;
    if (base.kind() == Expr::Kind::Constant) {
      double b = base.constant_value();
      bool defined = !(b < 0 && !is_integer(c)) && !(b == 0 && c < 0);
      if (defined) {
        double v = std::pow(b, c);
        if (std::isfinite(v)) return Expr::constant(v);
      }
    }
    // (u^a)^b -> u^(a*b) when b is an integer.
    if (base.kind() == Expr::Kind::Binary && base.binary_op() == BinaryOp::Pow &&
        base.rhs().kind() == Expr::Kind::Constant && is_integer(c)) {
      return simplify_pow(base.lhs(),
                          Expr::constant(base.rhs().constant_value() * c));
    }
    // Distribute integer powers over products/quotients via the flattener.
    if (is_integer(c) && base.kind() == Expr::Kind::Binary &&
        (base.binary_op() == BinaryOp::Mul || base.binary_op() == BinaryOp::Div)) {
      Product p;
      flatten_product(base, c, p);
      return rebuild_product(p);
    }
  }
  if (base.is_constant(1.0)) return Expr::constant(1.0);
  return pow(base, exponent);
}

Expr simplify_impl(const Expr& e) {
  switch (e.kind()) {
    case Expr::Kind::Constant:
    case Expr::Kind::Variable:
      return e;
    case Expr::Kind::Unary: {
      Expr u = simplify_impl(e.operand());
      if (e.unary_op() == UnaryOp::Neg) {
        if (u.kind() == Expr::Kind::Constant)
          return Expr::constant(-u.constant_value());
        if (u.kind() == Expr::Kind::Unary && u.unary_op() == UnaryOp::Neg)
          return u.operand();
        Product p;
        p.coeff = -1.0;
        flatten_product(u, 1.0, p);
        return rebuild_product(p);
      }
      if (u.kind() == Expr::Kind::Constant) {
        double v;
        if (fold_unary(e.unary_op(), u.constant_value(), v) && std::isfinite(v))
          return Expr::constant(v);
      }
      return Expr::unary(e.unary_op(), u);
    }
    case Expr::Kind::Binary: {
      Expr a = simplify_impl(e.lhs());
      Expr b = simplify_impl(e.rhs());
      switch (e.binary_op()) {
        case BinaryOp::Add:
        case BinaryOp::Sub: {
          std::vector<Term> terms;
          double constant = 0.0;
          flatten_sum(a, 1.0, terms, constant);
          flatten_sum(b, e.binary_op() == BinaryOp::Sub ? -1.0 : 1.0, terms,
                      constant);
          return rebuild_sum(terms, constant);
        }
        case BinaryOp::Mul:
        case BinaryOp::Div: {
          if (e.binary_op() == BinaryOp::Div && b.is_constant(0.0))
            return a / b;  // preserve the division-by-zero error
          Product p;
          flatten_product(a, 1.0, p);
          flatten_product(b, e.binary_op() == BinaryOp::Div ? -1.0 : 1.0, p);
          return rebuild_product(p);
        }
        case BinaryOp::Pow:
          return simplify_pow(a, b);
      }
    }
  }
  return e;
}

}  // namespace

Expr simplify(const Expr& e) { return simplify_impl(e); }

// ---------------------------------------------------------------------------
// Compiled evaluation

namespace {

enum CompiledOp {
  kPushConst = 0,
  kPushVar,
  kNeg,
  kSin,
  kCos,
  kExp,
  kLog,
  kSqrt,
  kAdd,
  kSub,
  kMul,
  kDiv,
  kPow,
};

}  // namespace

CompiledExpr::CompiledExpr(const Expr& e,
                           const std::map<std::string, std::size_t>& slots) {
  source_ = render(e);
  std::size_t depth = 0, max_depth = 0;
  auto emit = [&](Instr in, int pushes) {
    program_.push_back(in);
    depth = depth + pushes;
    max_depth = std::max(max_depth, depth);
  };
  std::function<void(const Expr&)> walk = [&](const Expr& n) {
    switch (n.kind()) {
      case Expr::Kind::Constant:
        emit({kPushConst, n.constant_value(), 0}, 1);
        return;
      case Expr::Kind::Variable: {
        auto it = slots.find(n.variable_name());
        if (it == slots.end())
          throw EvalError("unbound variable '" + n.variable_name() + "'");
        emit({kPushVar, 0.0, it->second}, 1);
        return;
      }
      case Expr::Kind::Unary:
        walk(n.operand());
        switch (n.unary_op()) {
          case UnaryOp::Neg: emit({kNeg, 0, 0}, 0); break;
          case UnaryOp::Sin: emit({kSin, 0, 0}, 0); break;
          case UnaryOp::Cos: emit({kCos, 0, 0}, 0); break;
          case UnaryOp::Exp: emit({kExp, 0, 0}, 0); break;
          case UnaryOp::Log: emit({kLog, 0, 0}, 0); break;
          case UnaryOp::Sqrt: emit({kSqrt, 0, 0}, 0); break;
        }
        return;
      case Expr::Kind::Binary:
        walk(n.lhs());
        walk(n.rhs());
        switch (n.binary_op()) {
          case BinaryOp::Add: emit({kAdd, 0, 0}, -1); break;
          case BinaryOp::Sub: emit({kSub, 0, 0}, -1); break;
          case BinaryOp::Mul: emit({kMul, 0, 0}, -1); break;
          case BinaryOp::Div: emit({kDiv, 0, 0}, -1); break;
          case BinaryOp::Pow: emit({kPow, 0, 0}, -1); break;
        }
        return;
    }
  };
  walk(e);
  stack_.resize(max_depth + 1);
}

double CompiledExpr::operator()(const double* values) const {
  double* sp = stack_.data();
  for (const auto& in : program_) {
    switch (in.op) {
      case kPushConst: *sp++ = in.value; break;
      case kPushVar: *sp++ = values[in.slot]; break;
      case kNeg: sp[-1] = -sp[-1]; break;
      case kSin: sp[-1] = std::sin(sp[-1]); break;
      case kCos: sp[-1] = std::cos(sp[-1]); break;
      case kExp:
        sp[-1] = std::exp(sp[-1]);
        if (!std::isfinite(sp[-1]))
          throw EvalError("domain error: exp overflow in '" + source_ + "'");
        break;
      case kLog:
        if (sp[-1] <= 0)
          throw EvalError("domain error: log of non-positive value in '" +
                          source_ + "'");
        sp[-1] = std::log(sp[-1]);
        break;
      case kSqrt:
        if (sp[-1] < 0)
          throw EvalError("domain error: sqrt of negative value in '" +
                          source_ + "'");
        sp[-1] = std::sqrt(sp[-1]);
        break;
      case kAdd: sp[-2] = sp[-2] + sp[-1]; --sp; break;
      case kSub: sp[-2] = sp[-2] - sp[-1]; --sp; break;
      case kMul: sp[-2] = sp[-2] * sp[-1]; --sp; break;
      case kDiv:
        if (sp[-1] == 0)
          throw EvalError("domain error: division by zero in '" + source_ + "'");
        sp[-2] = sp[-2] / sp[-1];
        --sp;
        break;
      case kPow: {
        double b = sp[-2], x = sp[-1];
        if (b < 0 && x != std::nearbyint(x))
          throw EvalError(
              "domain error: negative base with non-integer exponent in '" +
              source_ + "'");
        if (b == 0 && x < 0)
          throw EvalError("domain error: zero base with negative exponent in '" +
                          source_ + "'");
        sp[-2] = std::pow(b, x);
        --sp;
        break;
      }
    }
  }
  double r = sp[-1];
  if (!std::isfinite(r))
    throw EvalError("domain error: non-finite result in '" + source_ + "'");
  return r;
}

}  // namespace routh
