#pragma once

#include <map>
#include <memory>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

namespace routh {

/// Variable assignment used by eval(); maps variable names to values.
using Binding = std::map<std::string, double>;

enum class UnaryOp { Neg, Sin, Cos, Exp, Log, Sqrt };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

/// Immutable symbolic expression tree over named real variables.
///
/// Expressions are shared via reference-counted nodes; every operation
/// (parse, diff, substitute, simplify, ...) returns a new tree and never
/// mutates its inputs, so Expr values are safe to share across threads.
class Expr {
 public:
  enum class Kind { Constant, Variable, Unary, Binary };

  Expr();  // the constant 0

  static Expr constant(double value);
  static Expr variable(std::string name);
  static Expr unary(UnaryOp op, Expr operand);
  static Expr binary(BinaryOp op, Expr lhs, Expr rhs);

  Kind kind() const;
  double constant_value() const;          // Kind::Constant only
  const std::string& variable_name() const;  // Kind::Variable only
  UnaryOp unary_op() const;
  BinaryOp binary_op() const;
  Expr operand() const;   // unary child
  Expr lhs() const;
  Expr rhs() const;

  bool is_constant(double value) const;
  bool is_zero() const { return is_constant(0.0); }

  /// Structural (tree) equality; constants compare by exact value.
  friend bool operator==(const Expr& a, const Expr& b);
  friend bool operator!=(const Expr& a, const Expr& b) { return !(a == b); }

 private:
  struct Node;
  explicit Expr(std::shared_ptr<const Node> node) : node_(std::move(node)) {}
  std::shared_ptr<const Node> node_;
};

// Convenience constructors for building trees in code.
Expr operator+(Expr a, Expr b);
Expr operator-(Expr a, Expr b);
Expr operator*(Expr a, Expr b);
Expr operator/(Expr a, Expr b);
Expr operator-(Expr a);
Expr pow(Expr base, Expr exponent);
Expr sin(Expr e);
Expr cos(Expr e);
Expr exp(Expr e);
Expr log(Expr e);
Expr sqrt(Expr e);

/// Syntax error from parse(); offset is the byte position in the input.
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, std::size_t offset, std::string expected);
  std::size_t offset() const { return offset_; }
  const std::string& expected() const { return expected_; }

 private:
  std::size_t offset_;
  std::string expected_;
};

/// Evaluation failure: unbound variable or a domain error (log/sqrt of a
/// negative number, division by zero, non-finite result). The message names
/// the offending variable or node.
class EvalError : public std::runtime_error {
 public:
  explicit EvalError(std::string message);
};

/// Parses the expression grammar:
///   expr   := term (('+'|'-') term)*
///   term   := factor (('*'|'/') factor)*
///   factor := atom ('^' factor)?
///   atom   := number | ident | ident '(' expr ')' | '(' expr ')' | '-' atom
/// Identifiers [a-zA-Z_][a-zA-Z0-9_]*; numbers are decimals with an optional
/// exponent. Known functions: sin, cos, exp, log, sqrt.
Expr parse(const std::string& text);

/// Renders to a string that re-parses to a structurally equal tree
/// (guaranteed for trees produced by parse/diff/substitute/simplify).
std::string render(const Expr& e);

double eval(const Expr& e, const Binding& binding);

/// Symbolic partial derivative with respect to `var`; the result is
/// simplified. Non-constant exponents differentiate through the exp/log
/// rewrite of pow.
Expr diff(const Expr& e, const std::string& var);

/// Simultaneous substitution; variables absent from `map` are untouched.
Expr substitute(const Expr& e, const std::map<std::string, Expr>& map);

/// Best-effort simplification: constant folding, +-0 / *1 / *0 identities,
/// exponent merging and like-term collection for flat polynomial subtrees.
/// Idempotent and eval-equivalent to the input on every valid binding.
Expr simplify(const Expr& e);

std::set<std::string> free_variables(const Expr& e);
bool depends_on(const Expr& e, const std::string& var);

/// Expression compiled to a flat program over a fixed variable layout;
/// used in integration/monitoring loops where tree walking is too slow.
/// Evaluation semantics (including domain errors) match eval() exactly.
class CompiledExpr {
 public:
  CompiledExpr() = default;
  /// `slots` maps variable name -> index into the values array passed to
  /// operator(). Unknown free variables raise EvalError here, not later.
  CompiledExpr(const Expr& e, const std::map<std::string, std::size_t>& slots);

  double operator()(const double* values) const;

 private:
  struct Instr {
    int op;          // encodes kind + operator
    double value;    // constants
    std::size_t slot;  // variables
  };
  std::vector<Instr> program_;
  mutable std::vector<double> stack_;
  std::string source_;  // render of the original, for error messages
};

}  // namespace routh
