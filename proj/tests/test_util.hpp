#pragma once

#include <cmath>
#include <random>
#include <string>
#include <vector>

#include "routh/expr.hpp"

namespace testutil {

using routh::Binding;
using routh::Expr;

/// Central finite difference of eval(e, .) in `var` — the independent oracle
/// for symbolic derivatives.
inline double finite_difference(const Expr& e, const std::string& var,
                                const Binding& at, double h = 1e-5) {
  Binding hi = at, lo = at;
  hi[var] += h;
  lo[var] -= h;
  return (routh::eval(e, hi) - routh::eval(e, lo)) / (2 * h);
}

/// Random expression generator over the full grammar. Constants and binding
/// magnitudes stay in moderate ranges so finite differences are well
/// conditioned; callers reject samples that fall outside a function's domain.
class ExprGen {
 public:
  ExprGen(std::uint64_t seed, std::vector<std::string> vars)
      : rng_(seed), vars_(std::move(vars)) {}

  Expr expr(int max_depth = 4) { return gen(max_depth); }

  Binding binding() {
    Binding b;
    std::uniform_real_distribution<double> mag(0.4, 1.8);
    std::bernoulli_distribution sign(0.5);
    for (const auto& v : vars_) b[v] = sign(rng_) ? mag(rng_) : -mag(rng_);
    return b;
  }

  Binding positive_binding() {
    Binding b;
    std::uniform_real_distribution<double> mag(0.4, 1.8);
    for (const auto& v : vars_) b[v] = mag(rng_);
    return b;
  }

  const std::vector<std::string>& vars() const { return vars_; }

  std::string pick_var() {
    std::uniform_int_distribution<std::size_t> d(0, vars_.size() - 1);
    return vars_[d(rng_)];
  }

  std::mt19937_64& rng() { return rng_; }

 private:
  Expr gen(int depth) {
    std::uniform_int_distribution<int> which(0, depth <= 0 ? 1 : 9);
    std::uniform_real_distribution<double> c(0.2, 2.0);
    switch (which(rng_)) {
      case 0: return Expr::constant(c(rng_));
      case 1: return Expr::variable(pick_var());
      case 2: return gen(depth - 1) + gen(depth - 1);
      case 3: return gen(depth - 1) - gen(depth - 1);
      case 4: return gen(depth - 1) * gen(depth - 1);
      case 5: return gen(depth - 1) / gen(depth - 1);
      case 6: {
        std::uniform_int_distribution<int> e(1, 3);
        return routh::pow(gen(depth - 1), Expr::constant(double(e(rng_))));
      }
      case 7: return -gen(depth - 1);
      case 8: return routh::sin(gen(depth - 1));
      default: {
        std::uniform_int_distribution<int> f(0, 3);
        switch (f(rng_)) {
          case 0: return routh::cos(gen(depth - 1));
          case 1: return routh::exp(gen(depth - 1) * Expr::constant(0.3));
          case 2: return routh::log(routh::sqrt(gen(depth - 1) * gen(depth - 1)) +
                                    Expr::constant(1.0));
          default: return routh::sqrt(gen(depth - 1) * gen(depth - 1) +
                                      Expr::constant(0.5));
        }
      }
    }
  }

  std::mt19937_64 rng_;
  std::vector<std::string> vars_;
};

/// Eval-equivalence on random bindings (the project's standard way to compare
/// expressions; simplified forms are never compared structurally except for
/// idempotence). Samples hitting domain errors are redrawn.
inline bool eval_equivalent(const Expr& a, const Expr& b, ExprGen& gen,
                            int points = 200, double tol = 1e-10) {
  int checked = 0, attempts = 0;
  while (checked < points && attempts < points * 30) {
    ++attempts;
    Binding bind = gen.binding();
    double va, vb;
    try {
      va = routh::eval(a, bind);
      vb = routh::eval(b, bind);
    } catch (const routh::EvalError&) {
      continue;
    }
    double scale = std::max({1.0, std::abs(va), std::abs(vb)});
    if (std::abs(va - vb) > tol * scale) return false;
    ++checked;
  }
  return checked >= points / 2;
}

}  // namespace testutil
