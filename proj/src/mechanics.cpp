#include "routh/mechanics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <set>
#include <stdexcept>

namespace routh {

LagrangianSystem::LagrangianSystem(Chart chart_in, Expr lagrangian_in,
                                   Binding params_in)
    : chart(std::move(chart_in)),
      lagrangian(std::move(lagrangian_in)),
      params(std::move(params_in)) {
  std::set<std::string> allowed(chart.coords.begin(), chart.coords.end());
  for (const auto& v : chart.velocities()) allowed.insert(v);
  for (const auto& [k, _] : params) allowed.insert(k);
  for (const auto& v : free_variables(lagrangian))
    if (!allowed.count(v))
      throw std::invalid_argument("Lagrangian references unknown name '" + v + "'");
}

namespace linalg {

bool solve(std::vector<std::vector<double>> a, std::vector<double> b,
           std::vector<double>& x) {
  const std::size_t n = a.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    for (std::size_t r = col + 1; r < n; ++r)
      if (std::abs(a[r][col]) > std::abs(a[pivot][col])) pivot = r;
    if (std::abs(a[pivot][col]) < 1e-300) return false;
    std::swap(a[pivot], a[col]);
    std::swap(b[pivot], b[col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      double f = a[r][col] / a[col][col];
      for (std::size_t c = col; c < n; ++c) a[r][c] -= f * a[col][c];
      b[r] -= f * b[col];
    }
  }
  x.assign(n, 0.0);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t j = i + 1; j < n; ++j) s -= a[i][j] * x[j];
    x[i] = s / a[i][i];
  }
  return true;
}

double condition_1norm(const std::vector<std::vector<double>>& a) {
  const std::size_t n = a.size();
  auto norm1 = [n](const std::vector<std::vector<double>>& m) {
    double best = 0.0;
    for (std::size_t c = 0; c < n; ++c) {
      double s = 0.0;
      for (std::size_t r = 0; r < n; ++r) s += std::abs(m[r][c]);
      best = std::max(best, s);
    }
    return best;
  };
  std::vector<std::vector<double>> inv(n, std::vector<double>(n, 0.0));
  for (std::size_t c = 0; c < n; ++c) {
    std::vector<double> e(n, 0.0), x;
    e[c] = 1.0;
    if (!solve(a, e, x)) return std::numeric_limits<double>::infinity();
    for (std::size_t r = 0; r < n; ++r) inv[r][c] = x[r];
  }
  return norm1(a) * norm1(inv);
}

}  // namespace linalg

EulerLagrangeSystem::EulerLagrangeSystem(const LagrangianSystem& sys)
    : chart_(sys.chart), params_(sys.params) {
  const std::size_t n = chart_.dimension();
  const Expr& L = sys.lagrangian;
  std::vector<Expr> dLdv;
  for (std::size_t i = 0; i < n; ++i)
    dLdv.push_back(diff(L, velocity_name(chart_.coords[i])));

  hessian_.assign(n, std::vector<Expr>(n, Expr::constant(0.0)));
  mixed_.assign(n, std::vector<Expr>(n, Expr::constant(0.0)));
  for (std::size_t i = 0; i < n; ++i) {
    gradient_.push_back(diff(L, chart_.coords[i]));
    for (std::size_t j = 0; j < n; ++j) {
      hessian_[i][j] = diff(dLdv[i], velocity_name(chart_.coords[j]));
      mixed_[i][j] = diff(dLdv[i], chart_.coords[j]);
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    Expr r = Expr::constant(0.0);
    for (std::size_t j = 0; j < n; ++j) {
      r = r + hessian_[i][j] * Expr::variable(acceleration_name(chart_.coords[j]));
      r = r + mixed_[i][j] * Expr::variable(velocity_name(chart_.coords[j]));
    }
    residuals_.push_back(simplify(r - gradient_[i]));
  }

  // rhs_i = dL/dq_i - sum_j mixed_ij dq_j; explicit accelerations solve
  // hessian * a = rhs. Closed forms are kept for n <= 2.
  auto rhs_expr = [&](std::size_t i) {
    Expr r = gradient_[i];
    for (std::size_t j = 0; j < n; ++j)
      r = r - mixed_[i][j] * Expr::variable(velocity_name(chart_.coords[j]));
    return r;
  };
  if (n == 1) {
    symbolic_accel_.push_back(simplify(rhs_expr(0) / hessian_[0][0]));
  } else if (n == 2) {
    Expr det = simplify(hessian_[0][0] * hessian_[1][1] -
                        hessian_[0][1] * hessian_[1][0]);
    Expr b0 = rhs_expr(0), b1 = rhs_expr(1);
    symbolic_accel_.push_back(
        simplify((hessian_[1][1] * b0 - hessian_[0][1] * b1) / det));
    symbolic_accel_.push_back(
        simplify((hessian_[0][0] * b1 - hessian_[1][0] * b0) / det));
  }
}

const Expr& EulerLagrangeSystem::velocity_hessian(std::size_t i,
                                                  std::size_t j) const {
  return hessian_.at(i).at(j);
}

const std::vector<Expr>& EulerLagrangeSystem::symbolic_accelerations() const {
  return symbolic_accel_;
}

namespace {

Binding with_params(const Binding& point, const Binding& params) {
  Binding b = params;
  for (const auto& [k, v] : point) b[k] = v;
  return b;
}

}  // namespace

std::vector<double> EulerLagrangeSystem::accelerations_at(const Binding& point) const {
  const std::size_t n = chart_.dimension();
  Binding b = with_params(point, params_);
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  std::vector<double> rhs(n);
  for (std::size_t i = 0; i < n; ++i) {
    double r = eval(gradient_[i], b);
    for (std::size_t j = 0; j < n; ++j) {
      m[i][j] = eval(hessian_[i][j], b);
      r -= eval(mixed_[i][j], b) * b.at(velocity_name(chart_.coords[j]));
    }
    rhs[i] = r;
  }
  std::vector<double> a;
  if (!linalg::solve(m, rhs, a)) {
    throw SingularHessianError(
        "velocity Hessian is singular at the requested point (condition ~ inf)",
        std::numeric_limits<double>::infinity());
  }
  double cond = linalg::condition_1norm(m);
  if (cond > 1e12)
    throw SingularHessianError(
        "velocity Hessian is near-singular at the requested point (condition ~ " +
            std::to_string(cond) + ")",
        cond);
  return a;
}

double EulerLagrangeSystem::hessian_condition_at(const Binding& point) const {
  const std::size_t n = chart_.dimension();
  Binding b = with_params(point, params_);
  std::vector<std::vector<double>> m(n, std::vector<double>(n));
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) m[i][j] = eval(hessian_[i][j], b);
  return linalg::condition_1norm(m);
}

StateField EulerLagrangeSystem::state_field() const {
  const std::size_t n = chart_.dimension();
  std::vector<std::string> state = chart_.coords;
  for (const auto& v : chart_.velocities()) state.push_back(v);

  if (!symbolic_accel_.empty()) {
    std::vector<Expr> comps;
    for (std::size_t i = 0; i < n; ++i)
      comps.push_back(Expr::variable(velocity_name(chart_.coords[i])));
    for (const auto& a : symbolic_accel_) comps.push_back(a);
    return make_state_field(std::move(state), std::move(comps), params_);
  }

  // Pointwise linear solve for higher dimensions.
  std::map<std::string, std::size_t> slots;
  for (std::size_t i = 0; i < state.size(); ++i) slots[state[i]] = i;
  std::map<std::string, Expr> psub;
  for (const auto& [k, v] : params_) psub.emplace(k, Expr::constant(v));
  auto compile = [&](const Expr& e) {
    return CompiledExpr(simplify(substitute(e, psub)), slots);
  };
  struct Compiled {
    std::vector<CompiledExpr> hessian, mixed, gradient;
    std::size_t n;
  };
  auto cc = std::make_shared<Compiled>();
  cc->n = n;
  for (std::size_t i = 0; i < n; ++i) {
    cc->gradient.push_back(compile(gradient_[i]));
    for (std::size_t j = 0; j < n; ++j) {
      cc->hessian.push_back(compile(hessian_[i][j]));
      cc->mixed.push_back(compile(mixed_[i][j]));
    }
  }
  StateField field;
  field.state = std::move(state);
  field.rhs = [cc](const double* in, double* out) {
    const std::size_t n = cc->n;
    std::vector<std::vector<double>> m(n, std::vector<double>(n));
    std::vector<double> rhs(n);
    for (std::size_t i = 0; i < n; ++i) {
      double r = cc->gradient[i](in);
      for (std::size_t j = 0; j < n; ++j) {
        m[i][j] = cc->hessian[i * n + j](in);
        r -= cc->mixed[i * n + j](in) * in[n + j];
      }
      rhs[i] = r;
    }
    std::vector<double> a;
    if (!linalg::solve(m, rhs, a))
      throw EvalError("singular velocity Hessian during integration");
    for (std::size_t i = 0; i < n; ++i) {
      out[i] = in[n + i];
      out[n + i] = a[i];
    }
  };
  return field;
}

EulerLagrangeSystem euler_lagrange(const LagrangianSystem& sys) {
  return EulerLagrangeSystem(sys);
}

LegendreMap legendre(const LagrangianSystem& sys) {
  LegendreMap map;
  for (const auto& c : sys.chart.coords) {
    map.momentum_names.push_back(momentum_name(c));
    map.momenta.push_back(diff(sys.lagrangian, velocity_name(c)));
  }
  return map;
}

Binding invert_legendre(const LagrangianSystem& sys, const Binding& coords,
                        const std::vector<double>& momenta,
                        const std::vector<double>* guess) {
  const std::size_t n = sys.chart.dimension();
  if (momenta.size() != n)
    throw std::invalid_argument("invert_legendre: momentum dimension mismatch");
  LegendreMap lmap = legendre(sys);
  EulerLagrangeSystem el(sys);

  std::vector<double> v = guess ? *guess : std::vector<double>(n, 0.0);
  Binding b = with_params(coords, sys.params);
  for (int iter = 0; iter < 50; ++iter) {
    for (std::size_t i = 0; i < n; ++i) b[velocity_name(sys.chart.coords[i])] = v[i];
    std::vector<double> resid(n);
    double worst = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      resid[i] = eval(lmap.momenta[i], b) - momenta[i];
      worst = std::max(worst, std::abs(resid[i]));
    }
    if (worst < 1e-12) {
      Binding out;
      for (std::size_t i = 0; i < n; ++i)
        out[velocity_name(sys.chart.coords[i])] = v[i];
      return out;
    }
    std::vector<std::vector<double>> jac(n, std::vector<double>(n));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        jac[i][j] = eval(el.velocity_hessian(i, j), b);
    std::vector<double> step;
    if (!linalg::solve(jac, resid, step))
      throw SingularHessianError("Legendre map not invertible at this point",
                                 std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n; ++i) v[i] -= step[i];
  }
  throw std::runtime_error("invert_legendre: Newton iteration did not converge");
}

ZeroCheck check_zero(const Expr& e, const Binding& params, int points, double tol) {
  Expr s = simplify(e);
  if (s.is_zero()) return ZeroCheck::SymbolicZero;

  std::map<std::string, Expr> psub;
  for (const auto& [k, v] : params) psub.emplace(k, Expr::constant(v));
  s = simplify(substitute(s, psub));
  if (s.is_zero()) return ZeroCheck::SymbolicZero;

  std::vector<std::string> vars(free_variables(s).begin(), free_variables(s).end());
  if (vars.empty())
    return std::abs(eval(s, {})) <= tol ? ZeroCheck::NumericZero : ZeroCheck::NonZero;

  std::mt19937_64 rng(0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> mag(0.3, 2.5);
  std::uniform_int_distribution<int> coin(0, 1);
  int valid = 0;
  int attempts = 0;
  const int max_attempts = points * 20;
  while (valid < points && attempts < max_attempts) {
    ++attempts;
    Binding b;
    bool positive_retry = attempts > points * 10;
    for (const auto& v : vars) {
      double x = mag(rng);
      if (!positive_retry && coin(rng)) x = -x;
      b[v] = x;
    }
    try {
      if (std::abs(eval(s, b)) > tol) return ZeroCheck::NonZero;
      ++valid;
    } catch (const EvalError&) {
      continue;  // outside the common domain; redraw
    }
  }
  if (valid < points / 10)
    throw std::runtime_error(
        "check_zero: could not find enough valid sample points");
  return ZeroCheck::NumericZero;
}

SymmetryReport check_symmetry(const LagrangianSystem& sys, const VectorField& x) {
  if (x.bundle != Bundle::Base)
    throw std::invalid_argument("check_symmetry expects a base field");
  VectorField lifted = complete_lift(x);
  const std::size_t n = sys.chart.dimension();
  Expr d = Expr::constant(0.0);
  for (std::size_t i = 0; i < n; ++i) {
    d = d + lifted.components[i] * diff(sys.lagrangian, sys.chart.coords[i]);
    d = d + lifted.components[n + i] *
                diff(sys.lagrangian, velocity_name(sys.chart.coords[i]));
  }
  SymmetryReport report;
  report.derivative = simplify(d);
  report.status = check_zero(report.derivative, sys.params);
  return report;
}

Expr hamiltonian_family(const LagrangianSystem& sys) {
  Expr f = sys.lagrangian;
  for (const auto& c : sys.chart.coords)
    f = f - Expr::variable(momentum_name(c)) * Expr::variable(velocity_name(c));
  return simplify(f);
}

Expr energy(const LagrangianSystem& sys) {
  Expr e = Expr::constant(0.0);
  for (const auto& c : sys.chart.coords)
    e = e + Expr::variable(velocity_name(c)) *
                diff(sys.lagrangian, velocity_name(c));
  return simplify(e - sys.lagrangian);
}

Expr cyclic_momentum(const LagrangianSystem& sys) {
  if (!sys.chart.cyclic)
    throw std::invalid_argument("system has no cyclic coordinate");
  return diff(sys.lagrangian, velocity_name(*sys.chart.cyclic));
}

}  // namespace routh
