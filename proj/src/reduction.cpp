#include "routh/reduction.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace routh {

namespace {

Expr alpha_var() { return Expr::variable(kAlphaName); }

void check_alpha_free(const LagrangianSystem& sys) {
  for (const auto& c : sys.chart.coords)
    if (c == kAlphaName)
      throw std::invalid_argument("'alpha' is reserved for the momentum level");
  if (sys.params.count(kAlphaName))
    throw std::invalid_argument("'alpha' is reserved for the momentum level");
}

/// True when e involves none of the given variables.
bool independent_of(const Expr& e, const std::vector<std::string>& vars) {
  auto free = free_variables(e);
  for (const auto& v : vars)
    if (free.count(v)) return false;
  return true;
}

}  // namespace

Binding ReducedSystem::bound_params() const {
  Binding b = params;
  b[kAlphaName] = level.alpha;
  return b;
}

Expr momentum_constraint(const LagrangianSystem& sys, const MomentumLevel& level,
                         bool skip_symmetry_check) {
  check_alpha_free(sys);
  if (std::find(sys.chart.coords.begin(), sys.chart.coords.end(), level.cyclic) ==
      sys.chart.coords.end())
    throw std::invalid_argument("cyclic coordinate '" + level.cyclic +
                                "' is absent from the chart");
  if (!skip_symmetry_check) {
    auto report =
        check_symmetry(sys, VectorField::coordinate_field(sys.chart, level.cyclic));
    if (!report.symmetric())
      throw SymmetryViolationError(
          "Lagrangian is not symmetric along d/d" + level.cyclic +
              "; d_T X (L) = " + render(report.derivative),
          report.derivative);
  }
  return simplify(diff(sys.lagrangian, velocity_name(level.cyclic)) - alpha_var());
}

CyclicSolve solve_cyclic_velocity(const LagrangianSystem& sys,
                                  const MomentumLevel& level,
                                  bool skip_symmetry_check) {
  CyclicSolve out;
  out.residual = momentum_constraint(sys, level, skip_symmetry_check);
  const std::string dy = velocity_name(level.cyclic);

  if (!depends_on(out.residual, dy)) {
    // Residual is free of the cyclic velocity. Either it constrains the
    // remaining variables (degenerate reduction), holds for every dy, or is
    // unsatisfiable.
    out.kind = CyclicSolve::Kind::Degenerate;
    out.constraint = out.residual;
    auto free = free_variables(out.residual);
    bool param_constant = true;
    for (const auto& v : free)
      if (!sys.params.count(v) && v != kAlphaName) param_constant = false;
    if (param_constant) {
      Binding b = sys.params;
      b[kAlphaName] = level.alpha;
      double value = eval(out.residual, b);
      if (std::abs(value) > 1e-12)
        throw EmptyConstraintSetError(
            "empty constraint set: the momentum constraint reduces to the "
            "nonzero constant " +
                render(out.residual) + " = " + std::to_string(value),
            out.residual);
      out.holds_identically = true;
    }
    return out;
  }

  Expr d1 = diff(out.residual, dy);
  if (!depends_on(d1, dy)) {
    // Affine: residual = A + B dy.
    Expr a = simplify(substitute(out.residual, {{dy, Expr::constant(0.0)}}));
    out.kind = CyclicSolve::Kind::Explicit;
    out.explicit_solution = simplify(-a / d1);
    return out;
  }

  Expr d2 = diff(d1, dy);
  if (!depends_on(d2, dy) && !d2.is_zero()) {
    // Quadratic: residual = A + B dy + C dy^2.
    Expr c = simplify(d2 / Expr::constant(2.0));
    Expr b = simplify(substitute(d1, {{dy, Expr::constant(0.0)}}));
    Expr a = simplify(substitute(out.residual, {{dy, Expr::constant(0.0)}}));
    Expr disc = sqrt(simplify(b * b - Expr::constant(4.0) * a * c));
    Expr two_c = Expr::constant(2.0) * c;
    out.kind = CyclicSolve::Kind::Branches;
    out.branches[0] = simplify((-b + disc) / two_c);
    out.branches[1] = simplify((-b - disc) / two_c);
    return out;
  }

  out.kind = CyclicSolve::Kind::Numeric;
  return out;
}

namespace {

Expr gauge_total_derivative(const Expr& reference, const Chart& reduced_chart) {
  Expr shift = Expr::constant(0.0);
  for (const auto& x : reduced_chart.coords)
    shift = shift + diff(reference, x) * Expr::variable(velocity_name(x));
  return simplify(shift);
}

void check_routhian_variables(const ReducedSystem& red) {
  std::set<std::string> allowed;
  for (const auto& x : red.reduced_chart.coords) {
    allowed.insert(x);
    allowed.insert(velocity_name(x));
  }
  for (const auto& [k, _] : red.params) allowed.insert(k);
  allowed.insert(kAlphaName);
  for (const auto& v : free_variables(red.routhian))
    if (!allowed.count(v))
      throw std::logic_error("Routhian references '" + v +
                             "' outside the reduced variables");
}

/// Reduced Hamiltonian for a degenerate reduction (Lagrangian affine in the
/// cyclic velocity u). Solves the stationarity constraint for the single
/// reduced velocity, reads the conjugate momentum p = dF/ddw off the family,
/// and Legendre-transforms: h = p * dw - F. Returns false when the structure
/// is outside the supported pattern (more than one reduced coordinate, or a
/// constraint/momentum not linear in its unknown).
bool derive_degenerate_hamiltonian(const LagrangianSystem& sys,
                                   ReducedSystem& red) {
  if (red.reduced_chart.dimension() != 1) return false;
  const std::string w = red.reduced_chart.coords[0];
  const std::string dw = velocity_name(w);
  const std::string u = velocity_name(red.level.cyclic);
  const std::string p = momentum_name(w);

  // Constraint dL/du = alpha must pin the reduced velocity linearly.
  Expr c = simplify(diff(sys.lagrangian, u));
  Expr c1 = diff(c, dw);
  if (c1.is_zero() || depends_on(c1, dw)) return false;
  Expr c0 = simplify(substitute(c, {{dw, Expr::constant(0.0)}}));
  Expr dw_pinned = simplify((alpha_var() - c0) / c1);

  // Momentum conjugate to w, linear in the cyclic-velocity parameter.
  Expr psi = simplify(diff(red.family, dw));
  Expr k1 = diff(psi, u);
  if (k1.is_zero() || depends_on(k1, u)) return false;
  Expr psi0 = simplify(substitute(psi, {{u, Expr::constant(0.0)}}));
  Expr u_of_p = simplify((Expr::variable(p) - psi0) / k1);
  u_of_p = simplify(substitute(u_of_p, {{dw, dw_pinned}}));

  Expr family_at = simplify(
      substitute(red.family, {{dw, dw_pinned}, {u, u_of_p}}));
  red.reduced_hamiltonian = simplify(Expr::variable(p) * dw_pinned - family_at);
  red.cyclic_velocity = u_of_p;
  return true;
}

}  // namespace

ReducedSystem routhian(const LagrangianSystem& sys, const MomentumLevel& level,
                       const GaugeRecord& gauge, std::optional<Branch> branch,
                       bool skip_symmetry_check) {
  CyclicSolve solve = solve_cyclic_velocity(sys, level, skip_symmetry_check);
  const std::string dy = velocity_name(level.cyclic);

  ReducedSystem red;
  red.full_chart = sys.chart;
  red.full_chart.cyclic = level.cyclic;
  red.reduced_chart = red.full_chart.reduced();
  red.params = sys.params;
  red.level = level;
  red.gauge = gauge;
  red.gauge.alpha = level.alpha;

  // Gauge reference must live on the reduced configuration space.
  for (const auto& v : free_variables(gauge.reference)) {
    bool ok = sys.params.count(v) > 0;
    for (const auto& x : red.reduced_chart.coords) ok = ok || v == x;
    if (!ok)
      throw std::invalid_argument("gauge reference references '" + v +
                                  "', not a reduced coordinate");
  }

  Expr family = simplify(sys.lagrangian - alpha_var() * Expr::variable(dy));

  switch (solve.kind) {
    case CyclicSolve::Kind::Explicit:
    case CyclicSolve::Kind::Branches: {
      Expr dy_star;
      if (solve.kind == CyclicSolve::Kind::Explicit) {
        dy_star = solve.explicit_solution;
      } else {
        if (!branch)
          throw BranchAmbiguityError(
              "momentum constraint is quadratic in the cyclic velocity; "
              "select a branch (+ or -)");
        dy_star = *branch == Branch::Plus ? solve.branches[0] : solve.branches[1];
      }
      red.kind = ReducedSystem::Kind::Regular;
      red.cyclic_velocity = dy_star;
      red.constraint = solve.residual;
      red.routhian = simplify(substitute(family, {{dy, dy_star}}) +
                              gauge_total_derivative(gauge.reference,
                                                     red.reduced_chart));
      check_routhian_variables(red);
      return red;
    }
    case CyclicSolve::Kind::Degenerate: {
      red.kind = ReducedSystem::Kind::Degenerate;
      red.family = family;
      red.constraint = solve.constraint;
      if (!solve.holds_identically) derive_degenerate_hamiltonian(sys, red);
      return red;
    }
    case CyclicSolve::Kind::Numeric:
      throw UnsupportedReductionError(
          "momentum constraint has no closed-form solution in the cyclic "
          "velocity; only pointwise numeric evaluation is available");
  }
  throw std::logic_error("unreachable");
}

StateField reduced_dynamics(const ReducedSystem& red) {
  if (red.kind == ReducedSystem::Kind::Regular) {
    LagrangianSystem reduced_sys(red.reduced_chart, red.routhian,
                                 red.bound_params());
    return euler_lagrange(reduced_sys).state_field();
  }
  if (!red.reduced_hamiltonian)
    throw UnsupportedReductionError(
        "degenerate reduction has no derivable reduced Hamiltonian; "
        "no explicit reduced dynamics available");
  VectorField field = hamiltonian_field(*red.reduced_hamiltonian, red.reduced_chart);
  std::vector<std::string> state = red.reduced_chart.coords;
  for (const auto& m : red.reduced_chart.momenta()) state.push_back(m);
  return make_state_field(std::move(state), field.components, red.bound_params());
}

ReconstructionResult reconstruct_cyclic(const ReducedSystem& red,
                                        const Trajectory& reduced_traj, double y0,
                                        Quadrature method) {
  if (red.kind == ReducedSystem::Kind::Degenerate && !red.reduced_hamiltonian)
    throw UnsupportedReductionError(
        "degenerate reduction leaves the cyclic velocity undetermined");
  if (reduced_traj.size() < 2)
    throw std::invalid_argument("reconstruction needs at least two samples");

  Binding params = red.bound_params();
  std::map<std::string, Expr> psub;
  for (const auto& [k, v] : params) psub.emplace(k, Expr::constant(v));
  std::map<std::string, std::size_t> slots;
  for (std::size_t i = 0; i < reduced_traj.components.size(); ++i)
    slots[reduced_traj.components[i]] = i;

  CompiledExpr vel(simplify(substitute(red.cyclic_velocity, psub)), slots);
  std::vector<double> dy(reduced_traj.size());
  for (std::size_t k = 0; k < reduced_traj.size(); ++k)
    dy[k] = vel(reduced_traj.samples[k].data());

  double dt = reduced_traj.times.size() > 1
                  ? reduced_traj.times[1] - reduced_traj.times[0]
                  : 0.0;
  std::vector<double> y = cumulative_integral(dy, dt, y0, method);

  ReconstructionResult result;
  result.trajectory.components = {red.level.cyclic,
                                  velocity_name(red.level.cyclic)};
  result.trajectory.times = reduced_traj.times;
  result.trajectory.samples.reserve(reduced_traj.size());
  for (std::size_t k = 0; k < reduced_traj.size(); ++k)
    result.trajectory.samples.push_back({y[k], dy[k]});

  // Constraint residual per sample. Regular reductions re-check the momentum
  // constraint at the reconstructed velocity; a degenerate reduction checks
  // its own constraint along the reduced flow.
  Expr residual;
  if (red.kind == ReducedSystem::Kind::Regular) {
    residual = simplify(substitute(
        red.constraint,
        {{velocity_name(red.level.cyclic), red.cyclic_velocity}}));
  } else {
    // The degenerate constraint is over (x, dx); substitute the reduced flow
    // dx = dh/dp to express it over the trajectory state (x, p).
    StateField field = reduced_dynamics(red);
    std::map<std::string, Expr> on_state;
    for (std::size_t i = 0; i < red.reduced_chart.dimension(); ++i)
      on_state.emplace(velocity_name(red.reduced_chart.coords[i]),
                       field.components[i]);
    residual = simplify(substitute(red.constraint, on_state));
  }
  CompiledExpr res(simplify(substitute(residual, psub)), slots);
  for (std::size_t k = 0; k < reduced_traj.size(); ++k)
    if (std::abs(res(reduced_traj.samples[k].data())) > 1e-6)
      result.flagged.push_back(k);
  return result;
}

ReducedSystem gauge_shift(const ReducedSystem& red, const Expr& f) {
  if (red.kind != ReducedSystem::Kind::Regular)
    throw std::invalid_argument("gauge_shift applies to regular reductions");
  ReducedSystem out = red;
  out.gauge.reference = simplify(red.gauge.reference + f);
  out.routhian =
      simplify(red.routhian + gauge_total_derivative(f, red.reduced_chart));
  check_routhian_variables(out);
  return out;
}

LagrangianSystem homogenize(const LagrangianSystem& sys) {
  for (const auto& c : sys.chart.coords)
    if (c == "s" || c == "ds")
      throw std::invalid_argument(
          "homogenize reserves the coordinate name 's'");
  if (sys.params.count("s") || sys.params.count("ds"))
    throw std::invalid_argument("homogenize reserves the name 's'");

  Expr ds = Expr::variable("ds");
  std::map<std::string, Expr> scale;
  for (const auto& c : sys.chart.coords) {
    std::string v = velocity_name(c);
    scale.emplace(v, Expr::variable(v) / ds);
  }
  Expr lh = simplify(ds * substitute(sys.lagrangian, scale));

  std::vector<std::string> coords = sys.chart.coords;
  coords.push_back("s");
  return LagrangianSystem(Chart(std::move(coords), "s"), lh, sys.params);
}

std::optional<MechanicalForm> detect_mechanical(const LagrangianSystem& sys) {
  const std::size_t n = sys.chart.dimension();
  const auto velocities = sys.chart.velocities();

  MechanicalForm form;
  form.metric.assign(n, std::vector<Expr>(n, Expr::constant(0.0)));
  for (std::size_t i = 0; i < n; ++i) {
    Expr di = diff(sys.lagrangian, velocities[i]);
    for (std::size_t j = 0; j < n; ++j) {
      Expr gij = diff(di, velocities[j]);
      if (!independent_of(gij, velocities)) return std::nullopt;
      form.metric[i][j] = gij;
    }
  }

  std::map<std::string, Expr> zero_vel;
  for (const auto& v : velocities) zero_vel.emplace(v, Expr::constant(0.0));
  form.potential = simplify(-substitute(sys.lagrangian, zero_vel));

  Expr kinetic = Expr::constant(0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j)
      kinetic = kinetic + form.metric[i][j] * Expr::variable(velocities[i]) *
                              Expr::variable(velocities[j]);
  form.kinetic = simplify(kinetic);

  Expr residual =
      simplify(sys.lagrangian -
               (Expr::constant(0.5) * form.kinetic - form.potential));
  if (check_zero(residual, sys.params, 500) == ZeroCheck::NonZero)
    return std::nullopt;
  return form;
}

ReducedSystem jacobi_reduce(const LagrangianSystem& sys, double energy,
                            Branch branch) {
  auto mech = detect_mechanical(sys);
  if (!mech)
    throw UnsupportedReductionError(
        "jacobi_reduce requires the mechanical form 1/2 g(v,v) - V; "
        "use the numeric path with an explicit bracket instead");

  double sign = branch == Branch::Plus ? 1.0 : -1.0;
  Expr e_minus_v = simplify(Expr::constant(energy) - mech->potential);
  Expr lj = simplify(Expr::constant(sign) * Expr::constant(std::sqrt(2.0)) *
                     sqrt(mech->kinetic) * sqrt(e_minus_v));
  Expr s_dot = simplify(Expr::constant(sign) * sqrt(mech->kinetic) /
                        sqrt(Expr::constant(2.0) * e_minus_v));

  ReducedSystem red;
  red.kind = ReducedSystem::Kind::Regular;
  red.full_chart = homogenize(sys).chart;
  red.reduced_chart = sys.chart;
  red.reduced_chart.cyclic.reset();
  red.params = sys.params;
  red.level = MomentumLevel{-energy, "s"};
  red.gauge.alpha = -energy;
  red.routhian = lj;
  red.cyclic_velocity = s_dot;
  return red;
}

double find_root(const std::function<double(double)>& f, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("find_root: empty bracket");
  double flo = f(lo), fhi = f(hi);
  if (flo == 0) return lo;
  if (fhi == 0) return hi;
  if ((flo > 0) == (fhi > 0))
    throw RootFindingError("no sign change in bracket [" + std::to_string(lo) +
                           ", " + std::to_string(hi) + "]");
  double a = lo, b = hi, fa = flo, fb = fhi;
  double best = a, fbest = fa;
  for (int iter = 0; iter < 60; ++iter) {
    // Secant proposal, guarded by the bracket; fall back to bisection.
    double mid = 0.5 * (a + b);
    double x = mid;
    double denom = fb - fa;
    if (denom != 0) {
      double secant = b - fb * (b - a) / denom;
      if (secant > a && secant < b) x = secant;
    }
    double fx = f(x);
    if (std::abs(fx) < std::abs(fbest)) {
      best = x;
      fbest = fx;
    }
    if (std::abs(fx) <= 1e-12) return x;
    if ((fx > 0) == (fa > 0)) {
      a = x;
      fa = fx;
    } else {
      b = x;
      fb = fx;
    }
    if (b - a < 1e-16 * std::max(1.0, std::abs(a))) break;
  }
  if (std::abs(fbest) <= 1e-9) return best;  // stagnated but close
  throw RootFindingError("root-finder did not reach the residual tolerance");
}

JacobiSample jacobi_value_numeric(const LagrangianSystem& sys, double energy,
                                  Branch branch, const Binding& sample,
                                  std::pair<double, double> bracket) {
  LagrangianSystem hsys = homogenize(sys);
  MomentumLevel level{-energy, "s"};
  Expr residual = momentum_constraint(hsys, level);
  Expr family =
      simplify(hsys.lagrangian - alpha_var() * Expr::variable("ds"));

  Binding base = sys.params;
  for (const auto& [k, v] : sample) base[k] = v;
  base[kAlphaName] = -energy;

  double lo = bracket.first, hi = bracket.second;
  if (branch == Branch::Minus) {
    lo = -bracket.second;
    hi = -bracket.first;
  }
  auto f = [&](double ds) {
    Binding b = base;
    b["ds"] = ds;
    return eval(residual, b);
  };
  JacobiSample out;
  out.s_dot = find_root(f, lo, hi);
  Binding b = base;
  b["ds"] = out.s_dot;
  out.value = eval(family, b);
  return out;
}

}  // namespace routh
