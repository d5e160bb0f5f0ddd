#pragma once

#include <array>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "routh/dynamics.hpp"
#include "routh/expr.hpp"
#include "routh/geometry.hpp"
#include "routh/mechanics.hpp"

namespace routh {

/// The symbolic momentum level is carried as the variable named below; it is
/// bound to MomentumLevel::alpha whenever expressions are evaluated.
inline constexpr const char* kAlphaName = "alpha";

/// A fixed value of the momentum function iota_X; the constraint set C_alpha
/// is {dL/ddy = alpha} in the straightened chart.
struct MomentumLevel {
  double alpha = 0.0;
  std::string cyclic;
};

/// Reference section used to trivialize the value bundle. Changing the
/// reference by f(x) shifts the Routhian by the total derivative
/// sum_i df/dx^i dx^i and leaves the reduced equations unchanged.
struct GaugeRecord {
  Expr reference = Expr::constant(0.0);
  double alpha = 0.0;
};

class SymmetryViolationError : public std::runtime_error {
 public:
  SymmetryViolationError(std::string message, Expr violation)
      : std::runtime_error(std::move(message)), violation_(std::move(violation)) {}
  const Expr& violation() const { return violation_; }

 private:
  Expr violation_;
};

/// The momentum constraint admits no solution: the residual is a nonzero
/// constant (e.g. the charged particle at alpha != e).
class EmptyConstraintSetError : public std::runtime_error {
 public:
  EmptyConstraintSetError(std::string message, Expr residual)
      : std::runtime_error(std::move(message)), residual_(std::move(residual)) {}
  const Expr& residual() const { return residual_; }

 private:
  Expr residual_;
};

class BranchAmbiguityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnsupportedReductionError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Momentum constraint residual dL/ddy - alpha over (x, dx, dy).
/// Enforces the symmetry check unless `skip_symmetry_check`.
Expr momentum_constraint(const LagrangianSystem& sys, const MomentumLevel& level,
                         bool skip_symmetry_check = false);

/// Outcome of solving the momentum constraint for the cyclic velocity.
struct CyclicSolve {
  enum class Kind {
    Explicit,    // unique closed form
    Branches,    // quadratic constraint, two roots
    Degenerate,  // residual free of the cyclic velocity (may be identically 0)
    Numeric,     // pointwise root-finding required
  };
  Kind kind = Kind::Numeric;
  Expr residual;                  // dL/ddy - alpha
  Expr explicit_solution;         // Kind::Explicit
  std::array<Expr, 2> branches;   // Kind::Branches ('+' root first)
  Expr constraint;                // Kind::Degenerate: residual over reduced vars
  bool holds_identically = false; // Kind::Degenerate with residual == 0
};

CyclicSolve solve_cyclic_velocity(const LagrangianSystem& sys,
                                  const MomentumLevel& level,
                                  bool skip_symmetry_check = false);

enum class Branch { Plus, Minus };

/// Reduced generating object. Regular reductions carry the coordinate
/// Routhian R(x, dx) = (L - alpha dy)|_{dy = cyclic_velocity} plus the gauge
/// shift; degenerate ones carry the family L - alpha dy_c with the cyclic
/// velocity as a parameter, the constraint, and (when derivable) a reduced
/// Hamiltonian over (x, p_x).
struct ReducedSystem {
  enum class Kind { Regular, Degenerate };

  Kind kind = Kind::Regular;
  Chart full_chart;
  Chart reduced_chart;
  Binding params;
  MomentumLevel level;
  GaugeRecord gauge;

  // Regular:
  Expr routhian;
  Expr cyclic_velocity;  // dy(x, dx; alpha); for a degenerate reduction with
                         // a Hamiltonian this is dy(x, p) instead

  // Degenerate:
  Expr family;                            // L - alpha dy_c
  Expr constraint;                        // rut:9 residual
  std::optional<Expr> reduced_hamiltonian;

  /// Params plus the bound value of alpha.
  Binding bound_params() const;
};

ReducedSystem routhian(const LagrangianSystem& sys, const MomentumLevel& level,
                       const GaugeRecord& gauge = {},
                       std::optional<Branch> branch = std::nullopt,
                       bool skip_symmetry_check = false);

/// Explicit first-order field of the reduced dynamics: Euler-Lagrange of the
/// Routhian on (x, dx) for regular reductions, the Hamiltonian field on
/// (x, p_x) for degenerate ones.
StateField reduced_dynamics(const ReducedSystem& red);

struct ReconstructionResult {
  Trajectory trajectory;            // columns: cyclic coordinate and velocity
  std::vector<std::size_t> flagged; // samples with constraint residual > 1e-6
};

/// Recovers the cyclic coordinate along a reduced trajectory: evaluates the
/// cyclic velocity on each sample and integrates it from y(0) = y0.
ReconstructionResult reconstruct_cyclic(const ReducedSystem& red,
                                        const Trajectory& reduced_traj, double y0,
                                        Quadrature method = Quadrature::Trapezoid);

/// Shifts the reference section by f(x): R' = R + sum_i df/dx^i dx^i.
ReducedSystem gauge_shift(const ReducedSystem& red, const Expr& f);

/// Homogenized system on chart (coords..., s) with
/// L_h(q, v, s, ds) = ds * L(q, v/ds); s is cyclic by construction.
LagrangianSystem homogenize(const LagrangianSystem& sys);

/// Structural detection of the mechanical form L = 1/2 g_ij(q) dq^i dq^j - V(q).
struct MechanicalForm {
  std::vector<std::vector<Expr>> metric;  // g_ij = d2L/ddq_i ddq_j
  Expr kinetic;                           // g(v, v) = sum g_ij dq^i dq^j
  Expr potential;                         // V(q)
};

std::optional<MechanicalForm> detect_mechanical(const LagrangianSystem& sys);

/// Jacobi principle via Routh reduction of the homogenized system at
/// parameter -E. Requires the mechanical form; the Routhian is the closed
/// form sign * sqrt(2) sqrt(g(v,v)) sqrt(E - V) and the stationary cyclic
/// velocity is sign * sqrt(g(v,v)) / sqrt(2 (E - V)).
ReducedSystem jacobi_reduce(const LagrangianSystem& sys, double energy,
                            Branch branch = Branch::Plus);

struct JacobiSample {
  double value = 0.0;  // L_J at the sample
  double s_dot = 0.0;  // stationary homogenization velocity
};

/// Numeric Jacobi path: homogenize, root-find the stationary ds in `bracket`,
/// and evaluate the Routhian family there. Works for any Lagrangian.
JacobiSample jacobi_value_numeric(const LagrangianSystem& sys, double energy,
                                  Branch branch, const Binding& sample,
                                  std::pair<double, double> bracket = {1e-3, 1e3});

/// No root of f in the bracket, or the root-finder failed to reach the
/// residual tolerance within its iteration budget.
class RootFindingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Guarded secant/bisection on [lo, hi]; stops at |f| <= 1e-12 or after 60
/// iterations (whichever first; failing both raises RootFindingError).
double find_root(const std::function<double(double)>& f, double lo, double hi);

}  // namespace routh
