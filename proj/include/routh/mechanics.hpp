#pragma once

#include <optional>
#include <string>
#include <vector>

#include "routh/dynamics.hpp"
#include "routh/expr.hpp"
#include "routh/geometry.hpp"

namespace routh {

/// A Lagrangian L(q, dq) on a chart with numeric parameter bindings.
/// Free variables of L must lie in coords + velocities + params.
struct LagrangianSystem {
  Chart chart;
  Expr lagrangian;
  Binding params;

  LagrangianSystem(Chart chart, Expr lagrangian, Binding params = {});
};

class SingularHessianError : public std::runtime_error {
 public:
  SingularHessianError(std::string message, double condition)
      : std::runtime_error(std::move(message)), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

/// Euler-Lagrange equations in residual form
///   EL_i = sum_j d2L/ddq_i ddq_j * ddq_j + sum_j d2L/ddq_i dq_j * dq_j - dL/dq_i
/// with acceleration symbols ddq_j, plus an explicit first-order form solved
/// pointwise (and symbolically for dimension <= 2).
class EulerLagrangeSystem {
 public:
  explicit EulerLagrangeSystem(const LagrangianSystem& sys);

  const Chart& chart() const { return chart_; }
  const std::vector<Expr>& residuals() const { return residuals_; }
  const Expr& velocity_hessian(std::size_t i, std::size_t j) const;

  /// Accelerations at a point (coords + velocities bound). Throws
  /// SingularHessianError when the velocity Hessian is singular there;
  /// the error carries a 1-norm condition estimate.
  std::vector<double> accelerations_at(const Binding& point) const;

  /// 1-norm condition estimate of the velocity Hessian at a point.
  double hessian_condition_at(const Binding& point) const;

  /// Explicit field on the state (q..., dq...). Symbolic components are
  /// available for dimension <= 2; larger systems use the pointwise solve.
  StateField state_field() const;

  /// Symbolic acceleration expressions (dimension <= 2 only).
  const std::vector<Expr>& symbolic_accelerations() const;

 private:
  Chart chart_;
  Binding params_;
  std::vector<Expr> residuals_;
  std::vector<std::vector<Expr>> hessian_;   // d2L/ddq_i ddq_j
  std::vector<std::vector<Expr>> mixed_;     // d2L/ddq_i dq_j
  std::vector<Expr> gradient_;               // dL/dq_i
  std::vector<Expr> symbolic_accel_;         // empty when dimension > 2
};

EulerLagrangeSystem euler_lagrange(const LagrangianSystem& sys);

/// Legendre map: p_i = dL/ddq_i as expressions over (q, dq).
struct LegendreMap {
  std::vector<std::string> momentum_names;
  std::vector<Expr> momenta;
};

LegendreMap legendre(const LagrangianSystem& sys);

/// Numerically inverts the Legendre map at fixed q: finds velocities with
/// dL/ddq = p by Newton iteration. `guess` seeds the iteration (defaults to
/// zero velocities).
Binding invert_legendre(const LagrangianSystem& sys, const Binding& coords,
                        const std::vector<double>& momenta,
                        const std::vector<double>* guess = nullptr);

enum class ZeroCheck { SymbolicZero, NumericZero, NonZero };

/// Tests whether an expression is identically zero: first structurally after
/// simplify, then at random points (params bound, remaining variables drawn
/// from [-2.5,-0.3] u [0.3,2.5]; samples that hit domain errors are redrawn).
ZeroCheck check_zero(const Expr& e, const Binding& params, int points = 1000,
                     double tol = 1e-10);

struct SymmetryReport {
  ZeroCheck status = ZeroCheck::NonZero;
  Expr derivative;  // d_T X (L), simplified

  bool symmetric() const { return status != ZeroCheck::NonZero; }
  bool numeric_only() const { return status == ZeroCheck::NumericZero; }
};

/// Tests the symmetry condition d_T X (L) = 0 for a base field X.
SymmetryReport check_symmetry(const LagrangianSystem& sys, const VectorField& x);

/// Hamiltonian generating family F(q, p, v) = L(q, v) - sum p_i v^i with the
/// velocities as family parameters.
Expr hamiltonian_family(const LagrangianSystem& sys);

/// Energy E = sum dq_i dL/ddq_i - L (equals H through the Legendre map for
/// hyperregular L).
Expr energy(const LagrangianSystem& sys);

/// Momentum of the symmetry field d/dcyclic as an expression over (q, dq):
/// iota_X pulled back through the Legendre map, i.e. dL/ddy.
Expr cyclic_momentum(const LagrangianSystem& sys);

// Small dense linear algebra used by the explicit form and Newton steps.
namespace linalg {
/// Solves A x = b in place by partial-pivot Gaussian elimination. Returns
/// false when a pivot underflows (singular to working precision).
bool solve(std::vector<std::vector<double>> a, std::vector<double> b,
           std::vector<double>& x);
/// 1-norm condition estimate through the explicit inverse; infinity when
/// singular.
double condition_1norm(const std::vector<std::vector<double>>& a);
}  // namespace linalg

}  // namespace routh
