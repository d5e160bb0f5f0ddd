#pragma once

#include <optional>
#include <string>
#include <vector>

#include "routh/expr.hpp"

namespace routh {

/// Naming conventions: the velocity of coordinate "q" is "dq", its conjugate
/// momentum is "p_q", and its acceleration symbol is "ddq".
std::string velocity_name(const std::string& coord);
std::string momentum_name(const std::string& coord);
std::string acceleration_name(const std::string& coord);

/// Ordered configuration coordinates, optionally with a distinguished cyclic
/// coordinate y whose symmetry field is the straightened frame X = d/dy.
struct Chart {
  std::vector<std::string> coords;
  std::optional<std::string> cyclic;

  Chart() = default;
  Chart(std::vector<std::string> coords, std::optional<std::string> cyclic = {});

  std::size_t dimension() const { return coords.size(); }
  std::size_t index_of(const std::string& coord) const;
  std::vector<std::string> velocities() const;
  std::vector<std::string> momenta() const;

  /// Chart with the cyclic coordinate removed (the projection to Q_X).
  Chart reduced() const;
};

enum class Bundle { Base, Tangent, Cotangent };

/// A vector field given by one component expression per coordinate of the
/// tagged bundle: n components over (q) for Base, 2n over (q, dq) for
/// Tangent, 2n over (q, p_q) for Cotangent.
struct VectorField {
  Chart chart;
  Bundle bundle = Bundle::Base;
  std::vector<Expr> components;

  VectorField(Chart chart, Bundle bundle, std::vector<Expr> components);

  /// The base field d/dcoord.
  static VectorField coordinate_field(const Chart& chart, const std::string& coord);
  static VectorField zero(const Chart& chart);

  /// Component values at a point (binding of the bundle's variables).
  std::vector<double> values_at(const Binding& point) const;
};

/// Complete (tangent) lift: components (X^i, dX^j/dq^k dq^k) on (q, dq).
VectorField complete_lift(const VectorField& x);

/// Momentum function iota_X = <p, X(q)> = sum_i p_i X^i, linear in fibres.
Expr momentum_function(const VectorField& x);

/// Hamiltonian vector field of h(q,p): components (dh/dp_i, -dh/dq^i).
VectorField hamiltonian_field(const Expr& h, const Chart& chart);

/// Cotangent lift: the Hamiltonian field of the momentum function;
/// components (X^i, -dX^j/dq^k p_j) on (q, p).
VectorField cotangent_lift(const VectorField& x);

// Coordinate maps of the double bundles. All take flat 4n-tuples in the block
// layouts written below and are pure index shuffles (plus one sign).

/// kappa_Q: (q, qdot, dq, dqdot) -> (q, dq, qdot, dqdot); an involution.
std::vector<double> flip_kappa(const std::vector<double>& w);

/// beta_Q: (q, p, qdot, pdot) -> (q, p, pdot, -qdot).
std::vector<double> beta_map(const std::vector<double>& v);

/// alpha_Q: (q, p, qdot, pdot) -> (q, qdot, pdot, p).
std::vector<double> alpha_map(const std::vector<double>& v);

/// Inverse of alpha_Q: (q, qdot, phi, psi) -> (q, psi, qdot, phi).
std::vector<double> alpha_map_inverse(const std::vector<double>& v);

/// Tangent pairing <<w, u>> = sum_i (pdot_i v^i + p_i vdot^i) for
/// w = (q, p, qdot, pdot) and u = (q, v, qdot, vdot). The (q, qdot) blocks
/// must agree to 1e-12 (both arguments cover the same base curve).
double tangent_pairing(const std::vector<double>& w, const std::vector<double>& u);

/// Tangent map of a base field viewed as a map X: Q -> TQ, applied to the
/// tangent vector (q, v): returns (q, X(q), v, dX/dq . v) in the
/// (q, qdot, dq, dqdot) layout of TTQ.
std::vector<double> tangent_map_of_field(const VectorField& x,
                                         const std::vector<double>& q,
                                         const std::vector<double>& v);

/// d_T omega_Q evaluated on two coordinate tangent tuples (dq,dp,dqdot,dpdot):
/// sum_i (dp_i^a dqdot_i^b - dp_i^b dqdot_i^a + dpdot_i^a dq_i^b - dpdot_i^b dq_i^a).
double tangent_omega_pairing(const std::vector<double>& a,
                             const std::vector<double>& b);

/// Canonical symplectic pairing on T*T*Q in (q, p, xi, y) blocks:
/// sum_i (xi_i^a q_i^b - xi_i^b q_i^a + y_i^a p_i^b - y_i^b p_i^a).
double cotangent_omega_pairing(const std::vector<double>& a,
                               const std::vector<double>& b);

}  // namespace routh
