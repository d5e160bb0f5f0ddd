#pragma once

#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "routh/expr.hpp"

namespace routh {

/// Explicit first-order autonomous field on a named state vector.
/// `components` holds the symbolic right-hand sides when the field has a
/// closed form (empty for numeric-only fields built from a pointwise linear
/// solve); `rhs` is always callable.
struct StateField {
  std::vector<std::string> state;
  std::vector<Expr> components;
  std::function<void(const double* in, double* out)> rhs;

  std::size_t dimension() const { return state.size(); }
};

/// Builds a StateField from symbolic components; `params` are bound as fixed
/// constants before compiling.
StateField make_state_field(std::vector<std::string> state,
                            std::vector<Expr> components,
                            const Binding& params);

/// Samples of a state vector on a uniform time grid. `error` records a
/// mid-trajectory field failure; the stored samples then cover only the
/// reachable prefix.
struct Trajectory {
  std::vector<std::string> components;
  std::vector<double> times;
  std::vector<std::vector<double>> samples;
  std::optional<std::string> error;

  std::size_t size() const { return times.size(); }
  /// Column index of a named component; throws if absent.
  std::size_t index_of(const std::string& name) const;
};

/// Classical fixed-step RK4. The final step is shortened so the grid lands
/// exactly on t1. A field evaluation error truncates the trajectory and is
/// recorded in Trajectory::error.
Trajectory integrate_rk4(const StateField& field, const Binding& state0,
                         double t0, double t1, double dt);

struct MonitorSeries {
  std::string name;
  std::vector<double> values;
  double drift = 0.0;  // max |value - value[0]|
};

/// Evaluates each named expression on every sample (state components plus
/// `params` are in scope) and reports the per-quantity drift.
std::vector<MonitorSeries> monitor(
    const Trajectory& traj,
    const std::vector<std::pair<std::string, Expr>>& quantities,
    const Binding& params);

struct Deviation {
  std::string a_component;
  std::string b_component;
  double max_abs = 0.0;
};

/// Sup-norm deviation per component pair over the overlapping time range;
/// `b` is linearly interpolated onto `a`'s grid. Throws std::invalid_argument
/// when the time ranges are disjoint.
std::vector<Deviation> compare(
    const Trajectory& a, const Trajectory& b,
    const std::vector<std::pair<std::string, std::string>>& pairs);

/// CSV emission: header "t,<components...>", one sample per line, 17
/// significant digits, LF line endings, locale-independent.
void write_csv(const Trajectory& traj, std::ostream& out);

enum class Quadrature { Trapezoid, Simpson };

/// Cumulative integral of sampled values on a uniform grid, same length as
/// the input, starting from `initial`. Simpson uses three-point panels and is
/// exact for quadratics; with fewer than three samples it falls back to the
/// trapezoid rule.
std::vector<double> cumulative_integral(const std::vector<double>& values,
                                        double dt, double initial,
                                        Quadrature method);

}  // namespace routh
