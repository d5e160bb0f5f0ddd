#include "routh/dynamics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <stdexcept>

namespace routh {

StateField make_state_field(std::vector<std::string> state,
                            std::vector<Expr> components, const Binding& params) {
  if (state.size() != components.size())
    throw std::invalid_argument("state/component count mismatch");
  std::map<std::string, Expr> param_subst;
  for (const auto& [k, v] : params) param_subst.emplace(k, Expr::constant(v));
  std::map<std::string, std::size_t> slots;
  for (std::size_t i = 0; i < state.size(); ++i) slots[state[i]] = i;

  auto compiled = std::make_shared<std::vector<CompiledExpr>>();
  std::vector<Expr> bound;
  for (const auto& c : components) {
    Expr b = simplify(substitute(c, param_subst));
    compiled->emplace_back(b, slots);
    bound.push_back(b);
  }
  StateField field;
  field.state = std::move(state);
  field.components = std::move(bound);
  field.rhs = [compiled](const double* in, double* out) {
    for (std::size_t i = 0; i < compiled->size(); ++i) out[i] = (*compiled)[i](in);
  };
  return field;
}

std::size_t Trajectory::index_of(const std::string& name) const {
  auto it = std::find(components.begin(), components.end(), name);
  if (it == components.end())
    throw std::invalid_argument("trajectory has no component '" + name + "'");
  return static_cast<std::size_t>(it - components.begin());
}

Trajectory integrate_rk4(const StateField& field, const Binding& state0,
                         double t0, double t1, double dt) {
  if (dt <= 0) throw std::invalid_argument("dt must be positive");
  if (t1 <= t0) throw std::invalid_argument("t1 must exceed t0");

  const std::size_t n = field.dimension();
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) {
    auto it = state0.find(field.state[i]);
    if (it == state0.end())
      throw std::invalid_argument("initial state missing '" + field.state[i] + "'");
    y[i] = it->second;
  }

  Trajectory traj;
  traj.components = field.state;
  traj.times.push_back(t0);
  traj.samples.push_back(y);

  std::vector<double> k1(n), k2(n), k3(n), k4(n), tmp(n);
  double t = t0;
  std::size_t step = 0;
  while (t < t1) {
    double h = dt;
    double t_next = t0 + static_cast<double>(step + 1) * dt;
    if (t_next > t1 - 1e-12 * dt) {  // shorten the final step to land on t1
      h = t1 - t;
      t_next = t1;
    }
    try {
      field.rhs(y.data(), k1.data());
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k1[i];
      field.rhs(tmp.data(), k2.data());
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + 0.5 * h * k2[i];
      field.rhs(tmp.data(), k3.data());
      for (std::size_t i = 0; i < n; ++i) tmp[i] = y[i] + h * k3[i];
      field.rhs(tmp.data(), k4.data());
    } catch (const EvalError& err) {
      traj.error = std::string("field evaluation failed at t=") +
                   std::to_string(t) + ": " + err.what();
      return traj;
    }
    for (std::size_t i = 0; i < n; ++i)
      y[i] += h / 6.0 * (k1[i] + 2 * k2[i] + 2 * k3[i] + k4[i]);
    bool finite = true;
    for (double v : y) finite = finite && std::isfinite(v);
    if (!finite) {
      traj.error = "state became non-finite at t=" + std::to_string(t_next);
      return traj;
    }
    t = t_next;
    ++step;
    traj.times.push_back(t);
    traj.samples.push_back(y);
  }
  return traj;
}

std::vector<MonitorSeries> monitor(
    const Trajectory& traj,
    const std::vector<std::pair<std::string, Expr>>& quantities,
    const Binding& params) {
  std::map<std::string, Expr> param_subst;
  for (const auto& [k, v] : params) param_subst.emplace(k, Expr::constant(v));
  std::map<std::string, std::size_t> slots;
  for (std::size_t i = 0; i < traj.components.size(); ++i)
    slots[traj.components[i]] = i;

  std::vector<MonitorSeries> out;
  for (const auto& [name, expr] : quantities) {
    CompiledExpr c(simplify(substitute(expr, param_subst)), slots);
    MonitorSeries series;
    series.name = name;
    series.values.reserve(traj.size());
    for (const auto& sample : traj.samples) series.values.push_back(c(sample.data()));
    for (double v : series.values)
      series.drift = std::max(series.drift, std::abs(v - series.values.front()));
    out.push_back(std::move(series));
  }
  return out;
}

namespace {

double interpolate(const Trajectory& traj, std::size_t column, double t) {
  const auto& ts = traj.times;
  auto it = std::lower_bound(ts.begin(), ts.end(), t);
  if (it == ts.begin()) return traj.samples.front()[column];
  if (it == ts.end()) return traj.samples.back()[column];
  std::size_t hi = static_cast<std::size_t>(it - ts.begin());
  std::size_t lo = hi - 1;
  double w = (t - ts[lo]) / (ts[hi] - ts[lo]);
  return (1 - w) * traj.samples[lo][column] + w * traj.samples[hi][column];
}

}  // namespace

std::vector<Deviation> compare(
    const Trajectory& a, const Trajectory& b,
    const std::vector<std::pair<std::string, std::string>>& pairs) {
  if (a.times.empty() || b.times.empty())
    throw std::invalid_argument("cannot compare an empty trajectory");
  double lo = std::max(a.times.front(), b.times.front());
  double hi = std::min(a.times.back(), b.times.back());
  if (lo > hi) throw std::invalid_argument("trajectories cover disjoint time ranges");

  std::vector<Deviation> out;
  for (const auto& [an, bn] : pairs) {
    std::size_t ai = a.index_of(an);
    std::size_t bi = b.index_of(bn);
    Deviation dev{an, bn, 0.0};
    for (std::size_t k = 0; k < a.size(); ++k) {
      double t = a.times[k];
      if (t < lo || t > hi) continue;
      double va = a.samples[k][ai];
      double vb = interpolate(b, bi, t);
      dev.max_abs = std::max(dev.max_abs, std::abs(va - vb));
    }
    out.push_back(dev);
  }
  return out;
}

namespace {

void append_double(std::string& line, double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                               std::chars_format::general, 17);
  (void)ec;
  line.append(buf, p);
}

}  // namespace

void write_csv(const Trajectory& traj, std::ostream& out) {
  std::string line = "t";
  for (const auto& name : traj.components) {
    line += ',';
    line += name;
  }
  line += '\n';
  out << line;
  for (std::size_t k = 0; k < traj.size(); ++k) {
    line.clear();
    append_double(line, traj.times[k]);
    for (double v : traj.samples[k]) {
      line += ',';
      append_double(line, v);
    }
    line += '\n';
    out << line;
  }
}

std::vector<double> cumulative_integral(const std::vector<double>& values,
                                        double dt, double initial,
                                        Quadrature method) {
  std::vector<double> out(values.size());
  if (values.empty()) return out;
  out[0] = initial;
  if (method == Quadrature::Trapezoid || values.size() < 3) {
    for (std::size_t k = 1; k < values.size(); ++k)
      out[k] = out[k - 1] + 0.5 * dt * (values[k - 1] + values[k]);
    return out;
  }
  // Cumulative Simpson: each point integrates the quadratic through the
  // enclosing three samples; exact for polynomial integrands of degree <= 2.
  out[1] = out[0] + dt / 12.0 * (5.0 * values[0] + 8.0 * values[1] - values[2]);
  for (std::size_t k = 2; k < values.size(); ++k)
    out[k] = out[k - 2] +
             dt / 3.0 * (values[k - 2] + 4.0 * values[k - 1] + values[k]);
  return out;
}

}  // namespace routh
