#include "routh/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <stdexcept>

namespace routh {

std::string velocity_name(const std::string& coord) { return "d" + coord; }
std::string momentum_name(const std::string& coord) { return "p_" + coord; }
std::string acceleration_name(const std::string& coord) { return "dd" + coord; }

Chart::Chart(std::vector<std::string> coords_in, std::optional<std::string> cyclic_in)
    : coords(std::move(coords_in)), cyclic(std::move(cyclic_in)) {
  if (coords.empty()) throw std::invalid_argument("chart needs at least one coordinate");
  std::set<std::string> seen(coords.begin(), coords.end());
  if (seen.size() != coords.size())
    throw std::invalid_argument("chart coordinates must be unique");
  if (cyclic && !seen.count(*cyclic))
    throw std::invalid_argument("cyclic coordinate '" + *cyclic +
                                "' is not in the chart");
}

std::size_t Chart::index_of(const std::string& coord) const {
  auto it = std::find(coords.begin(), coords.end(), coord);
  if (it == coords.end())
    throw std::invalid_argument("no coordinate '" + coord + "' in chart");
  return static_cast<std::size_t>(it - coords.begin());
}

std::vector<std::string> Chart::velocities() const {
  std::vector<std::string> out;
  out.reserve(coords.size());
  for (const auto& c : coords) out.push_back(velocity_name(c));
  return out;
}

std::vector<std::string> Chart::momenta() const {
  std::vector<std::string> out;
  out.reserve(coords.size());
  for (const auto& c : coords) out.push_back(momentum_name(c));
  return out;
}

Chart Chart::reduced() const {
  if (!cyclic) throw std::invalid_argument("chart has no cyclic coordinate");
  std::vector<std::string> rest;
  for (const auto& c : coords)
    if (c != *cyclic) rest.push_back(c);
  if (rest.empty())
    throw std::invalid_argument("reduction would leave an empty chart");
  return Chart(std::move(rest));
}

namespace {

void check_components(const VectorField& f) {
  std::size_t n = f.chart.dimension();
  std::size_t expected = f.bundle == Bundle::Base ? n : 2 * n;
  if (f.components.size() != expected)
    throw std::invalid_argument("vector field needs " + std::to_string(expected) +
                                " components, got " +
                                std::to_string(f.components.size()));
  std::set<std::string> allowed(f.chart.coords.begin(), f.chart.coords.end());
  if (f.bundle == Bundle::Tangent)
    for (const auto& v : f.chart.velocities()) allowed.insert(v);
  if (f.bundle == Bundle::Cotangent)
    for (const auto& m : f.chart.momenta()) allowed.insert(m);
  for (const auto& c : f.components)
    for (const auto& v : free_variables(c))
      if (!allowed.count(v))
        throw std::invalid_argument("component variable '" + v +
                                    "' is not a coordinate of the tagged bundle");
}

}  // namespace

VectorField::VectorField(Chart chart_in, Bundle bundle_in,
                         std::vector<Expr> components_in)
    : chart(std::move(chart_in)), bundle(bundle_in),
      components(std::move(components_in)) {
  check_components(*this);
}

VectorField VectorField::coordinate_field(const Chart& chart,
                                          const std::string& coord) {
  std::size_t idx = chart.index_of(coord);
  std::vector<Expr> comps(chart.dimension(), Expr::constant(0.0));
  comps[idx] = Expr::constant(1.0);
  return VectorField(chart, Bundle::Base, std::move(comps));
}

VectorField VectorField::zero(const Chart& chart) {
  return VectorField(chart, Bundle::Base,
                     std::vector<Expr>(chart.dimension(), Expr::constant(0.0)));
}

std::vector<double> VectorField::values_at(const Binding& point) const {
  std::vector<double> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(eval(c, point));
  return out;
}

VectorField complete_lift(const VectorField& x) {
  if (x.bundle != Bundle::Base)
    throw std::invalid_argument("complete_lift expects a base field");
  const std::size_t n = x.chart.dimension();
  std::vector<Expr> comps;
  comps.reserve(2 * n);
  for (const auto& c : x.components) comps.push_back(c);
  for (std::size_t j = 0; j < n; ++j) {
    Expr sum = Expr::constant(0.0);
    for (std::size_t k = 0; k < n; ++k) {
      Expr dj = diff(x.components[j], x.chart.coords[k]);
      sum = sum + dj * Expr::variable(velocity_name(x.chart.coords[k]));
    }
    comps.push_back(simplify(sum));
  }
  return VectorField(x.chart, Bundle::Tangent, std::move(comps));
}

Expr momentum_function(const VectorField& x) {
  if (x.bundle != Bundle::Base)
    throw std::invalid_argument("momentum_function expects a base field");
  Expr sum = Expr::constant(0.0);
  for (std::size_t i = 0; i < x.chart.dimension(); ++i)
    sum = sum + Expr::variable(momentum_name(x.chart.coords[i])) * x.components[i];
  return simplify(sum);
}

VectorField hamiltonian_field(const Expr& h, const Chart& chart) {
  const std::size_t n = chart.dimension();
  std::vector<Expr> comps;
  comps.reserve(2 * n);
  for (std::size_t i = 0; i < n; ++i)
    comps.push_back(diff(h, momentum_name(chart.coords[i])));
  for (std::size_t i = 0; i < n; ++i)
    comps.push_back(simplify(-diff(h, chart.coords[i])));
  return VectorField(chart, Bundle::Cotangent, std::move(comps));
}

VectorField cotangent_lift(const VectorField& x) {
  if (x.bundle != Bundle::Base)
    throw std::invalid_argument("cotangent_lift expects a base field");
  return hamiltonian_field(momentum_function(x), x.chart);
}

namespace {

std::size_t quarter(const std::vector<double>& v, const char* who) {
  if (v.empty() || v.size() % 4 != 0)
    throw std::invalid_argument(std::string(who) + " expects a 4n-tuple");
  return v.size() / 4;
}

}  // namespace

std::vector<double> flip_kappa(const std::vector<double>& w) {
  std::size_t n = quarter(w, "flip_kappa");
  std::vector<double> out(w);
  for (std::size_t i = 0; i < n; ++i) std::swap(out[n + i], out[2 * n + i]);
  return out;
}

std::vector<double> beta_map(const std::vector<double>& v) {
  std::size_t n = quarter(v, "beta_map");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = v[i];                      // q
    out[n + i] = v[n + i];              // p
    out[2 * n + i] = v[3 * n + i];      // xi = pdot
    out[3 * n + i] = -v[2 * n + i];     // y = -qdot
  }
  return out;
}

std::vector<double> alpha_map(const std::vector<double>& v) {
  std::size_t n = quarter(v, "alpha_map");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = v[i];                      // q
    out[n + i] = v[2 * n + i];          // qdot
    out[2 * n + i] = v[3 * n + i];      // phi = pdot
    out[3 * n + i] = v[n + i];          // psi = p
  }
  return out;
}

std::vector<double> alpha_map_inverse(const std::vector<double>& v) {
  std::size_t n = quarter(v, "alpha_map_inverse");
  std::vector<double> out(v.size());
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = v[i];
    out[n + i] = v[3 * n + i];          // p = psi
    out[2 * n + i] = v[n + i];          // qdot
    out[3 * n + i] = v[2 * n + i];      // pdot = phi
  }
  return out;
}

double tangent_pairing(const std::vector<double>& w, const std::vector<double>& u) {
  std::size_t n = quarter(w, "tangent_pairing");
  if (u.size() != w.size())
    throw std::invalid_argument("tangent_pairing arguments differ in dimension");
  for (std::size_t i = 0; i < n; ++i) {
    if (std::abs(w[i] - u[i]) > 1e-12 ||
        std::abs(w[2 * n + i] - u[2 * n + i]) > 1e-12)
      throw std::invalid_argument(
          "tangent_pairing: arguments do not cover the same curve "
          "(mismatched (q, qdot) blocks)");
  }
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    sum += w[3 * n + i] * u[n + i] + w[n + i] * u[3 * n + i];
  return sum;
}

std::vector<double> tangent_map_of_field(const VectorField& x,
                                         const std::vector<double>& q,
                                         const std::vector<double>& v) {
  if (x.bundle != Bundle::Base)
    throw std::invalid_argument("tangent_map_of_field expects a base field");
  const std::size_t n = x.chart.dimension();
  if (q.size() != n || v.size() != n)
    throw std::invalid_argument("point/vector dimension mismatch");
  Binding at;
  for (std::size_t i = 0; i < n; ++i) at[x.chart.coords[i]] = q[i];
  std::vector<double> out(4 * n);
  for (std::size_t i = 0; i < n; ++i) {
    out[i] = q[i];
    out[n + i] = eval(x.components[i], at);
    out[2 * n + i] = v[i];
  }
  for (std::size_t j = 0; j < n; ++j) {
    double acc = 0.0;
    for (std::size_t k = 0; k < n; ++k)
      acc += eval(diff(x.components[j], x.chart.coords[k]), at) * v[k];
    out[3 * n + j] = acc;
  }
  return out;
}

double tangent_omega_pairing(const std::vector<double>& a,
                             const std::vector<double>& b) {
  std::size_t n = quarter(a, "tangent_omega_pairing");
  if (b.size() != a.size())
    throw std::invalid_argument("tangent_omega_pairing arguments differ in dimension");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += a[n + i] * b[2 * n + i] - b[n + i] * a[2 * n + i];    // dp ^ dqdot
    sum += a[3 * n + i] * b[i] - b[3 * n + i] * a[i];            // dpdot ^ dq
  }
  return sum;
}

double cotangent_omega_pairing(const std::vector<double>& a,
                               const std::vector<double>& b) {
  std::size_t n = quarter(a, "cotangent_omega_pairing");
  if (b.size() != a.size())
    throw std::invalid_argument("cotangent_omega_pairing arguments differ in dimension");
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum += a[2 * n + i] * b[i] - b[2 * n + i] * a[i];            // dxi ^ dq
    sum += a[3 * n + i] * b[n + i] - b[3 * n + i] * a[n + i];    // dy ^ dp
  }
  return sum;
}

}  // namespace routh
