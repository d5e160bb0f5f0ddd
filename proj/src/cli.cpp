#include "routh/cli.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "routh/dynamics.hpp"
#include "routh/expr.hpp"
#include "routh/geometry.hpp"
#include "routh/mechanics.hpp"
#include "routh/reduction.hpp"
#include "routh/system_file.hpp"

namespace routh::cli {

namespace {

std::string fmt(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v,
                               std::chars_format::general, 17);
  (void)ec;
  return std::string(buf, p);
}

Branch parse_branch(const std::string& text) {
  if (text == "+") return Branch::Plus;
  if (text == "-") return Branch::Minus;
  throw DefinitionError("branch must be '+' or '-'");
}

MomentumLevel level_from(const SystemFile& file, std::optional<double> alpha_flag) {
  if (!file.cyclic)
    throw DefinitionError("[system] cyclic is required for reduction");
  std::optional<double> alpha = alpha_flag;
  if (!alpha && file.reduce) alpha = file.reduce->alpha;
  if (!alpha)
    throw DefinitionError("no momentum level: pass --alpha or set [reduce] alpha");
  return MomentumLevel{*alpha, *file.cyclic};
}

GaugeRecord gauge_from(const SystemFile& file, const std::string& gauge_flag) {
  GaugeRecord gauge;
  if (!gauge_flag.empty())
    gauge.reference = parse(gauge_flag);
  else if (file.reduce && file.reduce->gauge)
    gauge.reference = parse(*file.reduce->gauge);
  return gauge;
}

std::optional<Branch> branch_from(const SystemFile& file,
                                  const std::string& branch_flag) {
  if (!branch_flag.empty()) return parse_branch(branch_flag);
  if (file.reduce && file.reduce->branch) return parse_branch(*file.reduce->branch);
  return std::nullopt;
}

/// Reports render the cyclic momentum as "s", matching the straightened-chart
/// coordinates (y, x^i, s, p_j).
std::string report_render(const Expr& e, const std::optional<std::string>& cyclic) {
  if (!cyclic) return render(e);
  return render(substitute(e, {{momentum_name(*cyclic), Expr::variable("s")}}));
}

void print_reduced(const ReducedSystem& red, std::ostream& out) {
  out << "momentum level: s = " << fmt(red.level.alpha) << " (cyclic '"
      << red.level.cyclic << "')\n";
  if (red.kind == ReducedSystem::Kind::Regular) {
    out << "routhian: R = " << render(red.routhian) << "\n";
    out << "cyclic velocity: " << velocity_name(red.level.cyclic) << " = "
        << render(red.cyclic_velocity) << "\n";
    LagrangianSystem reduced_sys(red.reduced_chart, red.routhian,
                                 red.bound_params());
    EulerLagrangeSystem el(reduced_sys);
    if (!el.symbolic_accelerations().empty()) {
      out << "reduced equations:\n";
      for (std::size_t i = 0; i < red.reduced_chart.dimension(); ++i)
        out << "  " << acceleration_name(red.reduced_chart.coords[i]) << " = "
            << render(el.symbolic_accelerations()[i]) << "\n";
    } else {
      out << "reduced equations (residual form):\n";
      for (std::size_t i = 0; i < red.reduced_chart.dimension(); ++i)
        out << "  0 = " << render(el.residuals()[i]) << "\n";
    }
    if (!red.gauge.reference.is_zero())
      out << "gauge reference: " << render(red.gauge.reference) << "\n";
    return;
  }
  bool tautological = !depends_on(red.family, velocity_name(red.level.cyclic)) &&
                      simplify(red.constraint).is_zero();
  if (tautological) {
    out << "constraint holds identically; cyclic velocity is undetermined\n";
    out << "routhian: R = " << render(simplify(red.family)) << "\n";
    return;
  }
  out << "degenerate reduction: cyclic velocity "
      << velocity_name(red.level.cyclic) << " stays a family parameter\n";
  out << "routhian family: " << render(red.family) << "\n";
  out << "constraint: " << render(red.constraint) << " = 0\n";
  if (red.reduced_hamiltonian) {
    out << "reduced hamiltonian: h = " << render(*red.reduced_hamiltonian) << "\n";
    StateField field = reduced_dynamics(red);
    out << "reduced field:\n";
    for (std::size_t i = 0; i < field.state.size(); ++i)
      out << "  d" << field.state[i] << "/dt = " << render(field.components[i])
          << "\n";
    out << "cyclic velocity on trajectories: "
        << velocity_name(red.level.cyclic) << " = "
        << render(red.cyclic_velocity) << "\n";
  }
}

nlohmann::json reduced_to_json(const ReducedSystem& red) {
  nlohmann::json j;
  j["kind"] = red.kind == ReducedSystem::Kind::Regular ? "regular" : "degenerate";
  j["alpha"] = red.level.alpha;
  j["cyclic"] = red.level.cyclic;
  j["reduced_coordinates"] = red.reduced_chart.coords;
  if (red.kind == ReducedSystem::Kind::Regular) {
    j["routhian"] = render(red.routhian);
    j["cyclic_velocity"] = render(red.cyclic_velocity);
    j["gauge_reference"] = render(red.gauge.reference);
  } else {
    j["family"] = render(red.family);
    j["constraint"] = render(red.constraint);
    if (red.reduced_hamiltonian) {
      j["reduced_hamiltonian"] = render(*red.reduced_hamiltonian);
      j["cyclic_velocity"] = render(red.cyclic_velocity);
    }
  }
  return j;
}

struct FullRun {
  Trajectory trajectory;
  double momentum_drift = 0.0;
  double energy_drift = 0.0;
  double initial_momentum = 0.0;
};

FullRun simulate_full(const SystemFile& file) {
  if (!file.simulate) throw DefinitionError("missing [simulate] block");
  LagrangianSystem sys = file.system();
  const auto& sim = *file.simulate;
  StateField field = euler_lagrange(sys).state_field();
  FullRun run;
  run.trajectory = integrate_rk4(field, sim.initial, sim.t0, sim.t1, sim.dt);
  if (run.trajectory.error)
    throw EvalError("full simulation aborted: " + *run.trajectory.error);

  std::vector<std::pair<std::string, Expr>> monitors;
  monitors.emplace_back("energy", energy(sys));
  if (file.cyclic) monitors.emplace_back("momentum", cyclic_momentum(sys));
  auto series = monitor(run.trajectory, monitors, sys.params);
  run.energy_drift = series[0].drift;
  if (series.size() > 1) {
    run.momentum_drift = series[1].drift;
    run.initial_momentum = series[1].values.front();
  }
  return run;
}

Binding reduced_initial_state(const ReducedSystem& red,
                              const LagrangianSystem& sys, const Binding& initial) {
  Binding state;
  if (red.kind == ReducedSystem::Kind::Regular) {
    for (const auto& x : red.reduced_chart.coords) {
      state[x] = initial.at(x);
      state[velocity_name(x)] = initial.at(velocity_name(x));
    }
    return state;
  }
  Binding point = sys.params;
  for (const auto& [k, v] : initial) point[k] = v;
  for (const auto& x : red.reduced_chart.coords) {
    state[x] = initial.at(x);
    state[momentum_name(x)] =
        eval(diff(sys.lagrangian, velocity_name(x)), point);
  }
  return state;
}

int cmd_validate(const std::string& path, std::ostream& out) {
  load_system_file(path);
  out << "ok\n";
  return kOk;
}

int cmd_symmetry(const std::string& path, std::ostream& out) {
  SystemFile file = load_system_file(path);
  if (!file.cyclic) throw DefinitionError("[system] cyclic is required");
  LagrangianSystem sys = file.system();
  auto report =
      check_symmetry(sys, VectorField::coordinate_field(sys.chart, *file.cyclic));
  if (report.symmetric()) {
    out << "symmetric";
    if (report.numeric_only()) out << " (numeric-only)";
    out << "\n";
    out << "conserved momentum: s = "
        << report_render(cyclic_momentum(sys), file.cyclic) << "\n";
    return kOk;
  }
  out << "violation: " << render(report.derivative) << "\n";
  return kSymmetryViolation;
}

int cmd_reduce(const std::string& path, std::optional<double> alpha_flag,
               const std::string& branch_flag, const std::string& gauge_flag,
               const std::string& json_path, std::ostream& out) {
  SystemFile file = load_system_file(path);
  LagrangianSystem sys = file.system();
  MomentumLevel level = level_from(file, alpha_flag);
  ReducedSystem red = routhian(sys, level, gauge_from(file, gauge_flag),
                               branch_from(file, branch_flag));
  print_reduced(red, out);
  if (!json_path.empty()) {
    std::ofstream js(json_path);
    if (!js) throw DefinitionError("cannot write '" + json_path + "'");
    js << reduced_to_json(red).dump(2) << "\n";
  }
  return kOk;
}

int cmd_simulate(const std::string& path, const std::string& which,
                 const std::string& out_path, std::optional<double> alpha_flag,
                 const std::string& branch_flag, std::ostream& out,
                 std::ostream& err) {
  SystemFile file = load_system_file(path);
  if (!file.simulate) throw DefinitionError("missing [simulate] block");
  const auto& sim = *file.simulate;

  Trajectory traj;
  std::ostringstream summary;
  if (which == "full") {
    FullRun run = simulate_full(file);
    traj = std::move(run.trajectory);
    summary << "energy drift: " << fmt(run.energy_drift) << "\n";
    if (file.cyclic) summary << "momentum drift: " << fmt(run.momentum_drift) << "\n";
  } else if (which == "reduced") {
    LagrangianSystem sys = file.system();
    std::optional<double> alpha = alpha_flag;
    if (!alpha && file.reduce && file.reduce->alpha) alpha = file.reduce->alpha;
    if (!alpha) {
      Binding point = sys.params;
      for (const auto& [k, v] : sim.initial) point[k] = v;
      alpha = eval(cyclic_momentum(sys), point);
      err << "note: alpha inferred from initial data: " << fmt(*alpha) << "\n";
    }
    if (!file.cyclic) throw DefinitionError("[system] cyclic is required");
    ReducedSystem red = routhian(sys, MomentumLevel{*alpha, *file.cyclic},
                                 gauge_from(file, ""), branch_from(file, branch_flag));
    StateField field = reduced_dynamics(red);
    Binding state0 = reduced_initial_state(red, sys, sim.initial);
    traj = integrate_rk4(field, state0, sim.t0, sim.t1, sim.dt);
    if (traj.error) throw EvalError("reduced simulation aborted: " + *traj.error);
    std::vector<std::pair<std::string, Expr>> monitors;
    if (red.kind == ReducedSystem::Kind::Regular) {
      LagrangianSystem reduced_sys(red.reduced_chart, red.routhian,
                                   red.bound_params());
      monitors.emplace_back("reduced energy", energy(reduced_sys));
    } else {
      monitors.emplace_back("reduced hamiltonian", *red.reduced_hamiltonian);
    }
    auto series = monitor(traj, monitors, red.bound_params());
    summary << series[0].name << " drift: " << fmt(series[0].drift) << "\n";
  } else {
    throw DefinitionError("--which must be 'full' or 'reduced'");
  }

  if (out_path.empty()) {
    write_csv(traj, out);
    err << summary.str();
  } else {
    std::ofstream file_out(out_path);
    if (!file_out) throw DefinitionError("cannot write '" + out_path + "'");
    write_csv(traj, file_out);
    out << summary.str();
  }
  return kOk;
}

int cmd_compare(const std::string& path, std::optional<double> alpha_flag,
                double tol, const std::string& out_path,
                const std::string& quadrature, const std::string& branch_flag,
                std::ostream& out, std::ostream& err) {
  SystemFile file = load_system_file(path);
  if (!file.cyclic) throw DefinitionError("[system] cyclic is required");
  if (!file.simulate) throw DefinitionError("missing [simulate] block");
  const auto& sim = *file.simulate;
  LagrangianSystem sys = file.system();

  Quadrature method;
  if (quadrature == "simpson")
    method = Quadrature::Simpson;
  else if (quadrature == "trapezoid")
    method = Quadrature::Trapezoid;
  else
    throw DefinitionError("--quadrature must be 'simpson' or 'trapezoid'");

  FullRun full = simulate_full(file);

  double alpha_data = full.initial_momentum;
  std::optional<double> alpha_explicit = alpha_flag;
  if (!alpha_explicit && file.reduce && file.reduce->alpha)
    alpha_explicit = file.reduce->alpha;
  double alpha = alpha_explicit ? *alpha_explicit : alpha_data;
  if (alpha_explicit && std::abs(*alpha_explicit - alpha_data) > 1e-10)
    err << "warning: explicit alpha " << fmt(*alpha_explicit)
        << " is inconsistent with the initial data (iota_X = " << fmt(alpha_data)
        << "); using the explicit value\n";

  ReducedSystem red = routhian(sys, MomentumLevel{alpha, *file.cyclic},
                               GaugeRecord{}, branch_from(file, branch_flag));
  StateField field = reduced_dynamics(red);
  Binding state0 = reduced_initial_state(red, sys, sim.initial);
  Trajectory reduced = integrate_rk4(field, state0, sim.t0, sim.t1, sim.dt);
  if (reduced.error) throw EvalError("reduced simulation aborted: " + *reduced.error);

  auto recon = reconstruct_cyclic(red, reduced, sim.initial.at(*file.cyclic), method);
  if (!recon.flagged.empty())
    err << "warning: momentum constraint violated beyond 1e-6 at "
        << recon.flagged.size() << " samples\n";

  // Derived full-side momentum columns are needed for degenerate reductions.
  Trajectory full_aug = full.trajectory;
  if (red.kind == ReducedSystem::Kind::Degenerate) {
    std::vector<std::pair<std::string, Expr>> momenta;
    for (const auto& x : red.reduced_chart.coords)
      momenta.emplace_back(momentum_name(x),
                           diff(sys.lagrangian, velocity_name(x)));
    for (auto& series : monitor(full.trajectory, momenta, sys.params)) {
      full_aug.components.push_back(series.name);
      for (std::size_t k = 0; k < full_aug.size(); ++k)
        full_aug.samples[k].push_back(series.values[k]);
    }
  }

  std::vector<std::pair<std::string, std::string>> pairs;
  for (const auto& x : red.reduced_chart.coords) {
    pairs.emplace_back(x, x);
    if (red.kind == ReducedSystem::Kind::Regular)
      pairs.emplace_back(velocity_name(x), velocity_name(x));
    else
      pairs.emplace_back(momentum_name(x), momentum_name(x));
  }
  auto deviations = compare(full_aug, reduced, pairs);
  {
    auto cyclic_dev = compare(full_aug, recon.trajectory,
                              {{*file.cyclic, *file.cyclic},
                               {velocity_name(*file.cyclic),
                                velocity_name(*file.cyclic)}});
    deviations.insert(deviations.end(), cyclic_dev.begin(), cyclic_dev.end());
  }

  bool ok = true;
  for (const auto& d : deviations) {
    out << "deviation " << d.a_component << ": " << fmt(d.max_abs) << "\n";
    ok = ok && d.max_abs <= tol;
  }
  out << "momentum drift (full): " << fmt(full.momentum_drift) << "\n";
  out << "energy drift (full): " << fmt(full.energy_drift) << "\n";

  if (!out_path.empty()) {
    Trajectory joined = full_aug;
    for (std::size_t c = 0; c < reduced.components.size(); ++c) {
      joined.components.push_back("red_" + reduced.components[c]);
      for (std::size_t k = 0; k < joined.size(); ++k)
        joined.samples[k].push_back(reduced.samples[k][c]);
    }
    for (std::size_t c = 0; c < recon.trajectory.components.size(); ++c) {
      joined.components.push_back("rec_" + recon.trajectory.components[c]);
      for (std::size_t k = 0; k < joined.size(); ++k)
        joined.samples[k].push_back(recon.trajectory.samples[k][c]);
    }
    std::ofstream file_out(out_path);
    if (!file_out) throw DefinitionError("cannot write '" + out_path + "'");
    write_csv(joined, file_out);
  }

  out << (ok ? "PASS" : "FAIL") << " (tolerance " << fmt(tol) << ")\n";
  return ok ? kOk : kComparisonFailure;
}

std::vector<Binding> load_samples(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DefinitionError("cannot open samples file '" + path + "'");
  std::string header;
  if (!std::getline(in, header))
    throw DefinitionError("samples file is empty");
  std::vector<std::string> names;
  std::stringstream hs(header);
  std::string cell;
  while (std::getline(hs, cell, ',')) names.push_back(cell);
  std::vector<Binding> samples;
  std::string line;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::stringstream ls(line);
    Binding b;
    for (const auto& name : names) {
      if (!std::getline(ls, cell, ','))
        throw DefinitionError("samples row is short", line_no);
      b[name] = std::strtod(cell.c_str(), nullptr);
    }
    samples.push_back(std::move(b));
  }
  if (samples.empty()) throw DefinitionError("samples file has no rows");
  return samples;
}

int cmd_jacobi(const std::string& path, double energy_value,
               const std::string& sign, const std::string& samples_path,
               std::optional<std::pair<double, double>> bracket_flag,
               std::ostream& out, std::ostream& err) {
  SystemFile file = load_system_file(path);
  LagrangianSystem sys = file.system();
  Branch branch = parse_branch(sign.empty() ? "+" : sign);

  std::vector<Binding> samples;
  if (!samples_path.empty()) {
    samples = load_samples(samples_path);
  } else if (file.simulate) {
    samples.push_back(file.simulate->initial);
  } else {
    throw DefinitionError(
        "no sample points: pass --samples or provide a [simulate] block");
  }

  std::optional<std::pair<double, double>> bracket = bracket_flag;
  if (!bracket && file.reduce && file.reduce->bracket)
    bracket = file.reduce->bracket;

  std::optional<ReducedSystem> closed;
  try {
    closed = jacobi_reduce(sys, energy_value, branch);
  } catch (const UnsupportedReductionError&) {
    if (!bracket)
      throw DefinitionError(
          "Lagrangian is not of mechanical form; the numeric path needs "
          "--bracket lo hi");
  }
  if (closed) {
    out << "jacobi lagrangian: L_J = " << render(closed->routhian) << "\n";
    out << "stationary velocity: ds = " << render(closed->cyclic_velocity) << "\n";
  }
  if (!bracket) bracket = std::make_pair(1e-3, 1e3);

  bool domain_failure = false;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& sample = samples[i];
    out << "sample " << i << ":";
    try {
      JacobiSample numeric =
          jacobi_value_numeric(sys, energy_value, branch, sample, *bracket);
      out << " L_J = " << fmt(numeric.value) << ", ds = " << fmt(numeric.s_dot);
      if (closed) {
        Binding b = sys.params;
        for (const auto& [k, v] : sample) b[k] = v;
        double exact = eval(closed->routhian, b);
        double rel = std::abs(numeric.value - exact) /
                     std::max(1.0, std::abs(exact));
        out << ", closed form = " << fmt(exact) << ", rel dev = " << fmt(rel);
      }
      out << "\n";
    } catch (const EvalError& e) {
      domain_failure = true;
      out << " FLAGGED (" << e.what() << ")\n";
    } catch (const RootFindingError& e) {
      domain_failure = true;
      out << " FLAGGED (" << e.what() << ")\n";
    }
  }
  if (domain_failure) {
    err << "one or more samples lie outside the E > V region\n";
    return kDomainError;
  }
  return kOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Routh reduction of Lagrangian systems with a cyclic coordinate"};
  app.require_subcommand(1);

  std::string path, which = "full", out_path, gauge_flag, branch_flag;
  std::string quadrature = "simpson", sign = "+", samples_path, json_path;
  std::optional<double> alpha_flag;
  double tol = 1e-6, energy_value = 0.0;
  std::vector<double> bracket_values;

  auto* validate = app.add_subcommand("validate", "parse and check a system file");
  validate->add_option("path", path)->required();

  auto* symmetry = app.add_subcommand("symmetry", "test d_T X (L) = 0");
  symmetry->add_option("path", path)->required();

  auto* reduce = app.add_subcommand("reduce", "perform Routh reduction");
  reduce->add_option("path", path)->required();
  reduce->add_option("--alpha", alpha_flag, "momentum level");
  reduce->add_option("--branch", branch_flag, "+ or - for quadratic constraints");
  reduce->add_option("--gauge", gauge_flag, "reference-section expression f(x)");
  reduce->add_option("--json", json_path, "write a machine-readable dump");

  auto* simulate = app.add_subcommand("simulate", "integrate full or reduced dynamics");
  simulate->add_option("path", path)->required();
  simulate->add_option("--which", which, "full|reduced")->required();
  simulate->add_option("--out", out_path, "CSV output path (default: stdout)");
  simulate->add_option("--alpha", alpha_flag, "momentum level (reduced runs)");
  simulate->add_option("--branch", branch_flag, "+ or -");

  auto* compare_cmd = app.add_subcommand(
      "compare", "full simulation vs reduction + reconstruction");
  compare_cmd->add_option("path", path)->required();
  compare_cmd->add_option("--alpha", alpha_flag, "momentum level override");
  compare_cmd->add_option("--tol", tol, "acceptance tolerance (default 1e-6)");
  compare_cmd->add_option("--out", out_path, "write aligned series as CSV");
  compare_cmd->add_option("--quadrature", quadrature,
                          "simpson|trapezoid (default simpson)");
  compare_cmd->add_option("--branch", branch_flag, "+ or -");

  auto* jacobi = app.add_subcommand("jacobi", "Jacobi principle via homogenization");
  jacobi->add_option("path", path)->required();
  jacobi->add_option("--energy", energy_value, "energy level E")->required();
  jacobi->add_option("--sign", sign, "+ or - (trajectory orientation)");
  jacobi->add_option("--samples", samples_path, "CSV of evaluation points");
  jacobi->add_option("--bracket", bracket_values, "root bracket lo hi")
      ->expected(2);

  std::vector<std::string> argv_rev(args.rbegin(), args.rend());
  try {
    app.parse(argv_rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kDefinitionError;
  }

  try {
    if (validate->parsed()) return cmd_validate(path, out);
    if (symmetry->parsed()) return cmd_symmetry(path, out);
    if (reduce->parsed())
      return cmd_reduce(path, alpha_flag, branch_flag, gauge_flag, json_path, out);
    if (simulate->parsed())
      return cmd_simulate(path, which, out_path, alpha_flag, branch_flag, out, err);
    if (compare_cmd->parsed())
      return cmd_compare(path, alpha_flag, tol, out_path, quadrature, branch_flag,
                         out, err);
    if (jacobi->parsed()) {
      std::optional<std::pair<double, double>> bracket;
      if (!bracket_values.empty())
        bracket = std::make_pair(bracket_values[0], bracket_values[1]);
      return cmd_jacobi(path, energy_value, sign, samples_path, bracket, out, err);
    }
  } catch (const DefinitionError& e) {
    err << "definition error: " << e.what() << "\n";
    return kDefinitionError;
  } catch (const ParseError& e) {
    err << "definition error: " << e.what() << "\n";
    return kDefinitionError;
  } catch (const SymmetryViolationError& e) {
    err << "symmetry violation: " << e.what() << "\n";
    return kSymmetryViolation;
  } catch (const EmptyConstraintSetError& e) {
    err << "empty constraint set: " << e.what() << "\n";
    return kEmptyConstraintSet;
  } catch (const BranchAmbiguityError& e) {
    err << "unsupported reduction: " << e.what() << "\n";
    return kUnsupportedReduction;
  } catch (const UnsupportedReductionError& e) {
    err << "unsupported reduction: " << e.what() << "\n";
    return kUnsupportedReduction;
  } catch (const SingularHessianError& e) {
    err << "domain error: " << e.what() << "\n";
    return kDomainError;
  } catch (const RootFindingError& e) {
    err << "domain error: " << e.what() << "\n";
    return kDomainError;
  } catch (const EvalError& e) {
    err << "domain error: " << e.what() << "\n";
    return kDomainError;
  } catch (const std::invalid_argument& e) {
    err << "definition error: " << e.what() << "\n";
    return kDefinitionError;
  }
  err << "no command\n";
  return kDefinitionError;
}

}  // namespace routh::cli
