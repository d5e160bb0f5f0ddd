#pragma once

#include <optional>
#include <string>
#include <vector>

#include "routh/expr.hpp"
#include "routh/geometry.hpp"
#include "routh/mechanics.hpp"

namespace routh {

/// Problem with a system definition file (I/O, syntax, or a failed
/// invariant). `line` is 1-based; 0 when no location applies.
class DefinitionError : public std::runtime_error {
 public:
  DefinitionError(std::string message, std::size_t line = 0)
      : std::runtime_error(line ? "line " + std::to_string(line) + ": " + message
                                : std::move(message)),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

struct SimulateBlock {
  Binding initial;  // coordinates and velocities
  double t0 = 0.0;
  double t1 = 0.0;
  double dt = 0.0;
};

struct ReduceBlock {
  std::optional<double> alpha;
  std::optional<std::string> branch;        // "+" or "-"
  std::optional<std::string> gauge;         // expression over reduced coords
  std::optional<std::pair<double, double>> bracket;
};

/// Parsed system definition: TOML tables [system], [params], [simulate],
/// [reduce] with the keys documented in the README.
struct SystemFile {
  std::vector<std::string> coordinates;
  std::optional<std::string> cyclic;
  std::string lagrangian_text;
  Binding params;
  std::optional<SimulateBlock> simulate;
  std::optional<ReduceBlock> reduce;

  /// Builds the LagrangianSystem, re-validating every invariant.
  LagrangianSystem system() const;
  Chart chart() const;
};

SystemFile load_system_file(const std::string& path);
SystemFile parse_system_file(const std::string& contents,
                             const std::string& origin = "<string>");

}  // namespace routh
