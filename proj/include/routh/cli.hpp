#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace routh::cli {

/// Exit codes are a stable contract:
///   0 ok, 2 definition error, 3 symmetry violation, 4 empty constraint set,
///   5 unsupported degenerate reduction, 6 comparison failure, 7 domain error.
enum ExitCode {
  kOk = 0,
  kDefinitionError = 2,
  kSymmetryViolation = 3,
  kEmptyConstraintSet = 4,
  kUnsupportedReduction = 5,
  kComparisonFailure = 6,
  kDomainError = 7,
};

/// Runs one CLI command (args exclude the program name). All program output
/// goes to `out`, diagnostics to `err`; returns the exit code.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace routh::cli
