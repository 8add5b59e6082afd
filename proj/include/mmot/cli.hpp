#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

#include "mmot/error.hpp"
#include "mmot/harness.hpp"
#include "mmot/measure.hpp"

namespace mmot {

enum ExitCode : int {
  exit_ok = 0,
  exit_invalid_config = 2,
  exit_solver_error = 3,
  exit_verification_failed = 4,
};

/// Test seam: lets a build alter results between solving and checking.
struct CliHooks {
  std::function<void(ConvergenceTable&)> after_converge;
};

/// Inline density grammar:
///   atoms:<label>=x,y,z:w=<weight>;<label>=...
///   ball:center=x,y,z:radius=<r>
///   gaussian:center=x,y,z:sigma=<s>
///   file:<path>  (measure file; cells become atoms at their centers)
DensitySpec parse_density(std::string_view text, int dim);

/// Config errors map to 2, solver errors to 3.
int exit_code_for(ErrorKind kind);

/// args excludes the program name. Machine output goes to `out` (or --out),
/// human summaries and `mmot-error:` lines to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err,
        const CliHooks& hooks = {});

}  // namespace mmot
