#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace treedtn::cli {

enum ExitCode : int { Success = 0, PreconditionFailure = 1, InvariantFailure = 2, ToleranceFailure = 3 };

/// Runs one subcommand; args excludes the program name. Results go to `out`
/// (or the --out file), diagnostics to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace treedtn::cli
