#pragma once

#include <iosfwd>

namespace egw::cli {

/// Exit codes of the command-line tool.
enum ExitCode : int { kOk = 0, kSolverFailure = 1, kInputError = 2 };

/// Parses the arguments of the `egw` tool (argv[0] is the program name), runs the
/// subcommand and returns its exit code. Summaries go to `out`, diagnostics to `err`.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace egw::cli
