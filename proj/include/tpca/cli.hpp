#pragma once

#include <iosfwd>

namespace tpca {

/// Exit codes of the command-line tool.
enum ExitCode : int {
  kExitOk = 0,
  kExitInputError = 2,
  kExitNumerical = 3,
  kExitInfeasible = 4,
  kExitNoAlarm = 5,
};

/// Entry point of the `tpca` tool. Output files default to stdout ("-");
/// errors are reported on `err` as one JSON line {"error": kind, "message": ...}.
int run_cli(int argc, char** argv, std::istream& in, std::ostream& out, std::ostream& err);

}  // namespace tpca
