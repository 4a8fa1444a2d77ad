#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace bevcal {

/// Exit codes of the command-line front end.
enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitData = 2 };

/// Runs one CLI invocation. `args` excludes the program name. Diagnostics go
/// to `err`, each prefixed with "error: ".
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int run_cli(int argc, char** argv);

}  // namespace bevcal
