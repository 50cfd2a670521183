#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace betanlft {

/// Process exit codes of the command-line front end.
enum ExitCode : int {
    kExitOk = 0,
    kExitUsage = 1,
    kExitData = 2,
    kExitDivergence = 3,
};

/// Runs one CLI invocation. args excludes the program name.
/// Subcommands: synth, split, train, adapt, predict, eval.
int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace betanlft
