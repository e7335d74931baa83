#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace flpflow {

/// Subcommands generate, solve, oracle, bench and check. `args` excludes the
/// program name. Returns 0 on success, 2 on usage errors (bad flags, invalid
/// configuration, unreadable or malformed input files) and 1 when a solver
/// error occurs or a check fails.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace flpflow
