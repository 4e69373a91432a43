#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace progstain {

enum ExitCode : int { kExitOk = 0, kExitUsage = 1, kExitFailure = 2 };

/// Entry point of the `progstain` tool. Machine-readable results go to
/// `out` as JSON (or JSON lines); human-readable progress and diagnostics
/// go to `err`. `argv[0]` is the program name.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

/// Convenience overload; `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace progstain
