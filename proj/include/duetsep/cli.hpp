#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace duetsep::cli {

/// Exit codes: 0 success, 1 runtime failure, 2 usage or invalid argument.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one subcommand. `args` excludes the program name. Machine output goes
/// to `out`; logs, usage text and the one-line "error: ..." go to `err`.
int dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

int dispatch(int argc, char** argv);

}  // namespace duetsep::cli
