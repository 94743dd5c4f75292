#pragma once

// Command-line front end. run_cli is the whole program minus process setup,
// so tests can drive it in-process.
//
// Exit codes: 0 success, 1 runtime or numerical failure, 2 usage or
// validation error.

#include <iosfwd>
#include <string>
#include <vector>

namespace covevo::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// `args` excludes the program name.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace covevo::cli
