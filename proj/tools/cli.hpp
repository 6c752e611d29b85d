#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace memguard::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs one command. `args` excludes the program name. Returns the exit code;
/// messages for humans go to `err`, requested values to `out`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace memguard::cli
