#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace cagen::cli {

/// Exit codes.
inline constexpr int kExitPass = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Runs the command line `args` (args[0] is the program name).
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

/// Formats a double with 17 significant digits.
std::string format_double(double value);

}  // namespace cagen::cli
