#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace minimax::cli {

/// Exit codes: 0 success / all checks pass, 2 usage or config error, 3 a check failed.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitFailed = 3;

/// Runs the minimaxreg command line; args excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace minimax::cli
