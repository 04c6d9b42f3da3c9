#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace cfaudit::cli {

/// Exit codes: 0 success, 1 runtime failure or missing artifact, 2 usage error.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by main() and the tests. `args` excludes the program name.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cfaudit::cli
