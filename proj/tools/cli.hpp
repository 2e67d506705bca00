#pragma once

// Command-line front end. run_cli parses argv and dispatches to gen-data,
// train, eval or report. Returns the process exit code: 0 success, 2 usage
// or validation failure, 3 runtime failure.

#include <ostream>
#include <string>
#include <vector>

namespace cyin::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 2;
inline constexpr int kExitRuntime = 3;

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace cyin::cli
