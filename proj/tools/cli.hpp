#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace pathlearn::cli {

// Exit codes.
inline constexpr int kOk = 0;
inline constexpr int kVerifyFailed = 1;
inline constexpr int kConfigError = 2;

/// Runs the command line; output goes to `out`, diagnostics to `err`.
int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace pathlearn::cli
