#pragma once

// Self-contained invariant suite behind `pathlearn verify`. Every check
// builds its own random instances from the seed and compares the library
// against a direct recomputation.

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace pathlearn::checks {

enum class Level { quick, full };
Level parse_level(std::string_view s);  // throws ConfigError

struct CheckOptions {
    Level level = Level::quick;
    std::uint64_t seed = 1;
    /// Mutation hook: negate the A′ edge gains inside the additivity checks.
    /// Those checks must then fail.
    bool flip_gain_sign = false;
    /// Only run checks whose name contains this string (empty: all).
    std::string filter;
};

struct CheckResult {
    std::string name;
    bool passed = false;
    double seconds = 0;
    std::string detail;
};

std::vector<std::string> check_names(Level level);
std::vector<CheckResult> run_checks(const CheckOptions& options);

}  // namespace pathlearn::checks
