#pragma once

#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFindings = 1;
inline constexpr int kExitError = 2;
inline constexpr int kExitExhausted = 3;

using EnvLookup = std::function<std::optional<std::string>(std::string_view name)>;

/// Reads the process environment.
EnvLookup process_env();

struct Io {
    std::istream& in;
    std::ostream& out;
    std::ostream& err;
};

/// Runs `apilot <args...>` (args excludes the program name) and returns the
/// exit code: 0 success or clean, 1 findings, 2 operational or usage error,
/// 3 exhausted generation.
int run_cli(const std::vector<std::string>& args, Io io, const EnvLookup& env = process_env());

}  // namespace apilot::cli
