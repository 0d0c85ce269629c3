#pragma once

#include <functional>
#include <iostream>
#include <string>
#include <string_view>

namespace apilot {

/// Receives one human-readable diagnostic line (no trailing newline).
using DiagnosticSink = std::function<void(std::string_view)>;

inline DiagnosticSink stderr_sink() {
    return [](std::string_view line) { std::cerr << line << '\n'; };
}

inline DiagnosticSink null_sink() {
    return [](std::string_view) {};
}

}  // namespace apilot
