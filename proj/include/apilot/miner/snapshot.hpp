#pragma once

#include "apilot/pyparse/ast.hpp"
#include "apilot/pyparse/parser.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace apilot::miner {

/// One entry of a parameter list. Star parameters keep their stars in the
/// name ("*args", "**kwargs"); the bare separators appear as "*" and "/".
struct SnapshotParam {
    std::string name;
    bool has_default = false;

    friend bool operator==(const SnapshotParam&, const SnapshotParam&) = default;
};

/// Structural view of one function, method or class in one file version.
///
/// Nested names follow Python's __qualname__: methods are "C.m" and
/// functions local to another function are "f.<locals>.g". A class snapshot
/// takes its parameters from the __init__ defined in its own body (without
/// the instance parameter) and has no return expressions.
struct FunctionSnapshot {
    std::string qualified_name;
    std::vector<SnapshotParam> params;
    std::vector<std::string> return_exprs;
    bool has_deprecation_warning = false;
    bool is_class = false;
    int first_line = 0;
    int last_line = 0;

    friend bool operator==(const FunctionSnapshot&, const FunctionSnapshot&) = default;
};

/// Everything the miner keeps from one parsed file version.
struct FileSnapshot {
    std::vector<FunctionSnapshot> functions;
    /// Literal module-level __all__, when the module declares one.
    std::optional<std::vector<std::string>> exports;
};

std::variant<FileSnapshot, pyparse::ParseFailure> snapshot_file(std::string_view source);

/// Function-level part of snapshot_file.
std::variant<std::vector<FunctionSnapshot>, pyparse::ParseFailure> snapshot_functions(std::string_view source,
                                                                                     std::string_view file_path);

/// True when a def/class carries a deprecat* decorator or its own body (not
/// nested definitions) calls warn/warn_explicit with a Deprecat* category.
bool detect_deprecation(const pyparse::Stmt& definition);

/// Literal string entries of a module-level __all__, or nullopt when the
/// module has none or builds it dynamically.
std::optional<std::vector<std::string>> module_exports(const pyparse::Module& module);

/// "name(a, b=…, *args)" using the last segment of the qualified name.
std::string render_signature(const FunctionSnapshot& snapshot);

}  // namespace apilot::miner
