#pragma once

#include "apilot/pyparse/ast.hpp"
#include "apilot/pyparse/lexer.hpp"

#include <string_view>
#include <variant>

namespace apilot::pyparse {

/// Location and message of the first syntax error in a source text.
struct ParseFailure {
    std::string message;
    Position where;

    std::string describe() const;
    friend bool operator==(const ParseFailure&, const ParseFailure&) = default;
};

/// Parses a module of Python 3 source (3.8 through 3.12 statement syntax,
/// including match statements). Only syntax is checked: undefined names,
/// `return` outside a function and similar compile-time errors are accepted,
/// exactly as `ast.parse` accepts them. Throws SyntaxError.
Module parse_module(std::string_view source);

/// Non-throwing form of parse_module.
std::variant<Module, ParseFailure> try_parse_module(std::string_view source);

/// Parses a single expression (used for f-string replacement fields and tests).
ExprPtr parse_expression(std::string_view source, Position origin = {1, 0});

}  // namespace apilot::pyparse
