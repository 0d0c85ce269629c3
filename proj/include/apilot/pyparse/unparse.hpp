#pragma once

#include "apilot/pyparse/ast.hpp"

#include <string>

namespace apilot::pyparse {

/// Canonical text of an expression: no whitespace except around keyword
/// operators, minimal parentheses, numbers rendered by value and plain
/// strings re-quoted the way Python's repr() would. Two expressions with the
/// same syntax tree get the same text regardless of source formatting.
std::string canonical(const Expr& e);

/// Canonical text of a numeric literal ("0x10" -> "16", "1_0.50" -> "10.5").
std::string canonical_number(std::string_view literal);

}  // namespace apilot::pyparse
