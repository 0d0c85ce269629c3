#pragma once

#include "apilot/pyparse/ast.hpp"

#include <functional>

namespace apilot::pyparse {

using ExprVisitor = std::function<void(const Expr&)>;
using BodyVisitor = std::function<void(const std::vector<StmtPtr>&)>;

/// Direct children of an expression, including comprehension parts and
/// lambda parameter defaults and annotations.
void for_each_subexpr(const Expr& e, const ExprVisitor& fn);

/// Expressions owned directly by a statement (not those in nested bodies).
void for_each_stmt_expr(const Stmt& s, const ExprVisitor& fn);

/// Nested statement lists: body, orelse, finalbody, handler and case bodies.
void for_each_child_body(const Stmt& s, const BodyVisitor& fn);

/// Pre-order walk over `e` and everything below it.
void walk_exprs(const Expr& e, const ExprVisitor& fn);

}  // namespace apilot::pyparse
