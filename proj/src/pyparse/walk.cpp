#include "apilot/pyparse/walk.hpp"

namespace apilot::pyparse {
namespace {

void visit_args(const Arguments* args, const ExprVisitor& fn) {
    if (!args) return;
    for (const auto& p : args->params) {
        if (p.annotation) fn(*p.annotation);
        if (p.default_value) fn(*p.default_value);
    }
}

void visit_all(const std::vector<ExprPtr>& v, const ExprVisitor& fn) {
    for (const auto& e : v) {
        if (e) fn(*e);
    }
}

}  // namespace

void for_each_subexpr(const Expr& e, const ExprVisitor& fn) {
    visit_args(e.args.get(), fn);
    visit_all(e.items, fn);
    for (const auto& g : e.generators) {
        if (g.target) fn(*g.target);
        if (g.iter) fn(*g.iter);
        visit_all(g.ifs, fn);
    }
}

void for_each_stmt_expr(const Stmt& s, const ExprVisitor& fn) {
    visit_all(s.decorators, fn);
    visit_args(s.args.get(), fn);
    if (s.returns) fn(*s.returns);
    visit_all(s.bases, fn);
    visit_all(s.targets, fn);
    if (s.annotation) fn(*s.annotation);
    if (s.value) fn(*s.value);
    if (s.cause) fn(*s.cause);
    for (const auto& w : s.items) {
        if (w.context) fn(*w.context);
        if (w.target) fn(*w.target);
    }
    for (const auto& h : s.handlers) {
        if (h.type) fn(*h.type);
    }
    for (const auto& c : s.cases) {
        if (c.pattern) fn(*c.pattern);
        if (c.guard) fn(*c.guard);
    }
}

void for_each_child_body(const Stmt& s, const BodyVisitor& fn) {
    if (!s.body.empty()) fn(s.body);
    for (const auto& h : s.handlers) fn(h.body);
    for (const auto& c : s.cases) fn(c.body);
    if (!s.orelse.empty()) fn(s.orelse);
    if (!s.finalbody.empty()) fn(s.finalbody);
}

void walk_exprs(const Expr& e, const ExprVisitor& fn) {
    fn(e);
    for_each_subexpr(e, [&](const Expr& child) { walk_exprs(child, fn); });
}

}  // namespace apilot::pyparse
