#include "apilot/pyparse/ast.hpp"
#include "apilot/pyparse/literal.hpp"

namespace apilot::pyparse {

std::optional<std::string> string_value(const Expr& e) {
    if (e.kind != ExprKind::Constant || e.constant != ConstKind::string) return std::nullopt;
    std::string out;
    for (const auto& piece : split_string_pieces(e.text)) {
        auto decoded = decode_string_piece(piece);
        if (!decoded) return std::nullopt;
        out += decoded->value;
    }
    return out;
}

std::optional<std::string> dotted_name(const Expr& e) {
    if (e.kind == ExprKind::Name) return e.text;
    if (e.kind != ExprKind::Attribute || e.items.empty() || !e.items[0]) return std::nullopt;
    auto head = dotted_name(*e.items[0]);
    if (!head) return std::nullopt;
    return *head + "." + e.text;
}

const Expr* chain_root(const Expr& e) {
    const Expr* cur = &e;
    while (cur->kind == ExprKind::Attribute) {
        if (cur->items.empty() || !cur->items[0]) return nullptr;
        cur = cur->items[0].get();
    }
    return cur->kind == ExprKind::Name ? cur : nullptr;
}

}  // namespace apilot::pyparse
