#include "apilot/pyparse/parser.hpp"
#include "apilot/pyparse/literal.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

namespace apilot::pyparse {

std::string ParseFailure::describe() const {
    return fmt::format("line {}, col {}: {}", where.line, where.col + 1, message);
}

namespace {

constexpr std::array<std::string_view, 13> kAugOps = {"+=", "-=", "*=", "/=", "//=", "%=", "@=",
                                                      "&=", "|=", "^=", ">>=", "<<=", "**="};

enum class TargetCtx { assign, del, for_loop, with_item, comprehension };

std::string_view describe(const Expr& e) {
    switch (e.kind) {
        case ExprKind::Call: return "function call";
        case ExprKind::Constant: return e.constant == ConstKind::none ? "None" : "literal";
        case ExprKind::JoinedStr: return "f-string expression";
        case ExprKind::Lambda: return "lambda";
        case ExprKind::IfExp: return "conditional expression";
        case ExprKind::Compare: return "comparison";
        case ExprKind::NamedExpr: return "named expression";
        case ExprKind::Await: return "await expression";
        case ExprKind::Yield:
        case ExprKind::YieldFrom: return "yield expression";
        case ExprKind::Dict: return "dict literal";
        case ExprKind::Set: return "set display";
        case ExprKind::ListComp: return "list comprehension";
        case ExprKind::SetComp: return "set comprehension";
        case ExprKind::DictComp: return "dict comprehension";
        case ExprKind::GeneratorExp: return "generator expression";
        case ExprKind::Tuple: return "tuple";
        case ExprKind::List: return "list";
        default: return "expression";
    }
}

class Parser {
public:
    explicit Parser(std::vector<Token> tokens) : t_(std::move(tokens)) {}

    Module parse_file() {
        Module m;
        while (!at(TokKind::EndMarker)) {
            if (at(TokKind::Indent)) fail("unexpected indent");
            if (at(TokKind::Newline)) {
                next();
                continue;
            }
            parse_statement(m.body);
        }
        return m;
    }

    ExprPtr parse_embedded() {
        if (at(TokKind::EndMarker)) fail("empty expression not allowed");
        ExprPtr e = at_kw("yield") ? yield_expr() : star_expressions();
        if (!at(TokKind::EndMarker)) fail("invalid syntax");
        return e;
    }

private:
    // ---- token helpers -------------------------------------------------

    const Token& peek(std::size_t k = 0) const { return t_[std::min(i_ + k, t_.size() - 1)]; }
    bool at(TokKind k) const { return peek().kind == k; }
    bool at_op(std::string_view s, std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == TokKind::Op && t.text == s;
    }
    bool at_kw(std::string_view s, std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == TokKind::Keyword && t.text == s;
    }
    bool at_soft(std::string_view s, std::size_t k = 0) const {
        const Token& t = peek(k);
        return t.kind == TokKind::Name && t.text == s;
    }
    const Token& next() {
        const Token& t = t_[i_];
        if (i_ + 1 < t_.size()) ++i_;
        return t;
    }
    bool accept_op(std::string_view s) {
        if (!at_op(s)) return false;
        next();
        return true;
    }
    bool accept_kw(std::string_view s) {
        if (!at_kw(s)) return false;
        next();
        return true;
    }
    void expect_op(std::string_view s, std::string_view msg = {}) {
        if (!accept_op(s)) fail(msg.empty() ? fmt::format("expected '{}'", s) : std::string(msg));
    }
    void expect_kw(std::string_view s) {
        if (!accept_kw(s)) fail(fmt::format("expected '{}'", s));
    }
    std::string expect_name() {
        if (!at(TokKind::Name)) fail("invalid syntax");
        return next().text;
    }
    // End of the last consumed token that is not layout, so a block ends at
    // its last statement rather than at the dedent that closes it.
    Position prev_end() const {
        std::size_t j = i_;
        while (j > 0 && (t_[j - 1].kind == TokKind::Newline || t_[j - 1].kind == TokKind::Indent ||
                         t_[j - 1].kind == TokKind::Dedent)) {
            --j;
        }
        return j == 0 ? t_[0].begin : t_[j - 1].end;
    }

    [[noreturn]] void fail(std::string msg) const { throw SyntaxError(std::move(msg), peek().begin); }
    [[noreturn]] void fail_at(std::string msg, Position where) const { throw SyntaxError(std::move(msg), where); }

    bool at_stmt_end() const { return at(TokKind::Newline) || at_op(";") || at(TokKind::EndMarker); }

    bool starts_expression() const {
        const Token& t = peek();
        switch (t.kind) {
            case TokKind::Name:
            case TokKind::Number:
            case TokKind::String: return true;
            case TokKind::Keyword:
                return t.text == "not" || t.text == "lambda" || t.text == "await" || t.text == "None" ||
                       t.text == "True" || t.text == "False" || t.text == "yield";
            case TokKind::Op:
                return t.text == "(" || t.text == "[" || t.text == "{" || t.text == "-" || t.text == "+" ||
                       t.text == "~" || t.text == "*" || t.text == "...";
            default: return false;
        }
    }

    struct DepthGuard {
        explicit DepthGuard(Parser& p) : p_(p) {
            if (++p_.depth_ > kMaxDepth) p_.fail("too many nested parentheses");
        }
        ~DepthGuard() { --p_.depth_; }
        Parser& p_;
    };
    static constexpr int kMaxDepth = 300;

    static ExprPtr node(ExprKind k, Position b) {
        auto e = std::make_unique<Expr>();
        e->kind = k;
        e->span.begin = b;
        return e;
    }
    ExprPtr close(ExprPtr e) const {
        e->span.end = prev_end();
        return e;
    }
    static StmtPtr stmt(StmtKind k, Position b) {
        auto s = std::make_unique<Stmt>();
        s->kind = k;
        s->span.begin = b;
        return s;
    }
    StmtPtr close(StmtPtr s) const {
        s->span.end = prev_end();
        return s;
    }

    // ---- statements ----------------------------------------------------

    void parse_statement(std::vector<StmtPtr>& out) {
        DepthGuard guard(*this);
        if (auto s = try_compound()) {
            out.push_back(std::move(s));
            return;
        }
        parse_simple_stmts(out);
    }

    std::vector<StmtPtr> parse_block(std::string_view what, int line) {
        std::vector<StmtPtr> body;
        if (at(TokKind::Newline)) {
            next();
            if (!at(TokKind::Indent)) fail(fmt::format("expected an indented block after {} on line {}", what, line));
            next();
            while (!at(TokKind::Dedent) && !at(TokKind::EndMarker)) {
                if (at(TokKind::Indent)) fail("unexpected indent");
                parse_statement(body);
            }
            if (at(TokKind::Dedent)) next();
        } else {
            if (at(TokKind::EndMarker) || at(TokKind::Indent)) fail("invalid syntax");
            parse_simple_stmts(body);
        }
        return body;
    }

    StmtPtr try_compound() {
        const Token& t = peek();
        if (t.kind == TokKind::Op && t.text == "@") return parse_decorated();
        if (t.kind == TokKind::Keyword) {
            if (t.text == "def") return parse_funcdef({}, false, t.begin);
            if (t.text == "class") return parse_classdef({}, t.begin);
            if (t.text == "if") return parse_if();
            if (t.text == "while") return parse_while();
            if (t.text == "for") return parse_for(false, t.begin);
            if (t.text == "try") return parse_try();
            if (t.text == "with") return parse_with(false, t.begin);
            if (t.text == "async") {
                const Position b = next().begin;
                if (at_kw("def")) return parse_funcdef({}, true, b);
                if (at_kw("for")) return parse_for(true, b);
                if (at_kw("with")) return parse_with(true, b);
                fail("invalid syntax");
            }
        }
        if (at_soft("match")) return try_match();
        return nullptr;
    }

    StmtPtr parse_decorated() {
        std::vector<ExprPtr> decorators;
        while (accept_op("@")) {
            decorators.push_back(named_expression());
            if (!at(TokKind::Newline)) fail("invalid syntax");
            next();
        }
        const Position b = peek().begin;
        if (at_kw("def")) return parse_funcdef(std::move(decorators), false, b);
        if (at_kw("class")) return parse_classdef(std::move(decorators), b);
        if (at_kw("async") && at_kw("def", 1)) {
            next();
            return parse_funcdef(std::move(decorators), true, b);
        }
        fail("invalid syntax");
    }

    void skip_type_params() {
        if (!at_op("[")) return;
        int depth = 0;
        do {
            if (at_op("[")) ++depth;
            if (at_op("]")) --depth;
            if (at(TokKind::EndMarker)) fail("invalid syntax");
            next();
        } while (depth > 0);
    }

    StmtPtr parse_funcdef(std::vector<ExprPtr> decorators, bool is_async, Position b) {
        const int line = next().begin.line;
        auto s = stmt(StmtKind::FunctionDef, b);
        s->is_async = is_async;
        s->decorators = std::move(decorators);
        s->name = expect_name();
        skip_type_params();
        expect_op("(");
        s->args = parse_parameters(true, ")");
        expect_op(")");
        if (accept_op("->")) s->returns = expression();
        expect_op(":");
        s->body = parse_block("function definition", line);
        return close(std::move(s));
    }

    StmtPtr parse_classdef(std::vector<ExprPtr> decorators, Position b) {
        const int line = next().begin.line;
        auto s = stmt(StmtKind::ClassDef, b);
        s->decorators = std::move(decorators);
        s->name = expect_name();
        skip_type_params();
        if (accept_op("(")) {
            parse_call_args(s->bases);
            expect_op(")");
        }
        expect_op(":");
        s->body = parse_block("class definition", line);
        return close(std::move(s));
    }

    StmtPtr parse_if() {
        const Token& kw = next();
        auto s = stmt(StmtKind::If, kw.begin);
        const std::string what = fmt::format("'{}' statement", kw.text);
        s->value = named_expression();
        expect_op(":");
        s->body = parse_block(what, kw.begin.line);
        if (at_kw("elif")) {
            s->orelse.push_back(parse_if());
        } else if (at_kw("else")) {
            const int line = next().begin.line;
            expect_op(":");
            s->orelse = parse_block("'else' statement", line);
        }
        return close(std::move(s));
    }

    StmtPtr parse_while() {
        const Token& kw = next();
        auto s = stmt(StmtKind::While, kw.begin);
        s->value = named_expression();
        expect_op(":");
        s->body = parse_block("'while' statement", kw.begin.line);
        if (at_kw("else")) {
            const int line = next().begin.line;
            expect_op(":");
            s->orelse = parse_block("'else' statement", line);
        }
        return close(std::move(s));
    }

    StmtPtr parse_for(bool is_async, Position b) {
        const int line = next().begin.line;
        auto s = stmt(StmtKind::For, b);
        s->is_async = is_async;
        auto target = target_list();
        check_target(*target, TargetCtx::for_loop);
        s->targets.push_back(std::move(target));
        expect_kw("in");
        s->value = star_expressions();
        expect_op(":");
        s->body = parse_block("'for' statement", line);
        if (at_kw("else")) {
            const int else_line = next().begin.line;
            expect_op(":");
            s->orelse = parse_block("'else' statement", else_line);
        }
        return close(std::move(s));
    }

    StmtPtr parse_try() {
        const Token& kw = next();
        auto s = stmt(StmtKind::Try, kw.begin);
        expect_op(":");
        s->body = parse_block("'try' statement", kw.begin.line);
        while (at_kw("except")) {
            ExceptHandler h;
            h.span.begin = peek().begin;
            const int line = next().begin.line;
            if (accept_op("*")) h.star = true;
            if (!at_op(":")) {
                h.type = expression();
                if (at_op(",")) fail("multiple exception types must be parenthesized");
                if (accept_kw("as")) h.name = expect_name();
            }
            expect_op(":");
            h.body = parse_block("'except' statement", line);
            h.span.end = prev_end();
            s->handlers.push_back(std::move(h));
        }
        if (s->handlers.empty() && !at_kw("finally")) fail("expected 'except' or 'finally' block");
        if (at_kw("else")) {
            if (s->handlers.empty()) fail("invalid syntax");
            const int line = next().begin.line;
            expect_op(":");
            s->orelse = parse_block("'else' statement", line);
        }
        if (at_kw("finally")) {
            const int line = next().begin.line;
            expect_op(":");
            s->finalbody = parse_block("'finally' statement", line);
        }
        return close(std::move(s));
    }

    std::vector<WithItem> with_items(bool parenthesized) {
        std::vector<WithItem> items;
        while (true) {
            WithItem w;
            w.context = expression();
            if (accept_kw("as")) {
                w.target = star_target();
                check_target(*w.target, TargetCtx::with_item);
            }
            items.push_back(std::move(w));
            if (!accept_op(",")) break;
            if (parenthesized && at_op(")")) break;
        }
        return items;
    }

    StmtPtr parse_with(bool is_async, Position b) {
        const int line = next().begin.line;
        auto s = stmt(StmtKind::With, b);
        s->is_async = is_async;
        bool done = false;
        if (at_op("(")) {
            const std::size_t save = i_;
            try {
                next();
                s->items = with_items(true);
                expect_op(")");
                done = at_op(":");
            } catch (const SyntaxError&) {
                done = false;
            }
            if (!done) {
                i_ = save;
                s->items.clear();
            }
        }
        if (!done) s->items = with_items(false);
        expect_op(":");
        s->body = parse_block("'with' statement", line);
        return close(std::move(s));
    }

    // ---- match statement -------------------------------------------------

    StmtPtr try_match() {
        const std::size_t save = i_;
        const Position b = peek().begin;
        auto s = stmt(StmtKind::Match, b);
        try {
            next();
            s->value = match_subject();
            if (!accept_op(":") || !at(TokKind::Newline)) throw SyntaxError("", b);
            next();
            if (!at(TokKind::Indent)) throw SyntaxError("", b);
            next();
            if (!at_soft("case")) throw SyntaxError("", b);
        } catch (const SyntaxError&) {
            i_ = save;
            return nullptr;
        }
        while (at_soft("case")) {
            MatchCase c;
            const int line = next().begin.line;
            c.pattern = patterns();
            if (accept_kw("if")) c.guard = named_expression();
            expect_op(":");
            c.body = parse_block("'case' statement", line);
            s->cases.push_back(std::move(c));
        }
        if (!at(TokKind::Dedent)) fail("invalid syntax");
        next();
        return close(std::move(s));
    }

    ExprPtr match_subject() {
        const Position b = peek().begin;
        auto first = star_named_expression();
        if (!at_op(",")) {
            if (first->kind == ExprKind::Starred) fail("invalid syntax");
            return first;
        }
        auto t = node(ExprKind::Tuple, b);
        t->items.push_back(std::move(first));
        while (accept_op(",")) {
            if (at_op(":")) break;
            t->items.push_back(star_named_expression());
        }
        return close(std::move(t));
    }

    ExprPtr patterns() {
        const Position b = peek().begin;
        auto first = maybe_star_pattern();
        if (!at_op(",")) {
            if (first->kind == ExprKind::MatchStar) fail_at("invalid syntax", b);
            return first;
        }
        auto seq = node(ExprKind::MatchSequence, b);
        seq->items.push_back(std::move(first));
        while (accept_op(",")) {
            if (at_op(":") || at_kw("if")) break;
            seq->items.push_back(maybe_star_pattern());
        }
        return close(std::move(seq));
    }

    ExprPtr maybe_star_pattern() {
        const Position b = peek().begin;
        if (accept_op("*")) {
            auto p = node(ExprKind::MatchStar, b);
            const std::string name = expect_name();
            p->text = name == "_" ? "" : name;
            return close(std::move(p));
        }
        return pattern();
    }

    ExprPtr pattern() {
        const Position b = peek().begin;
        auto p = or_pattern();
        if (accept_kw("as")) {
            auto as = node(ExprKind::MatchAs, b);
            const Position at_name = peek().begin;
            as->text = expect_name();
            if (as->text == "_") fail_at("cannot use '_' as a target", at_name);
            as->items.push_back(std::move(p));
            return close(std::move(as));
        }
        return p;
    }

    ExprPtr or_pattern() {
        const Position b = peek().begin;
        auto first = closed_pattern();
        if (!at_op("|")) return first;
        auto alt = node(ExprKind::MatchOr, b);
        alt->items.push_back(std::move(first));
        while (accept_op("|")) alt->items.push_back(closed_pattern());
        return close(std::move(alt));
    }

    ExprPtr literal_number() {
        const Position b = peek().begin;
        ExprPtr value;
        if (at_op("-")) {
            next();
            if (!at(TokKind::Number)) fail("invalid syntax");
            value = node(ExprKind::UnaryOp, b);
            value->text = "-";
            value->items.push_back(atom());
            value = close(std::move(value));
        } else {
            value = atom();
        }
        if ((at_op("+") || at_op("-")) && peek(1).kind == TokKind::Number) {
            auto bin = node(ExprKind::BinOp, b);
            bin->text = next().text;
            bin->items.push_back(std::move(value));
            bin->items.push_back(atom());
            value = close(std::move(bin));
        }
        return value;
    }

    ExprPtr name_or_attr() {
        const Position b = peek().begin;
        auto e = node(ExprKind::Name, b);
        e->text = expect_name();
        e = close(std::move(e));
        while (at_op(".")) {
            next();
            auto a = node(ExprKind::Attribute, b);
            a->text = expect_name();
            a->items.push_back(std::move(e));
            e = close(std::move(a));
        }
        return e;
    }

    ExprPtr closed_pattern() {
        DepthGuard guard(*this);
        const Position b = peek().begin;
        const Token& t = peek();
        auto value_pattern = [&](ExprPtr v) {
            auto p = node(ExprKind::MatchValue, b);
            p->items.push_back(std::move(v));
            return close(std::move(p));
        };
        if (at_op("-") || t.kind == TokKind::Number) return value_pattern(literal_number());
        if (t.kind == TokKind::String) return value_pattern(strings());
        if (at_kw("None") || at_kw("True") || at_kw("False")) {
            auto p = node(ExprKind::MatchSingleton, b);
            p->text = next().text;
            return close(std::move(p));
        }
        if (at_op("(")) {
            next();
            if (accept_op(")")) return close(node(ExprKind::MatchSequence, b));
            auto first = maybe_star_pattern();
            if (accept_op(")")) {
                if (first->kind == ExprKind::MatchStar) fail_at("invalid syntax", first->span.begin);
                return first;
            }
            auto seq = node(ExprKind::MatchSequence, b);
            seq->items.push_back(std::move(first));
            while (accept_op(",")) {
                if (at_op(")")) break;
                seq->items.push_back(maybe_star_pattern());
            }
            expect_op(")");
            return close(std::move(seq));
        }
        if (at_op("[")) {
            next();
            auto seq = node(ExprKind::MatchSequence, b);
            while (!at_op("]")) {
                seq->items.push_back(maybe_star_pattern());
                if (!accept_op(",")) break;
            }
            expect_op("]");
            return close(std::move(seq));
        }
        if (at_op("{")) return mapping_pattern();
        if (t.kind == TokKind::Name) {
            auto target = name_or_attr();
            if (at_op("(")) return class_pattern(std::move(target), b);
            if (target->kind == ExprKind::Attribute) return value_pattern(std::move(target));
            auto p = node(ExprKind::MatchAs, b);
            p->text = target->text == "_" ? "" : target->text;
            p->items.push_back(nullptr);
            return close(std::move(p));
        }
        fail("invalid syntax");
    }

    ExprPtr mapping_pattern() {
        const Position b = next().begin;
        auto m = node(ExprKind::MatchMapping, b);
        while (!at_op("}")) {
            if (accept_op("**")) {
                m->text = expect_name();
                accept_op(",");
                break;
            }
            const Token& t = peek();
            ExprPtr key;
            if (at_op("-") || t.kind == TokKind::Number) {
                key = literal_number();
            } else if (t.kind == TokKind::String) {
                key = strings();
            } else if (at_kw("None") || at_kw("True") || at_kw("False")) {
                key = atom();
            } else if (t.kind == TokKind::Name) {
                key = name_or_attr();
                if (key->kind != ExprKind::Attribute) fail_at("invalid syntax", key->span.begin);
            } else {
                fail("invalid syntax");
            }
            expect_op(":");
            m->items.push_back(std::move(key));
            m->items.push_back(pattern());
            if (!accept_op(",")) break;
        }
        expect_op("}");
        return close(std::move(m));
    }

    ExprPtr class_pattern(ExprPtr cls, Position b) {
        next();
        auto c = node(ExprKind::MatchClass, b);
        c->items.push_back(std::move(cls));
        bool seen_keyword = false;
        while (!at_op(")")) {
            const Position item_begin = peek().begin;
            if (at(TokKind::Name) && at_op("=", 1)) {
                auto kw = node(ExprKind::Keyword, item_begin);
                kw->text = next().text;
                next();
                kw->items.push_back(pattern());
                c->items.push_back(close(std::move(kw)));
                seen_keyword = true;
            } else {
                if (seen_keyword) fail("positional patterns follow keyword patterns");
                c->items.push_back(pattern());
            }
            if (!accept_op(",")) break;
        }
        expect_op(")");
        return close(std::move(c));
    }

    // ---- simple statements ---------------------------------------------

    void parse_simple_stmts(std::vector<StmtPtr>& out) {
        while (true) {
            out.push_back(parse_simple_stmt());
            if (accept_op(";")) {
                if (at(TokKind::Newline)) break;
                continue;
            }
            break;
        }
        if (!at(TokKind::Newline)) fail("invalid syntax");
        next();
    }

    StmtPtr parse_simple_stmt() {
        const Token& t = peek();
        const Position b = t.begin;
        if (t.kind == TokKind::Keyword) {
            if (t.text == "pass" || t.text == "break" || t.text == "continue") {
                const auto kind = t.text == "pass" ? StmtKind::Pass : t.text == "break" ? StmtKind::Break
                                                                                         : StmtKind::Continue;
                next();
                return close(stmt(kind, b));
            }
            if (t.text == "return") {
                next();
                auto s = stmt(StmtKind::Return, b);
                if (!at_stmt_end()) s->value = star_expressions();
                return close(std::move(s));
            }
            if (t.text == "raise") {
                next();
                auto s = stmt(StmtKind::Raise, b);
                if (!at_stmt_end()) {
                    s->value = expression();
                    if (accept_kw("from")) s->cause = expression();
                }
                return close(std::move(s));
            }
            if (t.text == "global" || t.text == "nonlocal") {
                auto s = stmt(t.text == "global" ? StmtKind::Global : StmtKind::Nonlocal, b);
                next();
                do {
                    s->identifiers.push_back(expect_name());
                } while (accept_op(","));
                return close(std::move(s));
            }
            if (t.text == "del") {
                next();
                auto s = stmt(StmtKind::Delete, b);
                auto e = star_expressions();
                if (e->kind == ExprKind::Tuple && !e->parenthesized) {
                    s->targets = std::move(e->items);
                } else {
                    s->targets.push_back(std::move(e));
                }
                for (const auto& target : s->targets) check_target(*target, TargetCtx::del);
                return close(std::move(s));
            }
            if (t.text == "assert") {
                next();
                auto s = stmt(StmtKind::Assert, b);
                s->value = expression();
                if (accept_op(",")) s->cause = expression();
                return close(std::move(s));
            }
            if (t.text == "import") return parse_import();
            if (t.text == "from") return parse_from_import();
        }
        if (at_soft("type") && at(TokKind::Name) && peek(1).kind == TokKind::Name &&
            (at_op("=", 2) || at_op("[", 2))) {
            next();
            auto s = stmt(StmtKind::TypeAlias, b);
            auto name = node(ExprKind::Name, peek().begin);
            name->text = expect_name();
            s->targets.push_back(close(std::move(name)));
            skip_type_params();
            expect_op("=");
            s->value = expression();
            return close(std::move(s));
        }
        return parse_expr_stmt();
    }

    std::string dotted_import_name() {
        std::string name = expect_name();
        while (at_op(".")) {
            next();
            name += ".";
            name += expect_name();
        }
        return name;
    }

    StmtPtr parse_import() {
        auto s = stmt(StmtKind::Import, next().begin);
        do {
            Alias a;
            a.span.begin = peek().begin;
            a.name = dotted_import_name();
            if (accept_kw("as")) a.asname = expect_name();
            a.span.end = prev_end();
            s->names.push_back(std::move(a));
        } while (accept_op(","));
        return close(std::move(s));
    }

    void import_as_names(std::vector<Alias>& out, bool parenthesized) {
        while (true) {
            Alias a;
            a.span.begin = peek().begin;
            a.name = expect_name();
            if (accept_kw("as")) a.asname = expect_name();
            a.span.end = prev_end();
            out.push_back(std::move(a));
            if (!accept_op(",")) break;
            if (parenthesized && at_op(")")) break;
        }
    }

    StmtPtr parse_from_import() {
        auto s = stmt(StmtKind::ImportFrom, next().begin);
        while (at_op(".") || at_op("...")) s->level += static_cast<int>(next().text.size());
        if (!at_kw("import")) {
            s->module = dotted_import_name();
        } else if (s->level == 0) {
            fail("invalid syntax");
        }
        expect_kw("import");
        if (at_op("*")) {
            Alias a;
            a.span.begin = peek().begin;
            a.name = next().text;
            a.span.end = prev_end();
            s->names.push_back(std::move(a));
        } else if (accept_op("(")) {
            import_as_names(s->names, true);
            expect_op(")");
        } else {
            import_as_names(s->names, false);
        }
        return close(std::move(s));
    }

    ExprPtr assignment_rhs() { return at_kw("yield") ? yield_expr() : star_expressions(); }

    StmtPtr parse_expr_stmt() {
        const Position b = peek().begin;
        ExprPtr first = assignment_rhs();

        if (at_op("=")) {
            auto s = stmt(StmtKind::Assign, b);
            s->targets.push_back(std::move(first));
            while (accept_op("=")) {
                ExprPtr rhs = assignment_rhs();
                if (at_op("=")) {
                    s->targets.push_back(std::move(rhs));
                } else {
                    s->value = std::move(rhs);
                }
            }
            for (const auto& target : s->targets) check_target(*target, TargetCtx::assign);
            return close(std::move(s));
        }

        if (at_op(":")) {
            switch (first->kind) {
                case ExprKind::Name:
                case ExprKind::Attribute:
                case ExprKind::Subscript: break;
                case ExprKind::Tuple: fail_at("only single target (not tuple) can be annotated", first->span.begin);
                case ExprKind::List: fail_at("only single target (not list) can be annotated", first->span.begin);
                default: fail_at("illegal target for annotation", first->span.begin);
            }
            next();
            auto s = stmt(StmtKind::AnnAssign, b);
            s->targets.push_back(std::move(first));
            s->annotation = expression();
            if (accept_op("=")) s->value = assignment_rhs();
            return close(std::move(s));
        }

        if (peek().kind == TokKind::Op &&
            std::find(kAugOps.begin(), kAugOps.end(), peek().text) != kAugOps.end()) {
            if (first->kind != ExprKind::Name && first->kind != ExprKind::Attribute &&
                first->kind != ExprKind::Subscript) {
                fail_at(fmt::format("'{}' is an illegal expression for augmented assignment", describe(*first)),
                        first->span.begin);
            }
            auto s = stmt(StmtKind::AugAssign, b);
            const std::string op = next().text;
            s->name = op.substr(0, op.size() - 1);
            s->targets.push_back(std::move(first));
            s->value = assignment_rhs();
            return close(std::move(s));
        }

        auto s = stmt(StmtKind::Expr, b);
        s->value = std::move(first);
        return close(std::move(s));
    }

    void check_target(const Expr& e, TargetCtx ctx) const {
        switch (e.kind) {
            case ExprKind::Name:
            case ExprKind::Attribute:
            case ExprKind::Subscript: return;
            case ExprKind::Starred:
                if (ctx == TargetCtx::del) fail_at("cannot delete starred", e.span.begin);
                check_target(*e.items[0], ctx);
                return;
            case ExprKind::Tuple:
            case ExprKind::List:
                for (const auto& item : e.items) check_target(*item, ctx);
                return;
            default:
                fail_at(fmt::format("cannot {} {}", ctx == TargetCtx::del ? "delete" : "assign to", describe(e)),
                        e.span.begin);
        }
    }

    // ---- parameters and arguments ----------------------------------------

    std::unique_ptr<Arguments> parse_parameters(bool annotations, std::string_view closing) {
        auto args = std::make_unique<Arguments>();
        bool seen_slash = false;
        bool seen_star = false;
        bool seen_default = false;
        bool bare_star_pending = false;
        bool seen_kwargs = false;
        auto param_here = [&](ParamKind kind) {
            Param p;
            p.span.begin = peek().begin;
            p.name = expect_name();
            p.span.end = prev_end();
            p.kind = kind;
            return p;
        };
        while (!at_op(closing)) {
            const Position b = peek().begin;
            if (seen_kwargs) fail("invalid syntax");
            if (accept_op("/")) {
                if (args->params.empty() || seen_slash || seen_star) fail_at("invalid syntax", b);
                for (auto& p : args->params) p.kind = ParamKind::positional_only;
                seen_slash = true;
            } else if (accept_op("*")) {
                if (seen_star) fail_at("* argument may appear only once", b);
                seen_star = true;
                if (at_op(",") || at_op(closing)) {
                    bare_star_pending = true;
                } else {
                    Param p = param_here(ParamKind::var_positional);
                    if (annotations && accept_op(":")) p.annotation = star_expression();
                    args->params.push_back(std::move(p));
                }
            } else if (accept_op("**")) {
                if (bare_star_pending) fail_at("named arguments must follow bare *", b);
                Param p = param_here(ParamKind::var_keyword);
                if (annotations && accept_op(":")) p.annotation = expression();
                args->params.push_back(std::move(p));
                seen_kwargs = true;
            } else {
                Param p = param_here(seen_star ? ParamKind::keyword_only : ParamKind::positional_or_keyword);
                if (annotations && accept_op(":")) p.annotation = expression();
                if (accept_op("=")) {
                    p.default_value = expression();
                    if (!seen_star) seen_default = true;
                } else if (!seen_star && seen_default) {
                    fail_at("non-default argument follows default argument", b);
                }
                bare_star_pending = false;
                args->params.push_back(std::move(p));
            }
            if (!accept_op(",")) break;
        }
        if (bare_star_pending) fail("named arguments must follow bare *");
        return args;
    }

    void parse_call_args(std::vector<ExprPtr>& out) {
        bool seen_keyword = false;
        bool seen_dstar = false;
        std::size_t count = 0;
        bool bare_genexp = false;
        while (!at_op(")")) {
            const Position b = peek().begin;
            if (accept_op("*")) {
                if (seen_dstar) fail_at("iterable argument unpacking follows keyword argument unpacking", b);
                auto e = node(ExprKind::Starred, b);
                e->items.push_back(expression());
                out.push_back(close(std::move(e)));
            } else if (accept_op("**")) {
                auto e = node(ExprKind::DoubleStarred, b);
                e->items.push_back(expression());
                out.push_back(close(std::move(e)));
                seen_dstar = true;
            } else if (at(TokKind::Name) && at_op("=", 1)) {
                auto kw = node(ExprKind::Keyword, b);
                kw->text = next().text;
                next();
                kw->items.push_back(expression());
                out.push_back(close(std::move(kw)));
                seen_keyword = true;
            } else {
                auto e = named_expression();
                if (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
                    e = comprehension(ExprKind::GeneratorExp, b, std::move(e), nullptr);
                    bare_genexp = true;
                }
                if (seen_dstar) fail_at("positional argument follows keyword argument unpacking", b);
                if (seen_keyword) fail_at("positional argument follows keyword argument", b);
                out.push_back(std::move(e));
            }
            ++count;
            if (!accept_op(",")) break;
        }
        if (bare_genexp && count > 1) fail("Generator expression must be parenthesized");
    }

    // ---- expressions ---------------------------------------------------

    ExprPtr star_expressions() {
        const Position b = peek().begin;
        auto first = star_expression();
        if (!at_op(",")) return first;
        auto t = node(ExprKind::Tuple, b);
        t->items.push_back(std::move(first));
        while (accept_op(",")) {
            if (!starts_expression() || at_kw("yield")) break;
            t->items.push_back(star_expression());
        }
        return close(std::move(t));
    }

    ExprPtr star_expression() {
        const Position b = peek().begin;
        if (accept_op("*")) {
            auto e = node(ExprKind::Starred, b);
            e->items.push_back(bitwise_or());
            return close(std::move(e));
        }
        return expression();
    }

    ExprPtr star_named_expression() {
        const Position b = peek().begin;
        if (accept_op("*")) {
            auto e = node(ExprKind::Starred, b);
            e->items.push_back(bitwise_or());
            return close(std::move(e));
        }
        return named_expression();
    }

    ExprPtr star_target() {
        const Position b = peek().begin;
        if (accept_op("*")) {
            auto e = node(ExprKind::Starred, b);
            e->items.push_back(bitwise_or());
            return close(std::move(e));
        }
        return bitwise_or();
    }

    // Comma-separated targets ending before 'in' (for loops, comprehensions).
    ExprPtr target_list() {
        const Position b = peek().begin;
        auto first = star_target();
        if (!at_op(",")) return first;
        auto t = node(ExprKind::Tuple, b);
        t->items.push_back(std::move(first));
        while (accept_op(",")) {
            if (at_kw("in")) break;
            t->items.push_back(star_target());
        }
        return close(std::move(t));
    }

    ExprPtr named_expression() {
        const Position b = peek().begin;
        if (at(TokKind::Name) && at_op(":=", 1)) {
            auto target = node(ExprKind::Name, b);
            target->text = next().text;
            target = close(std::move(target));
            next();
            auto e = node(ExprKind::NamedExpr, b);
            e->items.push_back(std::move(target));
            e->items.push_back(expression());
            return close(std::move(e));
        }
        auto e = expression();
        if (at_op(":=")) fail(fmt::format("cannot use assignment expressions with {}", describe(*e)));
        return e;
    }

    ExprPtr expression() {
        DepthGuard guard(*this);
        if (at_kw("lambda")) return lambdef();
        const Position b = peek().begin;
        auto body = disjunction();
        if (!at_kw("if")) return body;
        next();
        auto test = disjunction();
        if (!accept_kw("else")) fail("expected 'else' after 'if' expression");
        auto e = node(ExprKind::IfExp, b);
        e->items.push_back(std::move(body));
        e->items.push_back(std::move(test));
        e->items.push_back(expression());
        return close(std::move(e));
    }

    ExprPtr lambdef() {
        const Position b = next().begin;
        auto e = node(ExprKind::Lambda, b);
        e->args = parse_parameters(false, ":");
        expect_op(":");
        e->items.push_back(expression());
        return close(std::move(e));
    }

    ExprPtr bool_chain(std::string_view op, ExprPtr (Parser::*operand)()) {
        const Position b = peek().begin;
        auto first = (this->*operand)();
        if (!at_kw(op)) return first;
        auto e = node(ExprKind::BoolOp, b);
        e->text = std::string(op);
        e->items.push_back(std::move(first));
        while (accept_kw(op)) e->items.push_back((this->*operand)());
        return close(std::move(e));
    }

    ExprPtr disjunction() { return bool_chain("or", &Parser::conjunction); }
    ExprPtr conjunction() { return bool_chain("and", &Parser::inversion); }

    ExprPtr inversion() {
        const Position b = peek().begin;
        if (accept_kw("not")) {
            DepthGuard guard(*this);
            auto e = node(ExprKind::UnaryOp, b);
            e->text = "not";
            e->items.push_back(inversion());
            return close(std::move(e));
        }
        return comparison();
    }

    std::optional<std::string> comparison_op() {
        const Token& t = peek();
        if (t.kind == TokKind::Op) {
            for (std::string_view op : {"==", "!=", "<", ">", "<=", ">="}) {
                if (t.text == op) {
                    next();
                    return std::string(op);
                }
            }
            return std::nullopt;
        }
        if (at_kw("in")) {
            next();
            return "in";
        }
        if (at_kw("not") && at_kw("in", 1)) {
            next();
            next();
            return "not in";
        }
        if (at_kw("is")) {
            next();
            if (accept_kw("not")) return "is not";
            return "is";
        }
        return std::nullopt;
    }

    ExprPtr comparison() {
        const Position b = peek().begin;
        auto first = bitwise_or();
        auto op = comparison_op();
        if (!op) return first;
        auto e = node(ExprKind::Compare, b);
        e->items.push_back(std::move(first));
        while (op) {
            e->ops.push_back(*op);
            e->items.push_back(bitwise_or());
            op = comparison_op();
        }
        return close(std::move(e));
    }

    ExprPtr binary_chain(std::initializer_list<std::string_view> ops, ExprPtr (Parser::*operand)()) {
        const Position b = peek().begin;
        auto left = (this->*operand)();
        while (true) {
            const Token& t = peek();
            if (t.kind != TokKind::Op || std::find(ops.begin(), ops.end(), t.text) == ops.end()) break;
            auto e = node(ExprKind::BinOp, b);
            e->text = next().text;
            e->items.push_back(std::move(left));
            e->items.push_back((this->*operand)());
            left = close(std::move(e));
        }
        return left;
    }

    ExprPtr bitwise_or() { return binary_chain({"|"}, &Parser::bitwise_xor); }
    ExprPtr bitwise_xor() { return binary_chain({"^"}, &Parser::bitwise_and); }
    ExprPtr bitwise_and() { return binary_chain({"&"}, &Parser::shift_expr); }
    ExprPtr shift_expr() { return binary_chain({"<<", ">>"}, &Parser::sum); }
    ExprPtr sum() { return binary_chain({"+", "-"}, &Parser::term); }
    ExprPtr term() { return binary_chain({"*", "/", "//", "%", "@"}, &Parser::factor); }

    ExprPtr factor() {
        const Position b = peek().begin;
        if (at_op("+") || at_op("-") || at_op("~")) {
            DepthGuard guard(*this);
            auto e = node(ExprKind::UnaryOp, b);
            e->text = next().text;
            e->items.push_back(factor());
            return close(std::move(e));
        }
        return power();
    }

    ExprPtr power() {
        const Position b = peek().begin;
        auto base = await_primary();
        if (!accept_op("**")) return base;
        auto e = node(ExprKind::BinOp, b);
        e->text = "**";
        e->items.push_back(std::move(base));
        e->items.push_back(factor());
        return close(std::move(e));
    }

    ExprPtr await_primary() {
        const Position b = peek().begin;
        if (accept_kw("await")) {
            auto e = node(ExprKind::Await, b);
            e->items.push_back(primary());
            return close(std::move(e));
        }
        return primary();
    }

    ExprPtr primary() {
        const Position b = peek().begin;
        auto e = atom();
        while (true) {
            if (accept_op(".")) {
                auto a = node(ExprKind::Attribute, b);
                a->text = expect_name();
                a->items.push_back(std::move(e));
                e = close(std::move(a));
            } else if (accept_op("(")) {
                DepthGuard guard(*this);
                auto c = node(ExprKind::Call, b);
                c->items.push_back(std::move(e));
                parse_call_args(c->items);
                expect_op(")", "'(' was never closed");
                e = close(std::move(c));
            } else if (accept_op("[")) {
                DepthGuard guard(*this);
                auto s = node(ExprKind::Subscript, b);
                s->items.push_back(std::move(e));
                s->items.push_back(slices());
                expect_op("]");
                e = close(std::move(s));
            } else {
                break;
            }
        }
        return e;
    }

    ExprPtr slices() {
        const Position b = peek().begin;
        auto first = slice();
        if (!at_op(",")) return first;
        auto t = node(ExprKind::Tuple, b);
        t->items.push_back(std::move(first));
        while (accept_op(",")) {
            if (at_op("]")) break;
            t->items.push_back(slice());
        }
        return close(std::move(t));
    }

    ExprPtr slice() {
        const Position b = peek().begin;
        if (at_op("*")) return star_target();
        ExprPtr lower;
        if (!at_op(":")) {
            lower = named_expression();
            if (!at_op(":")) return lower;
        }
        next();
        auto s = node(ExprKind::Slice, b);
        ExprPtr upper;
        ExprPtr step;
        if (!at_op(":") && !at_op(",") && !at_op("]")) upper = expression();
        if (accept_op(":")) {
            if (!at_op(",") && !at_op("]")) step = expression();
        }
        s->items.push_back(std::move(lower));
        s->items.push_back(std::move(upper));
        s->items.push_back(std::move(step));
        return close(std::move(s));
    }

    ExprPtr atom() {
        const Token& t = peek();
        const Position b = t.begin;
        switch (t.kind) {
            case TokKind::Name: {
                auto e = node(ExprKind::Name, b);
                e->text = next().text;
                return close(std::move(e));
            }
            case TokKind::Number: {
                auto e = node(ExprKind::Constant, b);
                e->constant = ConstKind::number;
                e->text = next().text;
                return close(std::move(e));
            }
            case TokKind::String: return strings();
            case TokKind::Keyword:
                if (t.text == "None" || t.text == "True" || t.text == "False") {
                    auto e = node(ExprKind::Constant, b);
                    e->constant = t.text == "None" ? ConstKind::none
                                  : t.text == "True" ? ConstKind::true_
                                                     : ConstKind::false_;
                    e->text = next().text;
                    return close(std::move(e));
                }
                fail("invalid syntax");
            case TokKind::Op:
                if (t.text == "(") return paren();
                if (t.text == "[") return list_display();
                if (t.text == "{") return brace_display();
                if (t.text == "...") {
                    auto e = node(ExprKind::Constant, b);
                    e->constant = ConstKind::ellipsis;
                    e->text = next().text;
                    return close(std::move(e));
                }
                fail("invalid syntax");
            case TokKind::EndMarker: fail("unexpected EOF while parsing");
            case TokKind::Indent: fail("unexpected indent");
            default: fail("invalid syntax");
        }
    }

    ExprPtr comprehension(ExprKind kind, Position b, ExprPtr elt, ExprPtr value) {
        auto e = node(kind, b);
        e->items.push_back(std::move(elt));
        if (value) e->items.push_back(std::move(value));
        while (at_kw("for") || (at_kw("async") && at_kw("for", 1))) {
            Comprehension c;
            if (accept_kw("async")) c.is_async = true;
            expect_kw("for");
            c.target = target_list();
            check_target(*c.target, TargetCtx::comprehension);
            expect_kw("in");
            c.iter = disjunction();
            while (accept_kw("if")) c.ifs.push_back(disjunction());
            e->generators.push_back(std::move(c));
        }
        return close(std::move(e));
    }

    bool at_comp_for() const { return at_kw("for") || (at_kw("async") && at_kw("for", 1)); }

    ExprPtr paren() {
        DepthGuard guard(*this);
        const Position b = next().begin;
        if (accept_op(")")) {
            auto t = close(node(ExprKind::Tuple, b));
            t->parenthesized = true;
            return t;
        }
        if (at_kw("yield")) {
            auto y = yield_expr();
            expect_op(")");
            y->parenthesized = true;
            return y;
        }
        auto first = star_named_expression();
        if (at_comp_for()) {
            auto g = comprehension(ExprKind::GeneratorExp, b, std::move(first), nullptr);
            expect_op(")");
            g->span.end = prev_end();
            return g;
        }
        if (accept_op(")")) {
            if (first->kind == ExprKind::Starred) fail_at("cannot use starred expression here", first->span.begin);
            first->parenthesized = true;
            return first;
        }
        auto t = node(ExprKind::Tuple, b);
        t->items.push_back(std::move(first));
        while (accept_op(",")) {
            if (at_op(")")) break;
            t->items.push_back(star_named_expression());
        }
        expect_op(")");
        t->parenthesized = true;
        return close(std::move(t));
    }

    ExprPtr list_display() {
        DepthGuard guard(*this);
        const Position b = next().begin;
        if (accept_op("]")) return close(node(ExprKind::List, b));
        auto first = star_named_expression();
        if (at_comp_for()) {
            auto c = comprehension(ExprKind::ListComp, b, std::move(first), nullptr);
            expect_op("]");
            c->span.end = prev_end();
            return c;
        }
        auto l = node(ExprKind::List, b);
        l->items.push_back(std::move(first));
        while (accept_op(",")) {
            if (at_op("]")) break;
            l->items.push_back(star_named_expression());
        }
        if (at_comp_for()) fail("did you forget parentheses around the comprehension target?");
        expect_op("]");
        return close(std::move(l));
    }

    ExprPtr brace_display() {
        DepthGuard guard(*this);
        const Position b = next().begin;
        if (accept_op("}")) return close(node(ExprKind::Dict, b));

        auto dict_rest = [&](ExprPtr d) {
            while (accept_op(",")) {
                if (at_op("}")) break;
                if (accept_op("**")) {
                    d->items.push_back(nullptr);
                    d->items.push_back(bitwise_or());
                } else {
                    d->items.push_back(expression());
                    expect_op(":", "':' expected after dictionary key");
                    d->items.push_back(expression());
                }
            }
            expect_op("}");
            return close(std::move(d));
        };

        if (accept_op("**")) {
            auto d = node(ExprKind::Dict, b);
            d->items.push_back(nullptr);
            d->items.push_back(bitwise_or());
            if (at_comp_for()) fail("dict unpacking cannot be used in dict comprehension");
            return dict_rest(std::move(d));
        }

        auto first = star_named_expression();
        if (accept_op(":")) {
            auto value = expression();
            if (at_comp_for()) {
                auto c = comprehension(ExprKind::DictComp, b, std::move(first), std::move(value));
                expect_op("}");
                c->span.end = prev_end();
                return c;
            }
            auto d = node(ExprKind::Dict, b);
            d->items.push_back(std::move(first));
            d->items.push_back(std::move(value));
            return dict_rest(std::move(d));
        }
        if (at_comp_for()) {
            auto c = comprehension(ExprKind::SetComp, b, std::move(first), nullptr);
            expect_op("}");
            c->span.end = prev_end();
            return c;
        }
        auto s = node(ExprKind::Set, b);
        s->items.push_back(std::move(first));
        while (accept_op(",")) {
            if (at_op("}")) break;
            s->items.push_back(star_named_expression());
        }
        expect_op("}");
        return close(std::move(s));
    }

    ExprPtr yield_expr() {
        const Position b = next().begin;
        if (accept_kw("from")) {
            auto e = node(ExprKind::YieldFrom, b);
            e->items.push_back(expression());
            return close(std::move(e));
        }
        auto e = node(ExprKind::Yield, b);
        if (starts_expression() && !at_kw("yield")) e->items.push_back(star_expressions());
        return close(std::move(e));
    }

    // ---- string literals -------------------------------------------------

    static std::size_t prefix_length(std::string_view text) {
        std::size_t n = 0;
        while (n < text.size() && text[n] != '\'' && text[n] != '"') ++n;
        return n;
    }

    static bool prefix_has(std::string_view prefix, char c) {
        return std::any_of(prefix.begin(), prefix.end(), [c](char p) { return (p | 0x20) == c; });
    }

    ExprPtr strings() {
        const Position b = peek().begin;
        std::vector<const Token*> parts;
        while (at(TokKind::String)) parts.push_back(&next());
        bool any_bytes = false;
        bool any_text = false;
        bool any_f = false;
        std::string text;
        for (const Token* p : parts) {
            const std::string_view prefix = std::string_view(p->text).substr(0, prefix_length(p->text));
            (prefix_has(prefix, 'b') ? any_bytes : any_text) = true;
            any_f = any_f || prefix_has(prefix, 'f');
            if (!text.empty()) text += ' ';
            text += p->text;
        }
        if (any_bytes && any_text) fail_at("cannot mix bytes and nonbytes literals", b);
        for (const Token* p : parts) {
            if (auto err = escape_error(p->text)) fail_at(*err, p->begin);
        }
        auto e = node(any_f ? ExprKind::JoinedStr : ExprKind::Constant, b);
        e->constant = any_bytes ? ConstKind::bytes : ConstKind::string;
        e->text = std::move(text);
        if (any_f) {
            for (const Token* p : parts) {
                const std::string_view prefix = std::string_view(p->text).substr(0, prefix_length(p->text));
                if (prefix_has(prefix, 'f')) fstring_fields(*p, e->items);
            }
        }
        return close(std::move(e));
    }

    static Position offset_position(const Token& tok, std::size_t offset) {
        Position p = tok.begin;
        std::size_t line_start = 0;
        bool multiline = false;
        for (std::size_t i = 0; i < offset && i < tok.text.size(); ++i) {
            if (tok.text[i] == '\n') {
                ++p.line;
                line_start = i + 1;
                multiline = true;
            }
        }
        p.col = multiline ? static_cast<int>(offset - line_start) : tok.begin.col + static_cast<int>(offset);
        return p;
    }

    void fstring_fields(const Token& tok, std::vector<ExprPtr>& out) const {
        const std::string_view text = tok.text;
        const std::size_t plen = prefix_length(text);
        const bool raw = prefix_has(text.substr(0, plen), 'r');
        const char q = text[plen];
        const std::size_t qlen = text.substr(plen, 3) == std::string(3, q) ? 3 : 1;
        FStringScanner scanner{tok, raw, out};
        scanner.scan(plen + qlen, text.size() - qlen, false);
    }

    struct FStringScanner {
        const Token& tok;
        bool raw;
        std::vector<ExprPtr>& out;
        int level = 0;

        [[noreturn]] void fail(std::string_view msg, std::size_t offset) const {
            throw SyntaxError(fmt::format("f-string: {}", msg), offset_position(tok, offset));
        }

        // Scans [i, end); in a format spec, returns the offset of the closing '}'.
        std::size_t scan(std::size_t i, std::size_t end, bool in_spec) {
            const std::string_view text = tok.text;
            while (i < end) {
                const char c = text[i];
                if (c == '\\' && !raw) {
                    if (i + 2 < end && text[i + 1] == 'N' && text[i + 2] == '{') {
                        const std::size_t close = text.find('}', i + 3);
                        i = close == std::string_view::npos || close >= end ? end : close + 1;
                    } else if (i + 1 < end && (text[i + 1] == '{' || text[i + 1] == '}')) {
                        i += 1;
                    } else {
                        i += 2;
                    }
                    continue;
                }
                if (c == '{') {
                    if (!in_spec && i + 1 < end && text[i + 1] == '{') {
                        i += 2;
                        continue;
                    }
                    if (in_spec && level >= 2) fail("expressions nested too deeply", i);
                    ++level;
                    i = field(i + 1, end);
                    --level;
                    continue;
                }
                if (c == '}') {
                    if (in_spec) return i;
                    if (i + 1 < end && text[i + 1] == '}') {
                        i += 2;
                        continue;
                    }
                    fail("single '}' is not allowed", i);
                }
                ++i;
            }
            if (in_spec) fail("expecting '}'", end);
            return end;
        }

        // Parses one replacement field starting after '{'; returns the offset after its '}'.
        std::size_t field(std::size_t start, std::size_t end) {
            const std::string_view text = tok.text;
            std::size_t i = start;
            int depth = 0;
            char quote = 0;
            while (i < end) {
                const char c = text[i];
                if (c == '\\') fail("expression part cannot include a backslash", i);
                if (quote) {
                    if (c == '\\') {
                        i += 2;
                        continue;
                    }
                    if (c == quote) quote = 0;
                    ++i;
                    continue;
                }
                if (c == '\'' || c == '"') {
                    quote = c;
                } else if (c == '(' || c == '[' || c == '{') {
                    ++depth;
                } else if (c == ')' || c == ']' || c == '}') {
                    if (depth == 0) break;
                    --depth;
                } else if (depth == 0 && c == '!' && !(i + 1 < end && text[i + 1] == '=')) {
                    break;
                } else if (depth == 0 && c == ':') {
                    break;
                } else if (depth == 0 && c == '=' && i + 1 < end && text[i + 1] != '=' && i > start &&
                           std::string_view("=!<>").find(text[i - 1]) == std::string_view::npos) {
                    break;
                } else if (c == '#') {
                    fail("expression part cannot include '#'", i);
                }
                ++i;
            }
            if (i >= end) fail("expecting '}'", i);
            const std::string_view expr_text = text.substr(start, i - start);
            if (expr_text.find_first_not_of(" \t\r\n\f") == std::string_view::npos) {
                fail("empty expression not allowed", start);
            }
            try {
                out.push_back(parse_expression(expr_text, offset_position(tok, start)));
                if (out.back()->kind == ExprKind::Starred) fail("cannot use starred expression here", start);
            } catch (const SyntaxError& e) {
                if (e.message().rfind("f-string:", 0) == 0) throw;
                throw SyntaxError(fmt::format("f-string: {}", e.message()), e.where());
            }
            if (text[i] == '=') {
                ++i;
                while (i < end && (text[i] == ' ' || text[i] == '\t' || text[i] == '\n' || text[i] == '\r')) ++i;
            }
            if (i < end && text[i] == '!') {
                if (i + 1 >= end || std::string_view("sra").find(text[i + 1]) == std::string_view::npos) {
                    fail("invalid conversion character: expected 's', 'r', or 'a'", i + 1);
                }
                i += 2;
            }
            if (i < end && text[i] == ':') i = scan(i + 1, end, true);
            if (i >= end || text[i] != '}') fail("expecting '}'", i);
            return i + 1;
        }
    };

    std::vector<Token> t_;
    std::size_t i_ = 0;
    int depth_ = 0;
};

}  // namespace

Module parse_module(std::string_view source) {
    Parser p(tokenize(source));
    return p.parse_file();
}

std::variant<Module, ParseFailure> try_parse_module(std::string_view source) {
    try {
        return parse_module(source);
    } catch (const SyntaxError& e) {
        return ParseFailure{e.message(), e.where()};
    }
}

ExprPtr parse_expression(std::string_view source, Position origin) {
    LexOptions opt;
    opt.origin = origin;
    opt.bracketed = true;
    Parser p(tokenize(source, opt));
    return p.parse_embedded();
}

}  // namespace apilot::pyparse
