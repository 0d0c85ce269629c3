#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace apilot::pyparse {

/// 1-based line, 0-based byte column.
struct Position {
    int line = 1;
    int col = 0;

    friend bool operator==(const Position&, const Position&) = default;
    friend auto operator<=>(const Position&, const Position&) = default;
};

struct Span {
    Position begin;
    Position end;

    friend bool operator==(const Span&, const Span&) = default;
};

enum class ExprKind {
    Name,
    Constant,
    JoinedStr,
    Attribute,
    Call,
    Subscript,
    Slice,
    BinOp,
    UnaryOp,
    BoolOp,
    Compare,
    IfExp,
    Lambda,
    NamedExpr,
    Tuple,
    List,
    Set,
    Dict,
    ListComp,
    SetComp,
    GeneratorExp,
    DictComp,
    Starred,
    DoubleStarred,
    Keyword,
    Await,
    Yield,
    YieldFrom,
    // match/case patterns
    MatchValue,
    MatchSingleton,
    MatchAs,
    MatchStar,
    MatchOr,
    MatchSequence,
    MatchMapping,
    MatchClass,
};

enum class ConstKind { none, true_, false_, ellipsis, number, string, bytes };

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

struct Comprehension {
    ExprPtr target;
    ExprPtr iter;
    std::vector<ExprPtr> ifs;
    bool is_async = false;
};

enum class ParamKind { positional_only, positional_or_keyword, var_positional, keyword_only, var_keyword };

struct Param {
    std::string name;
    ParamKind kind = ParamKind::positional_or_keyword;
    ExprPtr annotation;
    ExprPtr default_value;
    Span span;
};

struct Arguments {
    std::vector<Param> params;
};

// Child layout per kind (null entries mark absent optional parts):
//   Name            text = identifier
//   Constant        text = literal source text, constant = subkind
//   JoinedStr       text = literal source text, items = replacement-field expressions
//   Attribute       items[0] = value, text = attribute name
//   Call            items[0] = callee, items[1..] = args (Starred, DoubleStarred, Keyword or plain)
//   Subscript       items[0] = value, items[1] = index
//   Slice           items = {lower, upper, step}
//   BinOp/UnaryOp   text = operator, items = operands
//   BoolOp          text = "and"/"or", items = operands
//   Compare         items = operands, ops = operators between them
//   IfExp           items = {body, test, orelse}
//   Lambda          args, items[0] = body
//   NamedExpr       items = {target, value}
//   Tuple/List/Set  items = elements
//   Dict            items = key, value pairs; key null for **expr
//   *Comp/GenExp    items = {elt} or {key, value}, generators
//   Starred etc.    items[0] = operand; Yield may have no operand
//   Keyword         text = name, items[0] = value
//   MatchValue      items[0] = value expression
//   MatchSingleton  text = None/True/False
//   MatchAs         items = {pattern or null}, text = bound name ("" for wildcard)
//   MatchStar       text = bound name ("" for *_)
//   MatchOr/Seq     items = sub-patterns
//   MatchMapping    items = key, pattern pairs; text = **rest name or ""
//   MatchClass      items[0] = class expr, then positional patterns, then Keyword(pattern)
struct Expr {
    ExprKind kind = ExprKind::Name;
    Span span;
    std::string text;
    ConstKind constant = ConstKind::none;
    std::vector<ExprPtr> items;
    std::vector<std::string> ops;
    std::vector<Comprehension> generators;
    std::unique_ptr<Arguments> args;
    bool parenthesized = false;
};

enum class StmtKind {
    FunctionDef,
    ClassDef,
    Return,
    Delete,
    Assign,
    AugAssign,
    AnnAssign,
    TypeAlias,
    For,
    While,
    If,
    With,
    Match,
    Raise,
    Try,
    Assert,
    Import,
    ImportFrom,
    Global,
    Nonlocal,
    Expr,
    Pass,
    Break,
    Continue,
};

struct Stmt;
using StmtPtr = std::unique_ptr<Stmt>;

struct Alias {
    std::string name;  // dotted for Import, single identifier (or "*") for ImportFrom
    std::optional<std::string> asname;
    Span span;
};

struct WithItem {
    ExprPtr context;
    ExprPtr target;
};

struct ExceptHandler {
    ExprPtr type;
    std::optional<std::string> name;
    std::vector<StmtPtr> body;
    Span span;
    bool star = false;
};

struct MatchCase {
    ExprPtr pattern;
    ExprPtr guard;
    std::vector<StmtPtr> body;
};

// Field use per kind:
//   FunctionDef  name, is_async, decorators, args, returns, body
//   ClassDef     name, decorators, bases (plain or Keyword), body
//   Return       value (may be null)
//   Delete       targets
//   Assign       targets (one per '='), value
//   AugAssign    targets[0], name = operator without '=', value
//   AnnAssign    targets[0], annotation, value (may be null)
//   TypeAlias    targets[0] (Name), value
//   For          is_async, targets[0], value = iterable, body, orelse
//   While/If     value = test, body, orelse
//   With         is_async, items, body
//   Match        value = subject, cases
//   Raise        value = exception, cause
//   Try          body, handlers, orelse, finalbody
//   Assert       value = test, cause = message
//   Import       names
//   ImportFrom   module, level, names
//   Global etc.  identifiers
//   Expr         value
struct Stmt {
    StmtKind kind = StmtKind::Pass;
    Span span;
    std::string name;
    bool is_async = false;
    std::vector<ExprPtr> decorators;
    std::unique_ptr<Arguments> args;
    ExprPtr returns;
    std::vector<ExprPtr> bases;
    std::vector<ExprPtr> targets;
    ExprPtr value;
    ExprPtr annotation;
    ExprPtr cause;
    std::vector<WithItem> items;
    std::vector<StmtPtr> body;
    std::vector<StmtPtr> orelse;
    std::vector<StmtPtr> finalbody;
    std::vector<ExceptHandler> handlers;
    std::vector<MatchCase> cases;
    std::vector<Alias> names;
    std::vector<std::string> identifiers;
    std::string module;
    int level = 0;
};

struct Module {
    std::vector<StmtPtr> body;
};

/// Decoded value of a plain (non-f, non-bytes) string Constant, with adjacent
/// pieces concatenated; nullopt for any other expression.
std::optional<std::string> string_value(const Expr& e);

/// Dotted text of a Name/Attribute chain rooted at a Name ("a.b.c"), or nullopt.
std::optional<std::string> dotted_name(const Expr& e);

/// Innermost Name of an Attribute chain (the `a` in a.b.c), or null.
const Expr* chain_root(const Expr& e);

}  // namespace apilot::pyparse
