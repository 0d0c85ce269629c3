#include "apilot/pyparse/unparse.hpp"
#include "apilot/pyparse/literal.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>

#include <fmt/format.h>

namespace apilot::pyparse {
namespace {

// Binding strength, weakest first.
enum Prec : int {
    kTuple = 0,
    kYield,
    kTest,
    kOr,
    kAnd,
    kNot,
    kCmp,
    kBor,
    kBxor,
    kBand,
    kShift,
    kArith,
    kTerm,
    kFactor,
    kPower,
    kAwait,
    kAtom,
};

int binop_prec(std::string_view op) {
    if (op == "|") return kBor;
    if (op == "^") return kBxor;
    if (op == "&") return kBand;
    if (op == "<<" || op == ">>") return kShift;
    if (op == "+" || op == "-") return kArith;
    if (op == "**") return kPower;
    return kTerm;
}

// Multiplies a decimal digit string by `base` and adds `digit`.
void mul_add(std::string& dec, int base, int digit) {
    int carry = digit;
    for (auto it = dec.rbegin(); it != dec.rend(); ++it) {
        const int v = (*it - '0') * base + carry;
        *it = static_cast<char>('0' + v % 10);
        carry = v / 10;
    }
    while (carry > 0) {
        dec.insert(dec.begin(), static_cast<char>('0' + carry % 10));
        carry /= 10;
    }
}

std::string python_float_repr(double v, bool imaginary) {
    if (std::isinf(v)) return "1e309";
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::scientific);
    std::string_view sci(buf, static_cast<std::size_t>(res.ptr - buf));
    const std::size_t e_pos = sci.find('e');
    std::string digits;
    for (char c : sci.substr(0, e_pos)) {
        if (c != '.') digits.push_back(c);
    }
    int exp = std::atoi(std::string(sci.substr(e_pos + 1)).c_str());
    while (digits.size() > 1 && digits.back() == '0') digits.pop_back();

    std::string out;
    if (exp >= -4 && exp < 16) {
        if (exp < 0) {
            out = "0." + std::string(static_cast<std::size_t>(-exp - 1), '0') + digits;
        } else if (static_cast<std::size_t>(exp) + 1 >= digits.size()) {
            out = digits + std::string(static_cast<std::size_t>(exp) + 1 - digits.size(), '0');
            if (!imaginary) out += ".0";
        } else {
            out = digits.substr(0, static_cast<std::size_t>(exp) + 1) + "." +
                  digits.substr(static_cast<std::size_t>(exp) + 1);
        }
    } else {
        out = digits.substr(0, 1);
        if (digits.size() > 1) out += "." + digits.substr(1);
        out += fmt::format("e{}{:02d}", exp < 0 ? '-' : '+', std::abs(exp));
    }
    return out;
}

class Unparser {
public:
    std::string out;

    void expr(const Expr& e, int ctx) {
        switch (e.kind) {
            case ExprKind::Name: out += e.text; break;
            case ExprKind::Constant: constant(e); break;
            case ExprKind::JoinedStr: out += e.text; break;
            case ExprKind::Attribute: {
                const Expr& v = *e.items[0];
                expr(v, kAtom);
                // `1.real` would lex as a float
                if (v.kind == ExprKind::Constant && v.constant == ConstKind::number &&
                    canonical_number(v.text).find_first_of(".ej") == std::string::npos) {
                    out += ' ';
                }
                out += '.';
                out += e.text;
                break;
            }
            case ExprKind::Call: {
                expr(*e.items[0], kAtom);
                out += '(';
                // f(a=1, *b) is the same call as f(*b, a=1)
                bool first = true;
                for (const bool named : {false, true}) {
                    for (std::size_t i = 1; i < e.items.size(); ++i) {
                        const ExprKind k = e.items[i]->kind;
                        if ((k == ExprKind::Keyword || k == ExprKind::DoubleStarred) != named) continue;
                        if (!first) out += ',';
                        first = false;
                        expr(*e.items[i], kTest);
                    }
                }
                out += ')';
                break;
            }
            case ExprKind::Keyword:
                out += e.text;
                out += '=';
                expr(*e.items[0], kTest);
                break;
            case ExprKind::Starred:
                out += '*';
                expr(*e.items[0], kBor);
                break;
            case ExprKind::DoubleStarred:
                out += "**";
                expr(*e.items[0], kBor);
                break;
            case ExprKind::Subscript: {
                expr(*e.items[0], kAtom);
                out += '[';
                const Expr& idx = *e.items[1];
                if (idx.kind == ExprKind::Tuple && !idx.items.empty()) {
                    sequence(idx.items);
                    if (idx.items.size() == 1) out += ',';
                } else {
                    expr(idx, kTuple);
                }
                out += ']';
                break;
            }
            case ExprKind::Slice:
                if (e.items[0]) expr(*e.items[0], kTest);
                out += ':';
                if (e.items[1]) expr(*e.items[1], kTest);
                if (e.items[2]) {
                    out += ':';
                    expr(*e.items[2], kTest);
                }
                break;
            case ExprKind::BinOp: {
                const int p = binop_prec(e.text);
                const bool right_assoc = e.text == "**";
                wrap(p, ctx, [&] {
                    expr(*e.items[0], right_assoc ? p + 1 : p);
                    out += e.text;
                    expr(*e.items[1], right_assoc ? p : p + 1);
                });
                break;
            }
            case ExprKind::UnaryOp: {
                const int p = e.text == "not" ? kNot : kFactor;
                wrap(p, ctx, [&] {
                    out += e.text;
                    if (e.text == "not") out += ' ';
                    expr(*e.items[0], p);
                });
                break;
            }
            case ExprKind::BoolOp: {
                const int p = e.text == "and" ? kAnd : kOr;
                wrap(p, ctx, [&] {
                    for (std::size_t i = 0; i < e.items.size(); ++i) {
                        if (i > 0) out += " " + e.text + " ";
                        expr(*e.items[i], p + 1);
                    }
                });
                break;
            }
            case ExprKind::Compare:
                wrap(kCmp, ctx, [&] {
                    expr(*e.items[0], kCmp + 1);
                    for (std::size_t i = 0; i < e.ops.size(); ++i) {
                        const bool word = e.ops[i][0] >= 'a' && e.ops[i][0] <= 'z';
                        out += word ? " " + e.ops[i] + " " : e.ops[i];
                        expr(*e.items[i + 1], kCmp + 1);
                    }
                });
                break;
            case ExprKind::IfExp:
                wrap(kTest, ctx, [&] {
                    expr(*e.items[0], kTest + 1);
                    out += " if ";
                    expr(*e.items[1], kTest + 1);
                    out += " else ";
                    expr(*e.items[2], kTest);
                });
                break;
            case ExprKind::Lambda:
                wrap(kTest, ctx, [&] {
                    out += "lambda";
                    if (e.args && !e.args->params.empty()) {
                        out += ' ';
                        params(*e.args);
                    }
                    out += ':';
                    expr(*e.items[0], kTest);
                });
                break;
            case ExprKind::NamedExpr:
                out += '(';
                expr(*e.items[0], kAtom);
                out += ":=";
                expr(*e.items[1], kTest);
                out += ')';
                break;
            case ExprKind::Tuple:
                out += '(';
                sequence(e.items);
                if (e.items.size() == 1) out += ',';
                out += ')';
                break;
            case ExprKind::List:
                out += '[';
                sequence(e.items);
                out += ']';
                break;
            case ExprKind::Set:
                out += '{';
                sequence(e.items);
                out += '}';
                break;
            case ExprKind::Dict:
                out += '{';
                for (std::size_t i = 0; i + 1 < e.items.size(); i += 2) {
                    if (i > 0) out += ',';
                    if (e.items[i]) {
                        expr(*e.items[i], kTest);
                        out += ':';
                        expr(*e.items[i + 1], kTest);
                    } else {
                        out += "**";
                        expr(*e.items[i + 1], kBor);
                    }
                }
                out += '}';
                break;
            case ExprKind::ListComp: comprehension(e, "[", "]"); break;
            case ExprKind::SetComp: comprehension(e, "{", "}"); break;
            case ExprKind::GeneratorExp: comprehension(e, "(", ")"); break;
            case ExprKind::DictComp: comprehension(e, "{", "}"); break;
            case ExprKind::Await:
                wrap(kAwait, ctx, [&] {
                    out += "await ";
                    expr(*e.items[0], kAtom);
                });
                break;
            case ExprKind::Yield:
                wrap(kYield, ctx, [&] {
                    out += "yield";
                    if (!e.items.empty()) {
                        out += ' ';
                        expr(*e.items[0], kTuple);
                    }
                });
                break;
            case ExprKind::YieldFrom:
                wrap(kYield, ctx, [&] {
                    out += "yield from ";
                    expr(*e.items[0], kTest);
                });
                break;
            case ExprKind::MatchValue: expr(*e.items[0], kAtom); break;
            case ExprKind::MatchSingleton: out += e.text; break;
            case ExprKind::MatchAs:
                if (!e.items.empty() && e.items[0]) {
                    expr(*e.items[0], kAtom);
                    out += " as ";
                }
                out += e.text.empty() ? "_" : e.text;
                break;
            case ExprKind::MatchStar:
                out += '*';
                out += e.text.empty() ? "_" : e.text;
                break;
            case ExprKind::MatchOr:
                for (std::size_t i = 0; i < e.items.size(); ++i) {
                    if (i > 0) out += '|';
                    expr(*e.items[i], kAtom);
                }
                break;
            case ExprKind::MatchSequence:
                out += '[';
                sequence(e.items);
                out += ']';
                break;
            case ExprKind::MatchMapping:
                out += '{';
                for (std::size_t i = 0; i + 1 < e.items.size(); i += 2) {
                    if (i > 0) out += ',';
                    expr(*e.items[i], kAtom);
                    out += ':';
                    expr(*e.items[i + 1], kAtom);
                }
                if (!e.text.empty()) {
                    if (!e.items.empty()) out += ',';
                    out += "**" + e.text;
                }
                out += '}';
                break;
            case ExprKind::MatchClass:
                expr(*e.items[0], kAtom);
                out += '(';
                for (std::size_t i = 1; i < e.items.size(); ++i) {
                    if (i > 1) out += ',';
                    expr(*e.items[i], kAtom);
                }
                out += ')';
                break;
        }
    }

private:
    template <class F>
    void wrap(int prec, int ctx, F&& body) {
        const bool parens = prec < ctx;
        if (parens) out += '(';
        body();
        if (parens) out += ')';
    }

    void sequence(const std::vector<ExprPtr>& items) {
        for (std::size_t i = 0; i < items.size(); ++i) {
            if (i > 0) out += ',';
            expr(*items[i], kTest);
        }
    }

    void comprehension(const Expr& e, std::string_view open, std::string_view close) {
        out += open;
        expr(*e.items[0], kTest);
        if (e.kind == ExprKind::DictComp) {
            out += ':';
            expr(*e.items[1], kTest);
        }
        for (const auto& g : e.generators) {
            out += g.is_async ? " async for " : " for ";
            expr(*g.target, kTuple);
            out += " in ";
            expr(*g.iter, kTest + 1);
            for (const auto& cond : g.ifs) {
                out += " if ";
                expr(*cond, kTest + 1);
            }
        }
        out += close;
    }

    void params(const Arguments& args) {
        bool first = true;
        bool star_written = false;
        bool slash_pending = false;
        for (const auto& p : args.params) {
            if (slash_pending && p.kind != ParamKind::positional_only) {
                out += ",/";
                slash_pending = false;
            }
            if (!first) out += ',';
            first = false;
            if (p.kind == ParamKind::keyword_only && !star_written) {
                out += "*,";
                star_written = true;
            }
            if (p.kind == ParamKind::var_positional) {
                out += '*';
                star_written = true;
            }
            if (p.kind == ParamKind::var_keyword) out += "**";
            out += p.name;
            if (p.annotation) {
                out += ':';
                expr(*p.annotation, kTest);
            }
            if (p.default_value) {
                out += '=';
                expr(*p.default_value, kTest);
            }
            if (p.kind == ParamKind::positional_only) slash_pending = true;
        }
        if (slash_pending) out += ",/";
    }

    void constant(const Expr& e) {
        switch (e.constant) {
            case ConstKind::none: out += "None"; return;
            case ConstKind::true_: out += "True"; return;
            case ConstKind::false_: out += "False"; return;
            case ConstKind::ellipsis: out += "..."; return;
            case ConstKind::number: out += canonical_number(e.text); return;
            case ConstKind::string:
            case ConstKind::bytes: {
                DecodedString joined;
                joined.is_bytes = e.constant == ConstKind::bytes;
                for (auto piece : split_string_pieces(e.text)) {
                    auto decoded = decode_string_piece(piece);
                    if (!decoded) {
                        out += e.text;
                        return;
                    }
                    joined.value += decoded->value;
                }
                out += repr_string(joined);
                return;
            }
        }
    }
};

}  // namespace

std::string canonical_number(std::string_view literal) {
    std::string text;
    for (char c : literal) {
        if (c != '_') text.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    }
    if (text.size() > 2 && text[0] == '0' && (text[1] == 'x' || text[1] == 'o' || text[1] == 'b')) {
        const int base = text[1] == 'x' ? 16 : text[1] == 'o' ? 8 : 2;
        std::string dec = "0";
        for (std::size_t i = 2; i < text.size(); ++i) {
            const char c = text[i];
            mul_add(dec, base, c <= '9' ? c - '0' : c - 'a' + 10);
        }
        return dec;
    }
    const bool imaginary = !text.empty() && text.back() == 'j';
    if (imaginary) text.pop_back();
    if (!imaginary && text.find_first_of(".e") == std::string::npos) {
        const std::size_t nz = text.find_first_not_of('0');
        return nz == std::string::npos ? "0" : text.substr(nz);
    }
    const double v = std::strtod(text.c_str(), nullptr);
    return python_float_repr(v, imaginary) + (imaginary ? "j" : "");
}

std::string canonical(const Expr& e) {
    Unparser u;
    u.expr(e, kTuple);
    return std::move(u.out);
}

}  // namespace apilot::pyparse
