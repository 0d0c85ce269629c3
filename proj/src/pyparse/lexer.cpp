#include "apilot/pyparse/lexer.hpp"

#include <algorithm>
#include <array>

#include <fmt/format.h>

namespace apilot::pyparse {

SyntaxError::SyntaxError(std::string message, Position where)
    : Error(fmt::format("line {}, col {}: {}", where.line, where.col + 1, message)),
      message_(std::move(message)),
      where_(where) {}

namespace {

constexpr std::array<std::string_view, 35> kKeywords = {
    "False", "None",   "True",    "and",      "as",   "assert", "async",  "await",    "break",
    "class", "continue", "def",   "del",      "elif", "else",   "except", "finally",  "for",
    "from",  "global", "if",      "import",   "in",   "is",     "lambda", "nonlocal", "not",
    "or",    "pass",   "raise",   "return",   "try",  "while",  "with",   "yield"};

// Longest operators first so a greedy scan picks them.
constexpr std::array<std::string_view, 47> kOperators = {
    "**=", "//=", ">>=", "<<=", "...", "!=", "**", "//", ">>", "<<", "<=", ">=", "==", "->", "+=", "-=",
    "*=",  "/=",  "%=",  "&=",  "|=",  "^=", "@=", ":=", "+",  "-",  "*",  "/",  "%",  "@",  "&",  "|",
    "^",   "~",   "<",   ">",   "(",   ")",  "[",  "]",  "{",  "}",  ",",  ":",  ".",  ";",  "="};

bool ident_start(unsigned char c) {
    return c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80;
}
bool ident_char(unsigned char c) { return ident_start(c) || (c >= '0' && c <= '9'); }
bool is_digit(char c) { return c >= '0' && c <= '9'; }

bool valid_string_prefix(std::string_view p) {
    std::string lower;
    for (char c : p) lower.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    static constexpr std::array<std::string_view, 10> ok = {"", "r", "u", "f", "b", "fr", "rf", "br", "rb"};
    return std::find(ok.begin(), ok.end(), lower) != ok.end();
}

class Lexer {
public:
    Lexer(std::string_view src, const LexOptions& opt) : src_(src), opt_(opt) {
        if (opt_.bracketed) brackets_.push_back({'\0', {}});
    }

    std::vector<Token> run() {
        while (true) {
            if (at_line_start_ && brackets_.empty()) {
                if (!handle_indentation()) break;
                continue;
            }
            if (pos_ >= src_.size()) break;
            const char c = src_[pos_];
            if (c == ' ' || c == '\t' || c == '\f') {
                ++pos_;
            } else if (c == '#') {
                while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
            } else if (c == '\\') {
                continuation();
            } else if (c == '\n' || c == '\r') {
                const Position at = here();
                consume_newline();
                if (brackets_.empty() && !at_line_start_) {
                    emit(TokKind::Newline, "", at, at);
                }
                if (brackets_.empty()) at_line_start_ = true;
            } else {
                lex_token();
            }
        }
        finish();
        return std::move(out_);
    }

private:
    Position here() const { return at(pos_); }

    Position at(std::size_t offset) const {
        Position p{line_ + opt_.origin.line - 1, static_cast<int>(offset - line_start_)};
        if (line_ == 1) p.col += opt_.origin.col;
        return p;
    }

    [[noreturn]] void fail(std::string msg, Position where) const { throw SyntaxError(std::move(msg), where); }

    void emit(TokKind kind, std::string text, Position b, Position e) {
        out_.push_back(Token{kind, std::move(text), b, e});
    }

    void consume_newline() {
        if (src_[pos_] == '\r' && pos_ + 1 < src_.size() && src_[pos_ + 1] == '\n') ++pos_;
        ++pos_;
        ++line_;
        line_start_ = pos_;
    }

    void continuation() {
        const Position where = here();
        ++pos_;
        if (pos_ >= src_.size()) fail("unexpected EOF while parsing", where);
        if (src_[pos_] != '\n' && src_[pos_] != '\r') {
            fail("unexpected character after line continuation character", where);
        }
        consume_newline();
        if (pos_ >= src_.size()) fail("unexpected EOF while parsing", where);
    }

    // Returns false at end of input.
    bool handle_indentation() {
        int col = 0;
        int alt = 0;
        std::size_t p = pos_;
        while (p < src_.size()) {
            const char c = src_[p];
            if (c == ' ') {
                ++col;
                ++alt;
            } else if (c == '\t') {
                col = (col / 8 + 1) * 8;
                ++alt;
            } else if (c == '\f') {
                col = alt = 0;
            } else {
                break;
            }
            ++p;
        }
        if (p >= src_.size()) {
            pos_ = p;
            return false;
        }
        const char c = src_[p];
        if (c == '#' || c == '\n' || c == '\r') {
            // blank or comment-only line
            pos_ = p;
            while (pos_ < src_.size() && src_[pos_] != '\n' && src_[pos_] != '\r') ++pos_;
            if (pos_ < src_.size()) consume_newline();
            return pos_ < src_.size();
        }
        if (c == '\\') {
            // a continuation at line start joins with the next line before indenting
            pos_ = p;
            continuation();
            return true;
        }
        pos_ = p;
        at_line_start_ = false;
        const Position where = here();
        if (col > indents_.back()) {
            if (alt <= alt_indents_.back()) fail("inconsistent use of tabs and spaces in indentation", where);
            indents_.push_back(col);
            alt_indents_.push_back(alt);
            emit(TokKind::Indent, "", {where.line, 0}, where);
        } else {
            while (col < indents_.back()) {
                indents_.pop_back();
                alt_indents_.pop_back();
                emit(TokKind::Dedent, "", where, where);
            }
            if (col != indents_.back()) fail("unindent does not match any outer indentation level", where);
            if (alt != alt_indents_.back()) fail("inconsistent use of tabs and spaces in indentation", where);
        }
        return true;
    }

    void lex_token() {
        const std::size_t start = pos_;
        const Position b = here();
        const auto uc = static_cast<unsigned char>(src_[pos_]);

        if (ident_start(uc)) {
            std::size_t p = pos_;
            while (p < src_.size() && ident_char(static_cast<unsigned char>(src_[p]))) ++p;
            if (p < src_.size() && (src_[p] == '\'' || src_[p] == '"') && p - start <= 2 &&
                valid_string_prefix(src_.substr(start, p - start))) {
                lex_string(start, p);
                return;
            }
            pos_ = p;
            std::string word(src_.substr(start, p - start));
            const TokKind k = is_keyword(word) ? TokKind::Keyword : TokKind::Name;
            emit(k, std::move(word), b, here());
            return;
        }
        if (src_[pos_] == '\'' || src_[pos_] == '"') {
            lex_string(start, pos_);
            return;
        }
        if (is_digit(src_[pos_]) || (src_[pos_] == '.' && pos_ + 1 < src_.size() && is_digit(src_[pos_ + 1]))) {
            lex_number();
            return;
        }
        for (std::string_view op : kOperators) {
            if (src_.substr(pos_, op.size()) == op) {
                pos_ += op.size();
                track_bracket(op[0], b);
                emit(TokKind::Op, std::string(op), b, here());
                return;
            }
        }
        fail("invalid syntax", b);
    }

    void track_bracket(char c, Position where) {
        if (c == '(' || c == '[' || c == '{') {
            brackets_.push_back({c, where});
            return;
        }
        if (c != ')' && c != ']' && c != '}') return;
        const char open = c == ')' ? '(' : c == ']' ? '[' : '{';
        if (brackets_.empty() || brackets_.back().first == '\0') fail(fmt::format("unmatched '{}'", c), where);
        if (brackets_.back().first != open) {
            fail(fmt::format("closing parenthesis '{}' does not match opening parenthesis '{}'", c,
                             brackets_.back().first),
                 where);
        }
        brackets_.pop_back();
    }

    void lex_string(std::size_t start, std::size_t quote_pos) {
        const Position b = at(start);
        const char q = src_[quote_pos];
        const bool triple = src_.substr(quote_pos, 3) == std::string(3, q);
        std::size_t p = quote_pos + (triple ? 3 : 1);
        while (true) {
            if (p >= src_.size()) {
                pos_ = p;
                fail(triple ? fmt::format("unterminated triple-quoted string literal (detected at line {})",
                                          line_ + opt_.origin.line - 1)
                            : fmt::format("unterminated string literal (detected at line {})",
                                          line_ + opt_.origin.line - 1),
                     b);
            }
            const char c = src_[p];
            if (c == '\\') {
                if (p + 1 < src_.size() && (src_[p + 1] == '\n' || src_[p + 1] == '\r')) {
                    pos_ = p + 1;
                    consume_newline();
                    p = pos_;
                } else {
                    p += 2;
                }
                continue;
            }
            if (c == '\n' || c == '\r') {
                if (!triple) fail(fmt::format("unterminated string literal (detected at line {})", b.line), b);
                pos_ = p;
                consume_newline();
                p = pos_;
                continue;
            }
            if (c == q) {
                if (!triple) {
                    ++p;
                    break;
                }
                if (src_.substr(p, 3) == std::string(3, q)) {
                    p += 3;
                    break;
                }
            }
            ++p;
        }
        pos_ = p;
        emit(TokKind::String, std::string(src_.substr(start, p - start)), b, here());
    }

    // Reads digits with single underscores between them; returns false when
    // an underscore is misplaced.
    bool digits(std::size_t& p, auto&& accept) const {
        if (p >= src_.size() || !accept(src_[p])) return false;
        while (p < src_.size()) {
            if (accept(src_[p])) {
                ++p;
            } else if (src_[p] == '_' && p + 1 < src_.size() && accept(src_[p + 1])) {
                ++p;
            } else {
                break;
            }
        }
        return true;
    }

    void lex_number() {
        const std::size_t start = pos_;
        const Position b = here();
        std::size_t p = pos_;
        auto dec = [](char c) { return is_digit(c); };
        auto bad = [&](std::string_view what) { fail(fmt::format("invalid {} literal", what), b); };
        // A keyword may directly follow a number ("1if x else 2").
        auto after_literal = [&](std::string_view what) {
            if (p >= src_.size() || !ident_char(static_cast<unsigned char>(src_[p]))) return;
            const std::string_view rest = src_.substr(p);
            for (std::string_view kw : {"and", "else", "for", "if", "in", "is", "not", "or"}) {
                if (rest.substr(0, kw.size()) == kw) return;
            }
            bad(what);
        };

        if (src_[p] == '0' && p + 1 < src_.size() && std::string_view("xXoObB").find(src_[p + 1]) != npos_) {
            const char base = static_cast<char>(src_[p + 1] | 0x20);
            std::string_view name = base == 'x' ? "hexadecimal" : base == 'o' ? "octal" : "binary";
            p += 2;
            if (p < src_.size() && src_[p] == '_') ++p;
            auto accept = [base](char c) {
                if (base == 'x') return is_digit(c) || ((c | 0x20) >= 'a' && (c | 0x20) <= 'f');
                if (base == 'o') return c >= '0' && c <= '7';
                return c == '0' || c == '1';
            };
            if (!digits(p, accept)) bad(name);
            after_literal(name);
            pos_ = p;
            emit(TokKind::Number, std::string(src_.substr(start, p - start)), b, here());
            return;
        }

        bool is_int = true;
        if (src_[p] != '.') {
            if (!digits(p, dec)) bad("decimal");
        }
        if (p < src_.size() && src_[p] == '.') {
            is_int = false;
            ++p;
            if (p < src_.size() && is_digit(src_[p]) && !digits(p, dec)) bad("decimal");
        }
        if (p < src_.size() && (src_[p] == 'e' || src_[p] == 'E')) {
            const std::size_t e_at = p;
            ++p;
            const bool signed_exp = p < src_.size() && (src_[p] == '+' || src_[p] == '-');
            if (signed_exp) ++p;
            if (p < src_.size() && is_digit(src_[p])) {
                is_int = false;
                if (!digits(p, dec)) bad("decimal");
            } else if (signed_exp) {
                bad("decimal");
            } else {
                p = e_at;
            }
        }
        if (p < src_.size() && (src_[p] == 'j' || src_[p] == 'J')) {
            ++p;
            is_int = false;
        }
        after_literal("decimal");
        const std::string_view text = src_.substr(start, p - start);
        if (is_int && text.size() > 1 && text[0] == '0' &&
            text.find_first_not_of("0_") != std::string_view::npos) {
            fail("leading zeros in decimal integer literals are not permitted; use an 0o prefix for octal integers",
                 b);
        }
        pos_ = p;
        emit(TokKind::Number, std::string(text), b, here());
    }

    void finish() {
        const Position end = here();
        if (brackets_.size() > (opt_.bracketed ? 1u : 0u)) {
            fail(fmt::format("'{}' was never closed", brackets_.back().first), brackets_.back().second);
        }
        if (!opt_.bracketed) {
            if (!out_.empty() && out_.back().kind != TokKind::Newline && out_.back().kind != TokKind::Dedent &&
                !at_line_start_) {
                emit(TokKind::Newline, "", end, end);
            }
            for (std::size_t i = 1; i < indents_.size(); ++i) emit(TokKind::Dedent, "", end, end);
        }
        emit(TokKind::EndMarker, "", end, end);
    }

    static constexpr std::size_t npos_ = std::string_view::npos;

    std::string_view src_;
    LexOptions opt_;
    std::size_t pos_ = 0;
    int line_ = 1;
    std::size_t line_start_ = 0;
    bool at_line_start_ = true;
    std::vector<int> indents_{0};
    std::vector<int> alt_indents_{0};
    std::vector<std::pair<char, Position>> brackets_;
    std::vector<Token> out_;
};

}  // namespace

bool is_keyword(std::string_view word) {
    return std::find(kKeywords.begin(), kKeywords.end(), word) != kKeywords.end();
}

std::vector<Token> tokenize(std::string_view source, const LexOptions& options) {
    return Lexer(source, options).run();
}

}  // namespace apilot::pyparse
