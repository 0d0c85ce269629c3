#pragma once

#include "apilot/pyparse/ast.hpp"
#include "apilot/common/error.hpp"

#include <string>
#include <string_view>
#include <vector>

namespace apilot::pyparse {

/// A syntax error with the location of the first offending token.
class SyntaxError : public Error {
public:
    SyntaxError(std::string message, Position where);

    const std::string& message() const { return message_; }
    Position where() const { return where_; }

private:
    std::string message_;
    Position where_;
};

enum class TokKind { Name, Keyword, Number, String, Op, Newline, Indent, Dedent, EndMarker };

struct Token {
    TokKind kind = TokKind::EndMarker;
    std::string text;
    Position begin;
    Position end;
};

struct LexOptions {
    /// Position of the first source byte; used for embedded f-string fields.
    Position origin{1, 0};
    /// Lex as if inside an open bracket: no NEWLINE/INDENT tokens.
    bool bracketed = false;
};

bool is_keyword(std::string_view word);

/// Throws SyntaxError for malformed input (bad literals, broken indentation,
/// unbalanced brackets).
std::vector<Token> tokenize(std::string_view source, const LexOptions& options = {});

}  // namespace apilot::pyparse
