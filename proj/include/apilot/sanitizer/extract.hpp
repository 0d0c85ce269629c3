#pragma once

#include "apilot/pyparse/ast.hpp"
#include "apilot/pyparse/parser.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <variant>

namespace apilot::sanitizer {

struct ExtractedSnippet {
    std::string code;
    std::optional<std::string> fence_language_tag;
    int block_index = 0;   // among the complete, non-empty blocks
    int total_blocks = 1;

    friend bool operator==(const ExtractedSnippet&, const ExtractedSnippet&) = default;
};

/// Selects the code of a triple-backtick fenced block in model output.
///
/// Fences follow the Markdown rules: an opening line of three or more
/// backticks (indentation allowed) with an optional info string whose first
/// word is the language tag, closed by a line of at least as many backticks.
/// The fence indentation is removed from the code lines. With several
/// blocks the longest one that parses wins, else the longest one.
///
/// Throws ExtractionFailed when no complete, non-blank block exists; an
/// unterminated fence does not count.
ExtractedSnippet extract_code(std::string_view llm_output);

/// Full parse of the snippet; only syntax errors are failures.
std::variant<pyparse::Module, pyparse::ParseFailure> parse_snippet(const ExtractedSnippet& snippet);

}  // namespace apilot::sanitizer
