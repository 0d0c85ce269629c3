#include "apilot/sanitizer/extract.hpp"
#include "apilot/common/error.hpp"

#include <fmt/format.h>

#include <vector>

namespace apilot::sanitizer {

namespace {

struct Line {
    std::string_view text;
    std::size_t indent = 0;  // leading spaces and tabs
};

std::vector<Line> split_lines(std::string_view text) {
    std::vector<Line> out;
    std::size_t start = 0;
    while (start <= text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        auto line = text.substr(start, end - start);
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto indent = line.find_first_not_of(" \t");
        out.push_back({line, indent == std::string_view::npos ? line.size() : indent});
        if (end == text.size()) break;
        start = end + 1;
    }
    return out;
}

std::size_t backtick_run(std::string_view s) {
    std::size_t n = 0;
    while (n < s.size() && s[n] == '`') ++n;
    return n;
}

std::string_view trim(std::string_view s) {
    const auto b = s.find_first_not_of(" \t");
    if (b == std::string_view::npos) return {};
    const auto e = s.find_last_not_of(" \t");
    return s.substr(b, e - b + 1);
}

struct Block {
    std::string code;
    std::optional<std::string> tag;
};

std::string dedent(std::string_view line, std::size_t amount) {
    std::size_t i = 0;
    while (i < amount && i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
    return std::string(line.substr(i));
}

}  // namespace

ExtractedSnippet extract_code(std::string_view llm_output) {
    const auto lines = split_lines(llm_output);
    std::vector<Block> blocks;
    std::optional<std::size_t> unterminated;
    for (std::size_t i = 0; i < lines.size(); ++i) {
        const auto body = lines[i].text.substr(lines[i].indent);
        const auto ticks = backtick_run(body);
        if (ticks < 3) continue;
        const auto info = trim(body.substr(ticks));
        if (info.find('`') != std::string_view::npos) continue;  // inline code, not a fence
        std::size_t close = i + 1;
        for (; close < lines.size(); ++close) {
            const auto t = trim(lines[close].text);
            if (t.size() >= ticks && backtick_run(t) == t.size()) break;
        }
        if (close == lines.size()) {
            unterminated = i + 1;
            break;
        }
        Block block;
        if (!info.empty()) block.tag = std::string(info.substr(0, info.find_first_of(" \t{")));
        for (std::size_t k = i + 1; k < close; ++k) {
            if (k > i + 1) block.code += '\n';
            block.code += dedent(lines[k].text, lines[i].indent);
        }
        if (block.code.find_first_not_of(" \t\n") != std::string::npos) {
            blocks.push_back(std::move(block));
        }
        i = close;
    }
    if (blocks.empty()) {
        if (unterminated) throw ExtractionFailed(fmt::format("fence opened on line {} is never closed", *unterminated));
        throw ExtractionFailed("no fenced code block in output");
    }

    std::optional<std::size_t> best_parsing;
    std::size_t longest = 0;
    for (std::size_t k = 0; k < blocks.size(); ++k) {
        if (blocks[k].code.size() > blocks[longest].code.size()) longest = k;
        if (best_parsing && blocks[k].code.size() <= blocks[*best_parsing].code.size()) continue;
        if (std::holds_alternative<pyparse::Module>(pyparse::try_parse_module(blocks[k].code))) best_parsing = k;
    }
    const auto chosen = best_parsing.value_or(longest);
    return ExtractedSnippet{std::move(blocks[chosen].code), std::move(blocks[chosen].tag), static_cast<int>(chosen),
                            static_cast<int>(blocks.size())};
}

std::variant<pyparse::Module, pyparse::ParseFailure> parse_snippet(const ExtractedSnippet& snippet) {
    return pyparse::try_parse_module(snippet.code);
}

}  // namespace apilot::sanitizer
