#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::pyparse {

/// Splits the space-joined source of adjacent string tokens back into tokens.
std::vector<std::string_view> split_string_pieces(std::string_view joined);

struct DecodedString {
    std::string value;  // UTF-8 for text, raw bytes for bytes literals
    bool is_bytes = false;
    bool is_fstring = false;
};

/// Decodes one string token (prefix, quotes and escapes). Returns nullopt for
/// f-strings and for \N{...} escapes, which need the Unicode name table.
std::optional<DecodedString> decode_string_piece(std::string_view token);

/// Message for the first malformed escape in a string token, if any.
/// Unicode character names in \N{...} are checked for shape only.
std::optional<std::string> escape_error(std::string_view token);

/// Python repr() of a decoded value.
std::string repr_string(const DecodedString& s);

}  // namespace apilot::pyparse
