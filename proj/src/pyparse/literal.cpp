#include "apilot/pyparse/literal.hpp"

#include <fmt/format.h>

namespace apilot::pyparse {
namespace {

void append_utf8(std::string& out, std::uint32_t cp) {
    if (cp < 0x80) {
        out.push_back(static_cast<char>(cp));
    } else if (cp < 0x800) {
        out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else if (cp < 0x10000) {
        out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    } else {
        out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
        out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
    }
}

int hex_value(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    return -1;
}

// Reads exactly n hex digits at body[i]; -1 when malformed.
long read_hex(std::string_view body, std::size_t i, std::size_t n) {
    if (i + n > body.size()) return -1;
    long v = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const int d = hex_value(body[i + k]);
        if (d < 0) return -1;
        v = v * 16 + d;
    }
    return v;
}

// Next code point from UTF-8 text; advances i. Invalid bytes map to themselves.
std::uint32_t next_code_point(std::string_view s, std::size_t& i, std::size_t& len) {
    const auto b0 = static_cast<unsigned char>(s[i]);
    len = 1;
    std::uint32_t cp = b0;
    if (b0 >= 0xF0) {
        len = 4;
        cp = b0 & 0x07;
    } else if (b0 >= 0xE0) {
        len = 3;
        cp = b0 & 0x0F;
    } else if (b0 >= 0xC0) {
        len = 2;
        cp = b0 & 0x1F;
    }
    if (i + len > s.size()) {
        len = 1;
        cp = b0;
    } else {
        for (std::size_t k = 1; k < len; ++k) cp = (cp << 6) | (static_cast<unsigned char>(s[i + k]) & 0x3F);
    }
    i += len;
    return cp;
}

}  // namespace

std::vector<std::string_view> split_string_pieces(std::string_view joined) {
    std::vector<std::string_view> out;
    std::size_t i = 0;
    while (i < joined.size()) {
        while (i < joined.size() && joined[i] == ' ') ++i;
        if (i >= joined.size()) break;
        const std::size_t start = i;
        while (i < joined.size() && joined[i] != '\'' && joined[i] != '"') ++i;
        if (i >= joined.size()) break;
        const char q = joined[i];
        const bool triple = joined.substr(i, 3) == std::string(3, q);
        i += triple ? 3 : 1;
        while (i < joined.size()) {
            if (joined[i] == '\\') {
                i += 2;
                continue;
            }
            if (joined[i] == q && (!triple || joined.substr(i, 3) == std::string(3, q))) {
                i += triple ? 3 : 1;
                break;
            }
            ++i;
        }
        out.push_back(joined.substr(start, std::min(i, joined.size()) - start));
    }
    return out;
}

std::optional<DecodedString> decode_string_piece(std::string_view token) {
    std::size_t plen = 0;
    bool raw = false;
    DecodedString out;
    while (plen < token.size() && token[plen] != '\'' && token[plen] != '"') {
        const char c = static_cast<char>(token[plen] | 0x20);
        raw = raw || c == 'r';
        out.is_bytes = out.is_bytes || c == 'b';
        out.is_fstring = out.is_fstring || c == 'f';
        ++plen;
    }
    if (out.is_fstring || plen >= token.size()) return std::nullopt;
    const char q = token[plen];
    const std::size_t qlen = token.substr(plen, 3) == std::string(3, q) ? 3 : 1;
    if (token.size() < plen + 2 * qlen) return std::nullopt;
    const std::string_view body = token.substr(plen + qlen, token.size() - plen - 2 * qlen);

    if (raw) {
        out.value = std::string(body);
        return out;
    }
    auto put = [&](std::uint32_t cp) {
        if (out.is_bytes) {
            out.value.push_back(static_cast<char>(cp & 0xFF));
        } else {
            append_utf8(out.value, cp);
        }
    };
    for (std::size_t i = 0; i < body.size();) {
        const char c = body[i];
        if (c != '\\' || i + 1 >= body.size()) {
            out.value.push_back(c);
            ++i;
            continue;
        }
        const char e = body[i + 1];
        i += 2;
        switch (e) {
            case '\n': break;
            case '\r':
                if (i < body.size() && body[i] == '\n') ++i;
                break;
            case '\\': out.value.push_back('\\'); break;
            case '\'': out.value.push_back('\''); break;
            case '"': out.value.push_back('"'); break;
            case 'a': out.value.push_back('\a'); break;
            case 'b': out.value.push_back('\b'); break;
            case 'f': out.value.push_back('\f'); break;
            case 'n': out.value.push_back('\n'); break;
            case 'r': out.value.push_back('\r'); break;
            case 't': out.value.push_back('\t'); break;
            case 'v': out.value.push_back('\v'); break;
            case 'x': {
                const long v = read_hex(body, i, 2);
                if (v < 0) return std::nullopt;
                put(static_cast<std::uint32_t>(v));
                i += 2;
                break;
            }
            case 'u':
            case 'U': {
                if (out.is_bytes) {
                    out.value.push_back('\\');
                    out.value.push_back(e);
                    break;
                }
                const std::size_t n = e == 'u' ? 4 : 8;
                const long v = read_hex(body, i, n);
                if (v < 0 || v > 0x10FFFF) return std::nullopt;
                put(static_cast<std::uint32_t>(v));
                i += n;
                break;
            }
            case 'N':
                if (out.is_bytes) {
                    out.value.push_back('\\');
                    out.value.push_back('N');
                    break;
                }
                return std::nullopt;
            default:
                if (e >= '0' && e <= '7') {
                    std::uint32_t v = static_cast<std::uint32_t>(e - '0');
                    for (int k = 0; k < 2 && i < body.size() && body[i] >= '0' && body[i] <= '7'; ++k, ++i) {
                        v = v * 8 + static_cast<std::uint32_t>(body[i] - '0');
                    }
                    put(v);
                } else {
                    out.value.push_back('\\');
                    out.value.push_back(e);
                }
        }
    }
    return out;
}

std::optional<std::string> escape_error(std::string_view token) {
    std::size_t plen = 0;
    bool raw = false;
    bool bytes = false;
    while (plen < token.size() && token[plen] != '\'' && token[plen] != '"') {
        const char c = static_cast<char>(token[plen] | 0x20);
        raw = raw || c == 'r';
        bytes = bytes || c == 'b';
        ++plen;
    }
    if (raw || plen >= token.size()) return std::nullopt;
    const char q = token[plen];
    const std::size_t qlen = token.substr(plen, 3) == std::string(3, q) ? 3 : 1;
    if (token.size() < plen + 2 * qlen) return std::nullopt;
    const std::string_view body = token.substr(plen + qlen, token.size() - plen - 2 * qlen);
    for (std::size_t i = 0; i + 1 < body.size(); ++i) {
        if (body[i] != '\\') continue;
        const char e = body[i + 1];
        const std::size_t at = i + 2;
        ++i;
        if (e == 'x') {
            if (read_hex(body, at, 2) < 0) {
                return bytes ? std::string("(value error) invalid \\x escape")
                             : std::string("(unicode error) truncated \\xXX escape");
            }
        } else if (bytes) {
            continue;
        } else if (e == 'u' || e == 'U') {
            const std::size_t n = e == 'u' ? 4 : 8;
            const long v = read_hex(body, at, n);
            if (v < 0) return fmt::format("(unicode error) truncated \\{}{} escape", e, std::string(n, 'X'));
            if (v > 0x10FFFF) return std::string("(unicode error) illegal Unicode character");
        } else if (e == 'N') {
            const std::size_t close = body.find('}', at);
            if (at >= body.size() || body[at] != '{' || close == std::string_view::npos || close == at + 1) {
                return std::string("(unicode error) malformed \\N character escape");
            }
            i = close;
        }
    }
    return std::nullopt;
}

std::string repr_string(const DecodedString& s) {
    const bool has_single = s.value.find('\'') != std::string::npos;
    const bool has_double = s.value.find('"') != std::string::npos;
    const char q = has_single && !has_double ? '"' : '\'';
    std::string out;
    if (s.is_bytes) out.push_back('b');
    out.push_back(q);
    auto escape_ascii = [&](std::uint32_t c) {
        if (c == '\\') {
            out += "\\\\";
        } else if (c == static_cast<unsigned char>(q)) {
            out.push_back('\\');
            out.push_back(q);
        } else if (c == '\t') {
            out += "\\t";
        } else if (c == '\n') {
            out += "\\n";
        } else if (c == '\r') {
            out += "\\r";
        } else if (c < 0x20 || c == 0x7F) {
            out += fmt::format("\\x{:02x}", c);
        } else {
            return false;
        }
        return true;
    };
    if (s.is_bytes) {
        for (char ch : s.value) {
            const auto c = static_cast<unsigned char>(ch);
            if (escape_ascii(c)) continue;
            if (c >= 0x80) {
                out += fmt::format("\\x{:02x}", c);
            } else {
                out.push_back(static_cast<char>(c));
            }
        }
    } else {
        for (std::size_t i = 0; i < s.value.size();) {
            const std::size_t start = i;
            std::size_t len = 0;
            const std::uint32_t cp = next_code_point(s.value, i, len);
            if (cp < 0x80) {
                if (!escape_ascii(cp)) out.push_back(static_cast<char>(cp));
            } else if (cp < 0xA0) {
                out += fmt::format("\\x{:02x}", cp);
            } else if (cp >= 0xD800 && cp < 0xE000) {
                out += fmt::format("\\u{:04x}", cp);
            } else {
                out.append(s.value, start, len);
            }
        }
    }
    out.push_back(q);
    return out;
}

}  // namespace apilot::pyparse
