#include "apilot/catalog/version.hpp"

#include "apilot/common/error.hpp"

#include <algorithm>
#include <charconv>

#include <fmt/format.h>

namespace apilot::catalog {

Version Version::parse(std::string_view text) {
    std::size_t pos = 0;
    while (pos < text.size() && (text[pos] == ' ' || text[pos] == '\t')) ++pos;
    if (pos < text.size() && (text[pos] == 'v' || text[pos] == 'V')) ++pos;

    auto is_digit = [&](std::size_t i) { return i < text.size() && text[i] >= '0' && text[i] <= '9'; };
    if (!is_digit(pos)) throw MalformedVersion(fmt::format("no leading release number in '{}'", text));

    Version out;
    out.release_.clear();
    while (is_digit(pos)) {
        std::size_t end = pos;
        while (is_digit(end)) ++end;
        std::uint64_t component = 0;
        auto [ptr, ec] = std::from_chars(text.data() + pos, text.data() + end, component);
        if (ec != std::errc{}) throw MalformedVersion(fmt::format("release component out of range in '{}'", text));
        (void)ptr;
        out.release_.push_back(component);
        pos = end;
        // A dot continues the release only when another number follows it.
        if (pos < text.size() && text[pos] == '.' && is_digit(pos + 1)) {
            ++pos;
        } else {
            break;
        }
    }
    out.original_text_ = std::string(text);
    return out;
}

std::string Version::render() const {
    return fmt::format("{}", fmt::join(release_, "."));
}

std::strong_ordering operator<=>(const Version& a, const Version& b) {
    const std::size_t n = std::max(a.release_.size(), b.release_.size());
    for (std::size_t i = 0; i < n; ++i) {
        const std::uint64_t x = i < a.release_.size() ? a.release_[i] : 0;
        const std::uint64_t y = i < b.release_.size() ? b.release_[i] : 0;
        if (x != y) return x <=> y;
    }
    return std::strong_ordering::equal;
}

void VersionRange::validate() const {
    if (fixed && !(introduced < *fixed)) {
        throw InvariantViolation(fmt::format("version range [{}, {}) is empty", introduced.original_text(),
                                             fixed->original_text()));
    }
}

bool VersionRange::contains(const Version& v) const {
    return introduced <= v && (!fixed || v < *fixed);
}

bool version_in_ranges(const Version& v, std::span<const VersionRange> ranges) {
    return std::any_of(ranges.begin(), ranges.end(), [&](const VersionRange& r) { return r.contains(v); });
}

}  // namespace apilot::catalog
