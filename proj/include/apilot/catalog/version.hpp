#pragma once

#include <compare>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::catalog {

/// A package release version restricted to its numeric release segment.
///
/// Only the leading dotted run of integers takes part in ordering; anything
/// after it (rc1, .post1, .dev0, local labels) is kept in `original_text` and
/// otherwise ignored. Missing trailing components compare as zero, so "2.6"
/// and "2.6.0" are equal.
class Version {
public:
    Version() : release_{0}, original_text_("0") {}

    /// Throws MalformedVersion when the text has no leading integer.
    static Version parse(std::string_view text);

    const std::vector<std::uint64_t>& release() const { return release_; }
    const std::string& original_text() const { return original_text_; }

    /// Dotted release only, e.g. "1.0.4" for "1.0.4rc1".
    std::string render() const;

    friend std::strong_ordering operator<=>(const Version& a, const Version& b);
    friend bool operator==(const Version& a, const Version& b) { return (a <=> b) == 0; }

private:
    std::vector<std::uint64_t> release_;
    std::string original_text_;
};

inline Version parse_version(std::string_view text) { return Version::parse(text); }

/// Half-open interval [introduced, fixed); an absent `fixed` means unbounded.
struct VersionRange {
    Version introduced;
    std::optional<Version> fixed;

    /// Throws InvariantViolation when fixed <= introduced.
    void validate() const;
    bool contains(const Version& v) const;

    /// Structural equality: bounds must also agree on their original text.
    friend bool operator==(const VersionRange& a, const VersionRange& b) {
        auto same_text = [](const std::optional<Version>& x, const std::optional<Version>& y) {
            return x.has_value() == y.has_value() && (!x || x->original_text() == y->original_text());
        };
        return a.introduced.original_text() == b.introduced.original_text() && same_text(a.fixed, b.fixed);
    }
};

/// True iff some range holds `v`.
bool version_in_ranges(const Version& v, std::span<const VersionRange> ranges);

}  // namespace apilot::catalog
