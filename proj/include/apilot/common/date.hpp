#pragma once

#include <chrono>
#include <compare>
#include <string>
#include <string_view>

namespace apilot {

/// Calendar date without time zone, rendered as YYYY-MM-DD.
class Date {
public:
    Date() = default;
    explicit Date(std::chrono::year_month_day ymd);

    /// Throws MalformedDate unless `text` is a valid YYYY-MM-DD date.
    static Date parse(std::string_view text);
    static Date from_days(std::chrono::sys_days days);

    std::chrono::sys_days days() const { return days_; }
    std::string to_string() const;

    /// Whole calendar days from `from` to `to` (negative when `to` is earlier).
    friend long days_between(const Date& from, const Date& to);

    friend bool operator==(const Date&, const Date&) = default;
    friend auto operator<=>(const Date&, const Date&) = default;

private:
    std::chrono::sys_days days_{};
};

/// RFC-3339 UTC timestamp for "now". Honors SOURCE_DATE_EPOCH so that
/// reproducible builds of catalogs and reports are possible.
std::string current_timestamp();

/// Compact timestamp usable in directory names, e.g. 20240601T120000Z.
std::string current_timestamp_compact();

/// Accepts YYYY-MM-DDTHH:MM:SS[.fff](Z|+HH:MM|-HH:MM).
bool is_rfc3339_timestamp(std::string_view text);

}  // namespace apilot
