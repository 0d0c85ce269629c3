#include "apilot/common/date.hpp"

#include "apilot/common/error.hpp"

#include <charconv>
#include <cstdlib>
#include <ctime>

#include <fmt/format.h>

namespace apilot {
namespace {

bool parse_fixed_int(std::string_view text, int& out) {
    if (text.empty()) return false;
    for (char c : text) {
        if (c < '0' || c > '9') return false;
    }
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), out);
    return ec == std::errc{} && ptr == text.data() + text.size();
}

std::time_t now_or_epoch_override() {
    if (const char* env = std::getenv("SOURCE_DATE_EPOCH"); env != nullptr && *env != '\0') {
        long long value = 0;
        std::string_view sv(env);
        auto [ptr, ec] = std::from_chars(sv.data(), sv.data() + sv.size(), value);
        if (ec == std::errc{} && ptr == sv.data() + sv.size()) return static_cast<std::time_t>(value);
    }
    return std::time(nullptr);
}

std::tm utc_now() {
    std::time_t t = now_or_epoch_override();
    std::tm tm{};
    gmtime_r(&t, &tm);
    return tm;
}

}  // namespace

Date::Date(std::chrono::year_month_day ymd) {
    if (!ymd.ok()) throw MalformedDate("invalid calendar date");
    days_ = std::chrono::sys_days(ymd);
}

Date Date::parse(std::string_view text) {
    int y = 0;
    int m = 0;
    int d = 0;
    if (text.size() != 10 || text[4] != '-' || text[7] != '-' || !parse_fixed_int(text.substr(0, 4), y) ||
        !parse_fixed_int(text.substr(5, 2), m) || !parse_fixed_int(text.substr(8, 2), d)) {
        throw MalformedDate(fmt::format("expected YYYY-MM-DD, got '{}'", text));
    }
    std::chrono::year_month_day ymd{std::chrono::year{y}, std::chrono::month{static_cast<unsigned>(m)},
                                    std::chrono::day{static_cast<unsigned>(d)}};
    if (!ymd.ok()) throw MalformedDate(fmt::format("no such calendar date '{}'", text));
    return Date(ymd);
}

Date Date::from_days(std::chrono::sys_days days) {
    Date out;
    out.days_ = days;
    return out;
}

std::string Date::to_string() const {
    std::chrono::year_month_day ymd{days_};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

long days_between(const Date& from, const Date& to) {
    return static_cast<long>((to.days_ - from.days_).count());
}

std::string current_timestamp() {
    std::tm tm = utc_now();
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec);
}

std::string current_timestamp_compact() {
    std::tm tm = utc_now();
    return fmt::format("{:04d}{:02d}{:02d}T{:02d}{:02d}{:02d}Z", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                       tm.tm_hour, tm.tm_min, tm.tm_sec);
}

bool is_rfc3339_timestamp(std::string_view text) {
    if (text.size() < 20) return false;
    try {
        Date::parse(text.substr(0, 10));
    } catch (const MalformedDate&) {
        return false;
    }
    if (text[10] != 'T' && text[10] != 't') return false;
    int hh = 0;
    int mm = 0;
    int ss = 0;
    if (text[13] != ':' || text[16] != ':' || !parse_fixed_int(text.substr(11, 2), hh) ||
        !parse_fixed_int(text.substr(14, 2), mm) || !parse_fixed_int(text.substr(17, 2), ss)) {
        return false;
    }
    if (hh > 23 || mm > 59 || ss > 60) return false;
    std::size_t pos = 19;
    if (pos < text.size() && text[pos] == '.') {
        ++pos;
        std::size_t digits = 0;
        while (pos < text.size() && text[pos] >= '0' && text[pos] <= '9') {
            ++pos;
            ++digits;
        }
        if (digits == 0) return false;
    }
    std::string_view zone = text.substr(pos);
    if (zone == "Z" || zone == "z") return true;
    int zh = 0;
    int zm = 0;
    return zone.size() == 6 && (zone[0] == '+' || zone[0] == '-') && zone[3] == ':' &&
           parse_fixed_int(zone.substr(1, 2), zh) && parse_fixed_int(zone.substr(4, 2), zm) && zh <= 23 && zm <= 59;
}

}  // namespace apilot
