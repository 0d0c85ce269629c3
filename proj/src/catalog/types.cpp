#include "apilot/catalog/types.hpp"

#include "apilot/common/error.hpp"

#include <fmt/format.h>

namespace apilot::catalog {

PackageId::PackageId(std::string registry, std::string_view name)
    : registry_(std::move(registry)), name_(normalize_name(name)) {
    if (name_.empty()) throw InvalidIdentifier("package name must not be empty");
}

std::string PackageId::normalize_name(std::string_view name) {
    std::string out;
    out.reserve(name.size());
    bool pending_sep = false;
    for (char c : name) {
        if (c == '-' || c == '_' || c == '.') {
            pending_sep = !out.empty();
            continue;
        }
        if (c == ' ' || c == '\t') continue;
        if (pending_sep) {
            out.push_back('-');
            pending_sep = false;
        }
        out.push_back(static_cast<char>(c >= 'A' && c <= 'Z' ? c - 'A' + 'a' : c));
    }
    return out;
}

bool is_identifier(std::string_view text) {
    if (text.empty()) return false;
    auto head_ok = [](unsigned char c) { return c == '_' || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || c >= 0x80; };
    auto tail_ok = [&](unsigned char c) { return head_ok(c) || (c >= '0' && c <= '9'); };
    if (!head_ok(static_cast<unsigned char>(text.front()))) return false;
    for (char c : text.substr(1)) {
        if (!tail_ok(static_cast<unsigned char>(c))) return false;
    }
    return true;
}

ApiPath::ApiPath(std::vector<std::string> segments) : segments_(std::move(segments)) {
    if (segments_.empty()) throw InvalidIdentifier("API path needs at least one segment");
    for (const auto& s : segments_) {
        if (!is_identifier(s)) throw InvalidIdentifier(fmt::format("'{}' is not an identifier", s));
    }
}

ApiPath ApiPath::parse(std::string_view dotted) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    while (true) {
        std::size_t dot = dotted.find('.', start);
        parts.emplace_back(dotted.substr(start, dot == std::string_view::npos ? dotted.npos : dot - start));
        if (dot == std::string_view::npos) break;
        start = dot + 1;
    }
    if (dotted.empty()) throw InvalidIdentifier("empty API path");
    for (const auto& p : parts) {
        if (!is_identifier(p)) throw InvalidIdentifier(fmt::format("malformed API path '{}'", dotted));
    }
    return ApiPath(std::move(parts));
}

std::string ApiPath::dotted() const {
    return fmt::format("{}", fmt::join(segments_, "."));
}

ApiPath ApiPath::child(std::string_view segment) const {
    auto segs = segments_;
    segs.emplace_back(segment);
    return ApiPath(std::move(segs));
}

ApiPath ApiPath::concat(const ApiPath& tail) const {
    auto segs = segments_;
    segs.insert(segs.end(), tail.segments_.begin(), tail.segments_.end());
    return ApiPath(std::move(segs));
}

ApiPath ApiPath::prefix(std::size_t n) const {
    return ApiPath(std::vector<std::string>(segments_.begin(), segments_.begin() + static_cast<long>(n)));
}

bool ApiPath::starts_with(const ApiPath& other) const {
    if (other.size() > size()) return false;
    for (std::size_t i = 0; i < other.size(); ++i) {
        if (segments_[i] != other.segments_[i]) return false;
    }
    return true;
}

std::string_view to_string(ApiKind kind) {
    switch (kind) {
        case ApiKind::deprecated: return "deprecated";
        case ApiKind::patched: return "patched";
        case ApiKind::usage_modified: return "usage_modified";
    }
    return "?";
}

std::string_view to_string(UsageChange change) {
    switch (change) {
        case UsageChange::removed: return "removed";
        case UsageChange::params_changed: return "params_changed";
        case UsageChange::return_changed: return "return_changed";
    }
    return "?";
}

std::optional<ApiKind> api_kind_from_string(std::string_view text) {
    if (text == "deprecated") return ApiKind::deprecated;
    if (text == "patched") return ApiKind::patched;
    if (text == "usage_modified") return ApiKind::usage_modified;
    return std::nullopt;
}

std::optional<UsageChange> usage_change_from_string(std::string_view text) {
    if (text == "removed") return UsageChange::removed;
    if (text == "params_changed") return UsageChange::params_changed;
    if (text == "return_changed") return UsageChange::return_changed;
    return std::nullopt;
}

const std::string& OutdatedApiRecord::advisory_id() const {
    static const std::string empty;
    if (const auto* p = patched()) return p->advisory_id;
    return empty;
}

void OutdatedApiRecord::validate() const {
    if (api_path.empty()) throw InvariantViolation("record has an empty api_path");
    if (package.name().empty()) throw InvariantViolation("record has an empty package name");
    if (const auto* p = patched()) {
        if (p->advisory_id.empty()) throw InvariantViolation("patched record without advisory_id");
        if (p->affected_ranges.empty()) throw InvariantViolation("patched record without affected ranges");
        for (const auto& r : p->affected_ranges) r.validate();
        if (p->cvss && !(*p->cvss >= 0.0 && *p->cvss <= 10.0)) {
            throw InvariantViolation(fmt::format("cvss {} outside [0, 10]", *p->cvss));
        }
    } else if (const auto* u = usage_modified()) {
        if (u->change == UsageChange::removed && u->new_signature) {
            throw InvariantViolation("removed usage change must not carry a new_signature");
        }
    } else if (const auto* d = deprecated()) {
        if (d->removed_date && *d->removed_date < d->deprecated_date) {
            throw InvariantViolation("removed_date precedes deprecated_date");
        }
    }
}

RecordKey key_of(const OutdatedApiRecord& record) {
    return RecordKey{record.package, record.api_path, record.kind(), record.advisory_id()};
}

}  // namespace apilot::catalog
