#pragma once

#include "apilot/catalog/version.hpp"
#include "apilot/common/date.hpp"

#include <compare>
#include <optional>
#include <string>
#include <string_view>
#include <tuple>
#include <variant>
#include <vector>

namespace apilot::catalog {

/// Registry-qualified package name. Names are lowercased and runs of
/// '-', '_' and '.' fold to a single '-', so "scikit_learn" and
/// "Scikit-Learn" denote the same package.
class PackageId {
public:
    PackageId() = default;
    PackageId(std::string registry, std::string_view name);

    static PackageId pypi(std::string_view name) { return PackageId("pypi", name); }
    static std::string normalize_name(std::string_view name);

    const std::string& registry() const { return registry_; }
    const std::string& name() const { return name_; }

    friend bool operator==(const PackageId&, const PackageId&) = default;
    friend auto operator<=>(const PackageId&, const PackageId&) = default;

private:
    std::string registry_ = "pypi";
    std::string name_;
};

bool is_identifier(std::string_view text);

/// Dotted path to a module, class, function or constant, e.g. pandas.read_pickle.
class ApiPath {
public:
    ApiPath() = default;
    explicit ApiPath(std::vector<std::string> segments);

    /// Throws InvalidIdentifier for empty input or a non-identifier segment.
    static ApiPath parse(std::string_view dotted);

    const std::vector<std::string>& segments() const { return segments_; }
    std::size_t size() const { return segments_.size(); }
    bool empty() const { return segments_.empty(); }
    const std::string& front() const { return segments_.front(); }
    const std::string& back() const { return segments_.back(); }

    std::string dotted() const;
    ApiPath child(std::string_view segment) const;
    ApiPath concat(const ApiPath& tail) const;
    /// First `n` segments.
    ApiPath prefix(std::size_t n) const;
    bool starts_with(const ApiPath& other) const;

    friend bool operator==(const ApiPath&, const ApiPath&) = default;
    friend auto operator<=>(const ApiPath&, const ApiPath&) = default;

private:
    std::vector<std::string> segments_;
};

enum class ApiKind { deprecated, patched, usage_modified };
enum class UsageChange { removed, params_changed, return_changed };

std::string_view to_string(ApiKind kind);
std::string_view to_string(UsageChange change);
std::optional<ApiKind> api_kind_from_string(std::string_view text);
std::optional<UsageChange> usage_change_from_string(std::string_view text);

struct DeprecatedInfo {
    Date deprecated_date;
    std::optional<Date> removed_date;
    std::optional<Version> deprecated_in;
    std::optional<Version> removed_in;
    std::string evidence_commit;

    friend bool operator==(const DeprecatedInfo&, const DeprecatedInfo&) = default;
};

struct PatchedInfo {
    std::string advisory_id;
    std::vector<VersionRange> affected_ranges;
    std::string bug_type;
    std::optional<double> cvss;

    friend bool operator==(const PatchedInfo&, const PatchedInfo&) = default;
};

struct UsageModifiedInfo {
    UsageChange change = UsageChange::removed;
    std::string old_signature;
    std::optional<std::string> new_signature;
    std::string evidence_commit;
    Date evidence_date;

    friend bool operator==(const UsageModifiedInfo&, const UsageModifiedInfo&) = default;
};

using RecordPayload = std::variant<DeprecatedInfo, PatchedInfo, UsageModifiedInfo>;

struct OutdatedApiRecord {
    ApiPath api_path;
    PackageId package;
    RecordPayload payload;

    ApiKind kind() const { return static_cast<ApiKind>(payload.index()); }
    /// Empty for non-patched records.
    const std::string& advisory_id() const;

    const DeprecatedInfo* deprecated() const { return std::get_if<DeprecatedInfo>(&payload); }
    const PatchedInfo* patched() const { return std::get_if<PatchedInfo>(&payload); }
    const UsageModifiedInfo* usage_modified() const { return std::get_if<UsageModifiedInfo>(&payload); }

    /// Throws InvariantViolation describing the first broken invariant.
    void validate() const;

    friend bool operator==(const OutdatedApiRecord&, const OutdatedApiRecord&) = default;
};

/// Identity of a record inside a catalog.
struct RecordKey {
    PackageId package;
    ApiPath api_path;
    ApiKind kind;
    std::string advisory_id;

    friend bool operator==(const RecordKey&, const RecordKey&) = default;
    friend auto operator<=>(const RecordKey&, const RecordKey&) = default;
};

RecordKey key_of(const OutdatedApiRecord& record);

}  // namespace apilot::catalog
