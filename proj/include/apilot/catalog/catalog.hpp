#pragma once

#include "apilot/catalog/types.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace apilot::catalog {

inline constexpr int kSchemaVersion = 1;

/// Immutable collection of outdated-API records.
///
/// Records are kept sorted by (package, api_path, kind, advisory_id) and
/// indexed both by (package, api_path) and by dotted api_path alone; the
/// detector only knows the import path of a call site, not which
/// distribution provides it. Construction rejects duplicate keys.
class ApiCatalog {
public:
    ApiCatalog();
    explicit ApiCatalog(std::vector<OutdatedApiRecord> records, std::string generated_at = {});

    int schema_version() const { return kSchemaVersion; }
    const std::string& generated_at() const { return generated_at_; }
    std::span<const OutdatedApiRecord> records() const { return records_; }
    std::size_t size() const { return records_.size(); }
    bool empty() const { return records_.empty(); }

    std::vector<const OutdatedApiRecord*> find(const PackageId& package, const ApiPath& api) const;
    /// Records under this import path regardless of package.
    std::span<const std::size_t> find_by_path(std::string_view dotted) const;
    const OutdatedApiRecord& at(std::size_t index) const { return records_[index]; }

    /// Cataloged paths whose parent is `module` (used to resolve star imports).
    bool has_member(std::string_view module_dotted, std::string_view name) const;

    ApiCatalog with_timestamp(std::string generated_at) const;

    friend bool operator==(const ApiCatalog& a, const ApiCatalog& b) {
        return a.generated_at_ == b.generated_at_ && a.records_ == b.records_;
    }

private:
    std::string generated_at_;
    std::vector<OutdatedApiRecord> records_;
    std::map<std::pair<PackageId, ApiPath>, std::vector<std::size_t>> by_package_;
    std::unordered_map<std::string, std::vector<std::size_t>> by_path_;
};

/// All records for (package, api). With a user version, patched records are
/// kept only when that version lies in an affected range; deprecated and
/// usage-modified records are version independent and always kept.
std::vector<OutdatedApiRecord> catalog_query(const ApiCatalog& catalog, const PackageId& package,
                                             const ApiPath& api, const std::optional<Version>& user_version);

/// Days from deprecation to removal, or nullopt while the API is not removed.
/// Throws WrongKind for non-deprecated records.
std::optional<long> grace_period(const OutdatedApiRecord& record);

/// New catalog containing `records` on top of `catalog`; a record whose key
/// collides with an existing one replaces it.
ApiCatalog merge_into(const ApiCatalog& catalog, std::span<const OutdatedApiRecord> records);

void catalog_save(const ApiCatalog& catalog, std::ostream& out);
void catalog_save(const ApiCatalog& catalog, const std::filesystem::path& path);
/// Throws SchemaMismatch or CorruptRecord (message names the record).
ApiCatalog catalog_load(std::istream& in);
ApiCatalog catalog_load(const std::filesystem::path& path);
std::string catalog_to_string(const ApiCatalog& catalog);
ApiCatalog catalog_from_string(std::string_view text);

}  // namespace apilot::catalog
