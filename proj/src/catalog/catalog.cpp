#include "apilot/catalog/catalog.hpp"

#include "apilot/common/error.hpp"

#include <algorithm>

#include <fmt/format.h>

namespace apilot::catalog {

ApiCatalog::ApiCatalog() : generated_at_(current_timestamp()) {}

ApiCatalog::ApiCatalog(std::vector<OutdatedApiRecord> records, std::string generated_at)
    : generated_at_(generated_at.empty() ? current_timestamp() : std::move(generated_at)),
      records_(std::move(records)) {
    std::sort(records_.begin(), records_.end(),
              [](const OutdatedApiRecord& a, const OutdatedApiRecord& b) { return key_of(a) < key_of(b); });
    for (std::size_t i = 0; i < records_.size(); ++i) {
        if (i > 0 && key_of(records_[i - 1]) == key_of(records_[i])) {
            throw InvariantViolation(fmt::format("duplicate catalog record {} {} {}", records_[i].package.name(),
                                                 records_[i].api_path.dotted(), to_string(records_[i].kind())));
        }
        by_package_[{records_[i].package, records_[i].api_path}].push_back(i);
        by_path_[records_[i].api_path.dotted()].push_back(i);
    }
}

std::vector<const OutdatedApiRecord*> ApiCatalog::find(const PackageId& package, const ApiPath& api) const {
    std::vector<const OutdatedApiRecord*> out;
    if (auto it = by_package_.find({package, api}); it != by_package_.end()) {
        for (std::size_t i : it->second) out.push_back(&records_[i]);
    }
    return out;
}

std::span<const std::size_t> ApiCatalog::find_by_path(std::string_view dotted) const {
    if (auto it = by_path_.find(std::string(dotted)); it != by_path_.end()) return it->second;
    return {};
}

bool ApiCatalog::has_member(std::string_view module_dotted, std::string_view name) const {
    std::string key;
    key.reserve(module_dotted.size() + name.size() + 1);
    key.append(module_dotted).append(".").append(name);
    return by_path_.contains(key);
}

ApiCatalog ApiCatalog::with_timestamp(std::string generated_at) const {
    return ApiCatalog(records_, std::move(generated_at));
}

std::vector<OutdatedApiRecord> catalog_query(const ApiCatalog& catalog, const PackageId& package,
                                             const ApiPath& api, const std::optional<Version>& user_version) {
    std::vector<OutdatedApiRecord> out;
    for (const OutdatedApiRecord* r : catalog.find(package, api)) {
        if (const auto* p = r->patched(); p != nullptr && user_version &&
                                          !version_in_ranges(*user_version, p->affected_ranges)) {
            continue;
        }
        out.push_back(*r);
    }
    return out;
}

std::optional<long> grace_period(const OutdatedApiRecord& record) {
    const auto* d = record.deprecated();
    if (d == nullptr) {
        throw WrongKind(fmt::format("grace period needs a deprecated record, got {}", to_string(record.kind())));
    }
    if (!d->removed_date) return std::nullopt;
    return days_between(d->deprecated_date, *d->removed_date);
}

ApiCatalog merge_into(const ApiCatalog& catalog, std::span<const OutdatedApiRecord> records) {
    std::map<RecordKey, OutdatedApiRecord> merged;
    for (const auto& r : catalog.records()) merged.insert_or_assign(key_of(r), r);
    for (const auto& r : records) {
        r.validate();
        merged.insert_or_assign(key_of(r), r);
    }
    std::vector<OutdatedApiRecord> out;
    out.reserve(merged.size());
    for (auto& [key, record] : merged) out.push_back(std::move(record));
    return ApiCatalog(std::move(out), catalog.generated_at());
}

}  // namespace apilot::catalog
