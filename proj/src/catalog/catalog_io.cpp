#include "apilot/catalog/catalog.hpp"

#include "apilot/common/error.hpp"

#include <fstream>
#include <initializer_list>
#include <set>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace apilot::catalog {
namespace {

using Json = nlohmann::ordered_json;

Json range_to_json(const VersionRange& r) {
    Json j;
    j["introduced"] = r.introduced.original_text();
    if (r.fixed) j["fixed"] = r.fixed->original_text();
    return j;
}

Json record_to_json(const OutdatedApiRecord& r) {
    Json j;
    j["registry"] = r.package.registry();
    j["package"] = r.package.name();
    j["api_path"] = r.api_path.dotted();
    j["kind"] = std::string(to_string(r.kind()));
    if (const auto* d = r.deprecated()) {
        j["deprecated_date"] = d->deprecated_date.to_string();
        if (d->removed_date) j["removed_date"] = d->removed_date->to_string();
        if (d->deprecated_in) j["deprecated_in"] = d->deprecated_in->original_text();
        if (d->removed_in) j["removed_in"] = d->removed_in->original_text();
        j["evidence_commit"] = d->evidence_commit;
    } else if (const auto* p = r.patched()) {
        j["advisory_id"] = p->advisory_id;
        Json ranges = Json::array();
        for (const auto& range : p->affected_ranges) ranges.push_back(range_to_json(range));
        j["affected_ranges"] = std::move(ranges);
        j["bug_type"] = p->bug_type;
        if (p->cvss) j["cvss"] = *p->cvss;
    } else if (const auto* u = r.usage_modified()) {
        j["change"] = std::string(to_string(u->change));
        j["old_signature"] = u->old_signature;
        if (u->new_signature) j["new_signature"] = *u->new_signature;
        j["evidence_commit"] = u->evidence_commit;
        j["evidence_date"] = u->evidence_date.to_string();
    }
    return j;
}

/// Field access helpers that turn every shape problem into a CorruptRecord
/// naming the offending record.
class RecordReader {
public:
    RecordReader(const Json& j, std::string label) : j_(j), label_(std::move(label)) {}

    [[noreturn]] void fail(std::string_view what) const {
        throw CorruptRecord(fmt::format("{}: {}", label_, what));
    }

    void allow_only(std::initializer_list<std::string_view> fields) const {
        std::set<std::string_view> allowed(fields);
        for (const auto& [key, value] : j_.items()) {
            if (!allowed.contains(key)) fail(fmt::format("unknown field '{}'", key));
        }
    }

    std::string str(const char* field) const {
        auto it = j_.find(field);
        if (it == j_.end() || !it->is_string()) fail(fmt::format("missing or non-string field '{}'", field));
        return it->get<std::string>();
    }

    std::optional<std::string> opt_str(const char* field) const {
        auto it = j_.find(field);
        if (it == j_.end() || it->is_null()) return std::nullopt;
        if (!it->is_string()) fail(fmt::format("field '{}' must be a string", field));
        return it->get<std::string>();
    }

    Date date(const char* field) const { return to_date(str(field), field); }

    std::optional<Date> opt_date(const char* field) const {
        auto s = opt_str(field);
        if (!s) return std::nullopt;
        return to_date(*s, field);
    }

    std::optional<Version> opt_version(const char* field) const {
        auto s = opt_str(field);
        if (!s) return std::nullopt;
        return to_version(*s, field);
    }

    Version to_version(const std::string& text, std::string_view field) const {
        try {
            return Version::parse(text);
        } catch (const MalformedVersion& e) {
            fail(fmt::format("field '{}': {}", field, e.what()));
        }
    }

    const Json& raw(const char* field) const {
        auto it = j_.find(field);
        if (it == j_.end()) fail(fmt::format("missing field '{}'", field));
        return *it;
    }

    bool has(const char* field) const { return j_.contains(field) && !j_.at(field).is_null(); }

private:
    Date to_date(const std::string& text, std::string_view field) const {
        try {
            return Date::parse(text);
        } catch (const MalformedDate& e) {
            fail(fmt::format("field '{}': {}", field, e.what()));
        }
    }

    const Json& j_;
    std::string label_;
};

OutdatedApiRecord record_from_json(const Json& j, std::size_t index) {
    if (!j.is_object()) throw CorruptRecord(fmt::format("record #{}: not an object", index));
    std::string label = fmt::format("record #{}", index);
    if (j.contains("api_path") && j["api_path"].is_string()) {
        label += fmt::format(" ({})", j["api_path"].get<std::string>());
    }
    RecordReader in(j, label);

    OutdatedApiRecord r;
    const std::string kind_text = in.str("kind");
    const auto kind = api_kind_from_string(kind_text);
    if (!kind) in.fail(fmt::format("unknown kind '{}'", kind_text));

    try {
        r.package = PackageId(in.str("registry"), in.str("package"));
        r.api_path = ApiPath::parse(in.str("api_path"));
    } catch (const InvalidIdentifier& e) {
        in.fail(e.what());
    }
    if (r.package.registry() != "pypi") in.fail(fmt::format("unsupported registry '{}'", r.package.registry()));

    switch (*kind) {
        case ApiKind::deprecated: {
            in.allow_only({"registry", "package", "api_path", "kind", "deprecated_date", "removed_date",
                           "deprecated_in", "removed_in", "evidence_commit"});
            DeprecatedInfo d;
            d.deprecated_date = in.date("deprecated_date");
            d.removed_date = in.opt_date("removed_date");
            d.deprecated_in = in.opt_version("deprecated_in");
            d.removed_in = in.opt_version("removed_in");
            d.evidence_commit = in.str("evidence_commit");
            r.payload = std::move(d);
            break;
        }
        case ApiKind::patched: {
            in.allow_only({"registry", "package", "api_path", "kind", "advisory_id", "affected_ranges", "bug_type",
                           "cvss"});
            PatchedInfo p;
            p.advisory_id = in.str("advisory_id");
            const Json& ranges = in.raw("affected_ranges");
            if (!ranges.is_array()) in.fail("affected_ranges must be an array");
            for (const auto& rj : ranges) {
                if (!rj.is_object()) in.fail("affected range must be an object");
                RecordReader rr(rj, label + " affected range");
                rr.allow_only({"introduced", "fixed"});
                VersionRange range;
                if (rr.has("introduced")) range.introduced = rr.to_version(rr.str("introduced"), "introduced");
                range.fixed = rr.opt_version("fixed");
                p.affected_ranges.push_back(std::move(range));
            }
            p.bug_type = in.opt_str("bug_type").value_or("");
            if (in.has("cvss")) {
                const Json& c = in.raw("cvss");
                if (!c.is_number()) in.fail("cvss must be a number");
                p.cvss = c.get<double>();
            }
            r.payload = std::move(p);
            break;
        }
        case ApiKind::usage_modified: {
            in.allow_only({"registry", "package", "api_path", "kind", "change", "old_signature", "new_signature",
                           "evidence_commit", "evidence_date"});
            UsageModifiedInfo u;
            const std::string change = in.str("change");
            const auto parsed = usage_change_from_string(change);
            if (!parsed) in.fail(fmt::format("unknown change '{}'", change));
            u.change = *parsed;
            u.old_signature = in.str("old_signature");
            u.new_signature = in.opt_str("new_signature");
            u.evidence_commit = in.str("evidence_commit");
            u.evidence_date = in.date("evidence_date");
            r.payload = std::move(u);
            break;
        }
    }

    try {
        r.validate();
    } catch (const InvariantViolation& e) {
        in.fail(e.what());
    }
    return r;
}

ApiCatalog catalog_from_json(const Json& doc) {
    if (!doc.is_object()) throw CorruptRecord("catalog document must be an object");
    if (!doc.contains("schema_version") || !doc["schema_version"].is_number_integer()) {
        throw SchemaMismatch("catalog document has no integer schema_version");
    }
    if (const int v = doc["schema_version"].get<int>(); v != kSchemaVersion) {
        throw SchemaMismatch(fmt::format("catalog schema_version {} is not supported (expected {})", v, kSchemaVersion));
    }
    for (const auto& [key, value] : doc.items()) {
        if (key != "schema_version" && key != "generated_at" && key != "records") {
            throw CorruptRecord(fmt::format("unknown top-level field '{}'", key));
        }
    }
    if (!doc.contains("generated_at") || !doc["generated_at"].is_string() ||
        !is_rfc3339_timestamp(doc["generated_at"].get<std::string>())) {
        throw CorruptRecord("generated_at must be an RFC-3339 timestamp");
    }
    if (!doc.contains("records") || !doc["records"].is_array()) throw CorruptRecord("records must be an array");

    std::vector<OutdatedApiRecord> records;
    records.reserve(doc["records"].size());
    std::size_t index = 0;
    for (const auto& rj : doc["records"]) records.push_back(record_from_json(rj, index++));
    try {
        return ApiCatalog(std::move(records), doc["generated_at"].get<std::string>());
    } catch (const InvariantViolation& e) {
        throw CorruptRecord(e.what());
    }
}

}  // namespace

std::string catalog_to_string(const ApiCatalog& catalog) {
    Json doc;
    doc["schema_version"] = kSchemaVersion;
    doc["generated_at"] = catalog.generated_at();
    Json records = Json::array();
    for (const auto& r : catalog.records()) records.push_back(record_to_json(r));
    doc["records"] = std::move(records);
    return doc.dump(2) + "\n";
}

void catalog_save(const ApiCatalog& catalog, std::ostream& out) {
    out << catalog_to_string(catalog);
}

void catalog_save(const ApiCatalog& catalog, const std::filesystem::path& path) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(fmt::format("cannot write catalog '{}'", path.string()));
    catalog_save(catalog, out);
}

ApiCatalog catalog_from_string(std::string_view text) {
    Json doc;
    try {
        doc = Json::parse(text.begin(), text.end());
    } catch (const Json::parse_error& e) {
        throw CorruptRecord(fmt::format("catalog is not valid JSON: {}", e.what()));
    }
    return catalog_from_json(doc);
}

ApiCatalog catalog_load(std::istream& in) {
    std::stringstream buffer;
    buffer << in.rdbuf();
    return catalog_from_string(buffer.str());
}

ApiCatalog catalog_load(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(fmt::format("cannot read catalog '{}'", path.string()));
    return catalog_load(in);
}

}  // namespace apilot::catalog
