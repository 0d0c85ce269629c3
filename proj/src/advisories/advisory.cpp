#include "apilot/advisories/advisory.hpp"
#include "apilot/advisories/cvss.hpp"
#include "apilot/common/error.hpp"

#include <json.hpp>

#include <algorithm>
#include <cctype>
#include <exception>
#include <fstream>
#include <set>
#include <sstream>

#include <fmt/format.h>

namespace apilot::advisories {

using json = nlohmann::ordered_json;
using catalog::ApiPath;
using catalog::Version;
using catalog::VersionRange;

namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw MalformedAdvisory(fmt::format("cannot read {}", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

bool iequals(std::string_view a, std::string_view b) {
    return a.size() == b.size() && std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
               return std::tolower(static_cast<unsigned char>(x)) == std::tolower(static_cast<unsigned char>(y));
           });
}

ApiPath parse_path(const std::string& text, const std::string& id) {
    try {
        return ApiPath::parse(text);
    } catch (const InvalidIdentifier&) {
        throw MalformedAdvisory(fmt::format("{}: '{}' is not a dotted API path", id, text));
    }
}

Version parse_event_version(const json& v, const std::string& id) {
    if (!v.is_string()) throw MalformedAdvisory(fmt::format("{}: event version is not a string", id));
    try {
        return Version::parse(v.get<std::string>());
    } catch (const MalformedVersion& e) {
        throw MalformedAdvisory(fmt::format("{}: {}", id, e.what()));
    }
}

void read_ranges(const json& ranges, const std::string& id, std::vector<VersionRange>& out) {
    for (const auto& range : ranges) {
        if (range.value("type", "") != "ECOSYSTEM") continue;
        std::optional<Version> open;
        for (const auto& event : range.at("events")) {
            if (event.contains("introduced")) {
                if (open) throw MalformedAdvisory(fmt::format("{}: 'introduced' twice without 'fixed'", id));
                open = parse_event_version(event["introduced"], id);
            } else if (event.contains("fixed")) {
                if (!open) throw MalformedAdvisory(fmt::format("{}: 'fixed' without 'introduced'", id));
                VersionRange r{*open, parse_event_version(event["fixed"], id)};
                if (!(*r.fixed > r.introduced)) {
                    throw MalformedAdvisory(fmt::format("{}: fixed {} is not after introduced {}", id,
                                                        r.fixed->original_text(), r.introduced.original_text()));
                }
                out.push_back(std::move(r));
                open.reset();
            } else {
                throw MalformedAdvisory(fmt::format("{}: unsupported range event {}", id, event.dump()));
            }
        }
        if (open) out.push_back({*open, std::nullopt});
    }
}

void read_imports(const json& affected, const std::string& id, std::vector<ApiPath>& out) {
    auto es = affected.find("ecosystem_specific");
    if (es == affected.end() || !es->is_object()) return;
    auto imports = es->find("imports");
    if (imports == es->end()) return;
    for (const auto& imp : *imports) {
        if (imp.is_string()) {
            out.push_back(parse_path(imp.get<std::string>(), id));
            continue;
        }
        const ApiPath base = parse_path(imp.at("path").get<std::string>(), id);
        auto symbols = imp.find("symbols");
        if (symbols == imp.end() || symbols->empty()) {
            out.push_back(base);
            continue;
        }
        for (const auto& s : *symbols) out.push_back(base.concat(parse_path(s.get<std::string>(), id)));
    }
}

std::optional<double> read_severity(const json& doc) {
    auto sev = doc.find("severity");
    if (sev == doc.end() || !sev->is_array()) return std::nullopt;
    for (const auto& entry : *sev) {
        if (!entry.is_object() || !entry.contains("score")) continue;
        const auto& score = entry["score"];
        std::optional<double> value;
        if (score.is_number()) {
            const double v = score.get<double>();
            if (v >= 0.0 && v <= 10.0) value = v;
        } else if (score.is_string()) {
            value = severity_score(entry.value("type", ""), score.get<std::string>());
        }
        if (value) return value;
    }
    return std::nullopt;
}

std::string first_line(std::string_view text) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.back()))) line.remove_suffix(1);
    while (!line.empty() && std::isspace(static_cast<unsigned char>(line.front()))) line.remove_prefix(1);
    return std::string(line);
}

template <class T>
void dedupe(std::vector<T>& v) {
    std::vector<T> out;
    for (auto& x : v) {
        if (std::find(out.begin(), out.end(), x) == out.end()) out.push_back(std::move(x));
    }
    v = std::move(out);
}

}  // namespace

SymbolSupplement load_symbol_supplement(std::string_view json_text) {
    SymbolSupplement out;
    try {
        const json doc = json::parse(json_text);
        if (!doc.is_object()) throw MalformedAdvisory("symbol supplement must be an object");
        for (const auto& [id, paths] : doc.items()) {
            auto& list = out[id];
            for (const auto& p : paths) list.push_back(parse_path(p.get<std::string>(), id));
        }
    } catch (const json::exception& e) {
        throw MalformedAdvisory(fmt::format("malformed symbol supplement: {}", e.what()));
    }
    return out;
}

SymbolSupplement load_symbol_supplement(const std::filesystem::path& path) {
    return load_symbol_supplement(std::string_view(read_file(path)));
}

AdvisoryRecord ingest_advisory(std::string_view document, const SymbolSupplement* supplement) {
    AdvisoryRecord rec;
    try {
        const json doc = json::parse(document);
        if (!doc.is_object()) throw MalformedAdvisory("advisory must be an object");
        auto id = doc.find("id");
        if (id == doc.end() || !id->is_string() || id->get<std::string>().empty()) {
            throw MalformedAdvisory("advisory without id");
        }
        rec.advisory_id = id->get<std::string>();
        auto affected = doc.find("affected");
        if (affected == doc.end() || !affected->is_array() || affected->empty()) {
            throw MalformedAdvisory(fmt::format("{}: no affected package", rec.advisory_id));
        }
        std::vector<std::string> other_ecosystems;
        bool found = false;
        for (const auto& a : *affected) {
            auto pkg = a.find("package");
            if (pkg == a.end() || !pkg->contains("name") || !pkg->contains("ecosystem")) {
                throw MalformedAdvisory(fmt::format("{}: affected entry without package", rec.advisory_id));
            }
            const auto ecosystem = (*pkg)["ecosystem"].get<std::string>();
            if (!iequals(ecosystem, "PyPI")) {
                other_ecosystems.push_back(ecosystem);
                continue;
            }
            const auto package = catalog::PackageId::pypi((*pkg)["name"].get<std::string>());
            if (found && package != rec.package) {
                throw MalformedAdvisory(fmt::format("{}: affects several packages ({}, {})", rec.advisory_id,
                                                    rec.package.name(), package.name()));
            }
            found = true;
            rec.package = package;
            if (a.contains("ranges")) read_ranges(a["ranges"], rec.advisory_id, rec.affected_ranges);
            read_imports(a, rec.advisory_id, rec.symbols);
        }
        if (!found) {
            throw UnsupportedEcosystem(fmt::format("{}: ecosystem {} is not PyPI", rec.advisory_id,
                                                   other_ecosystems.empty() ? "?" : other_ecosystems.front()));
        }
        if (rec.affected_ranges.empty()) {
            throw MalformedAdvisory(fmt::format("{}: no ECOSYSTEM version range", rec.advisory_id));
        }
        dedupe(rec.symbols);
        if (rec.symbols.empty() && supplement) {
            auto it = supplement->find(rec.advisory_id);
            if (it != supplement->end()) rec.symbols = it->second;
        }
        rec.cvss = read_severity(doc);
        if (auto details = doc.find("details"); details != doc.end() && details->is_string()) {
            rec.bug_type = first_line(details->get<std::string>());
        }
    } catch (const json::exception& e) {
        throw MalformedAdvisory(fmt::format("{}: {}", rec.advisory_id.empty() ? "advisory" : rec.advisory_id,
                                            e.what()));
    }
    return rec;
}

std::string render_advisory(const AdvisoryRecord& record) {
    json events = json::array();
    for (const auto& r : record.affected_ranges) {
        events.push_back({{"introduced", r.introduced.original_text()}});
        if (r.fixed) events.push_back({{"fixed", r.fixed->original_text()}});
    }
    json imports = json::array();
    for (const auto& s : record.symbols) imports.push_back(s.dotted());
    json affected = {{"package", {{"ecosystem", "PyPI"}, {"name", record.package.name()}}},
                     {"ranges", json::array({{{"type", "ECOSYSTEM"}, {"events", events}}})}};
    if (!record.symbols.empty()) affected["ecosystem_specific"] = {{"imports", imports}};
    json doc = {{"id", record.advisory_id}, {"affected", json::array({affected})}};
    if (record.cvss) doc["severity"] = json::array({{{"type", "CVSS_V3"}, {"score", fmt::format("{}", *record.cvss)}}});
    if (!record.bug_type.empty()) doc["details"] = record.bug_type;
    return doc.dump(2) + "\n";
}

std::vector<catalog::OutdatedApiRecord> to_catalog_records(const AdvisoryRecord& advisory,
                                                           const DiagnosticSink& diagnostics) {
    std::vector<catalog::OutdatedApiRecord> out;
    if (advisory.symbols.empty()) {
        if (diagnostics) {
            diagnostics(fmt::format("{}: package-level advisory for {} names no API; no catalog record",
                                    advisory.advisory_id, advisory.package.name()));
        }
        return out;
    }
    for (const auto& symbol : advisory.symbols) {
        catalog::OutdatedApiRecord rec;
        rec.api_path = symbol;
        rec.package = advisory.package;
        rec.payload = catalog::PatchedInfo{advisory.advisory_id, advisory.affected_ranges, advisory.bug_type,
                                           advisory.cvss};
        rec.validate();
        out.push_back(std::move(rec));
    }
    return out;
}

IngestResult ingest_directory(const std::filesystem::path& dir, const SymbolSupplement* supplement,
                              [[maybe_unused]] bool parallel) {
    std::vector<std::filesystem::path> files;
    std::error_code ec;
    for (const auto& entry : std::filesystem::recursive_directory_iterator(dir, ec)) {
        if (entry.is_regular_file() && entry.path().extension() == ".json") files.push_back(entry.path());
    }
    if (ec) throw MalformedAdvisory(fmt::format("cannot list {}: {}", dir.string(), ec.message()));
    std::sort(files.begin(), files.end());

    std::vector<std::optional<AdvisoryRecord>> parsed(files.size());
    std::vector<std::string> errors(files.size());
    const long n = static_cast<long>(files.size());
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (long i = 0; i < n; ++i) {
        const auto k = static_cast<std::size_t>(i);
        try {
            parsed[k] = ingest_advisory(read_file(files[k]), supplement);
        } catch (const std::exception& e) {
            errors[k] = fmt::format("{}: {}", files[k].string(), e.what());
        }
    }

    IngestResult result;
    std::set<std::string> seen;
    for (std::size_t k = 0; k < files.size(); ++k) {
        if (!errors[k].empty()) {
            result.errors.push_back(std::move(errors[k]));
        } else if (!seen.insert(parsed[k]->advisory_id).second) {
            result.errors.push_back(fmt::format("{}: duplicate advisory {}", files[k].string(), parsed[k]->advisory_id));
        } else {
            result.advisories.push_back(std::move(*parsed[k]));
        }
    }
    std::sort(result.advisories.begin(), result.advisories.end(),
              [](const auto& a, const auto& b) { return a.advisory_id < b.advisory_id; });
    return result;
}

}  // namespace apilot::advisories
