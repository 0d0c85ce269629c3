#include "apilot/miner/public_api.hpp"
#include "apilot/pyparse/parser.hpp"
#include "apilot/pyparse/walk.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <sstream>

#include <fmt/format.h>

namespace apilot::miner {

using catalog::ApiPath;

namespace {

std::vector<std::string> split(std::string_view text, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = text.find(sep, start);
        out.emplace_back(text.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

bool is_private(const std::string& segment) { return !segment.empty() && segment.front() == '_'; }

bool contains(const std::vector<std::string>& names, const std::string& name) {
    return std::find(names.begin(), names.end(), name) != names.end();
}

std::set<std::string> discover_roots(const std::filesystem::path& root) {
    std::set<std::string> out;
    std::error_code ec;
    if (root.empty() || !std::filesystem::is_directory(root, ec)) return out;
    for (const auto& entry : std::filesystem::directory_iterator(root, ec)) {
        const auto name = entry.path().filename().string();
        if (entry.is_directory(ec) && std::filesystem::exists(entry.path() / "__init__.py", ec)) {
            out.insert(name);
        } else if (entry.is_regular_file(ec) && entry.path().extension() == ".py") {
            out.insert(entry.path().stem().string());
        }
    }
    return out;
}

struct ReExport {
    std::string module;  // dotted module the name comes from
    std::string name;    // name in that module, or "*"
    std::string alias;   // name in the package
};

// Top-level `from X import ...` statements of one package __init__.py,
// including those inside if/try blocks.
class ReExportIndex {
public:
    ReExportIndex(std::filesystem::path root, DiagnosticSink diagnostics)
        : root_(std::move(root)), diagnostics_(std::move(diagnostics)) {}

    const std::vector<ReExport>& of(const ApiPath& package) {
        auto [it, inserted] = cache_.try_emplace(package.dotted());
        if (inserted) it->second = load(package);
        return it->second;
    }

private:
    std::filesystem::path root_;
    DiagnosticSink diagnostics_;
    std::map<std::string, std::vector<ReExport>> cache_;

    std::vector<ReExport> load(const ApiPath& package) {
        std::vector<ReExport> out;
        if (root_.empty()) return out;
        std::filesystem::path file = root_;
        for (const auto& seg : package.segments()) file /= seg;
        file /= "__init__.py";
        std::ifstream in(file, std::ios::binary);
        if (!in) return out;
        std::stringstream ss;
        ss << in.rdbuf();
        auto parsed = pyparse::try_parse_module(ss.str());
        if (auto* failure = std::get_if<pyparse::ParseFailure>(&parsed)) {
            if (diagnostics_) diagnostics_(fmt::format("SKIP {}: {}", file.string(), failure->describe()));
            return out;
        }
        collect(std::get<pyparse::Module>(parsed).body, package, out);
        return out;
    }

    static void collect(const std::vector<pyparse::StmtPtr>& body, const ApiPath& package,
                        std::vector<ReExport>& out) {
        for (const auto& s : body) {
            if (s->kind == pyparse::StmtKind::FunctionDef || s->kind == pyparse::StmtKind::ClassDef) continue;
            if (s->kind == pyparse::StmtKind::ImportFrom) {
                auto source = resolve(*s, package);
                if (!source) continue;
                for (const auto& alias : s->names) {
                    out.push_back({*source, alias.name, alias.asname.value_or(alias.name)});
                }
                continue;
            }
            pyparse::for_each_child_body(*s, [&](const auto& inner) { collect(inner, package, out); });
        }
    }

    // A relative import inside pkg/__init__.py is relative to pkg itself.
    static std::optional<std::string> resolve(const pyparse::Stmt& s, const ApiPath& package) {
        if (s.level == 0) return s.module;
        if (static_cast<std::size_t>(s.level) > package.size()) return std::nullopt;
        std::string base = package.prefix(package.size() - static_cast<std::size_t>(s.level) + 1).dotted();
        if (!s.module.empty()) base += "." + s.module;
        return base;
    }
};

void add_paths(const ApiPath& module, const FunctionDelta& delta, const std::optional<Date>& removal,
               ReExportIndex& reexports, std::vector<PublicCandidate>& out) {
    const auto qual = split(delta.qualified_name, '.');
    if (!std::all_of(qual.begin(), qual.end(), [](const auto& s) { return catalog::is_identifier(s); })) return;
    const std::string& top = qual.front();
    if (delta.exports && !contains(*delta.exports, top)) return;

    auto emit = [&](ApiPath path) {
        const auto& segs = path.segments();
        if (std::any_of(segs.begin(), segs.end(), is_private)) return;
        out.push_back({std::move(path), delta, removal});
    };
    ApiPath direct = module;
    for (const auto& q : qual) direct = direct.child(q);
    emit(direct);

    const std::string module_name = module.dotted();
    for (std::size_t k = 1; k < module.size(); ++k) {
        const ApiPath package = module.prefix(k);
        for (const auto& r : reexports.of(package)) {
            if (r.module != module_name) continue;
            std::optional<std::string> alias;
            if (r.name == "*") {
                // Star imports bring in __all__, or every non-underscore name.
                if (!is_private(top)) alias = top;
            } else if (r.name == top) {
                alias = r.alias;
            }
            if (!alias || !catalog::is_identifier(*alias)) continue;
            ApiPath path = package.child(*alias);
            for (std::size_t i = 1; i < qual.size(); ++i) path = path.child(qual[i]);
            emit(std::move(path));
        }
    }
}

}  // namespace

std::optional<ApiPath> module_path_of(std::string_view file_path, std::string_view source_prefix) {
    std::string prefix(source_prefix);
    if (!prefix.empty() && prefix.back() != '/') prefix += '/';
    if (!prefix.empty()) {
        if (file_path.substr(0, prefix.size()) != prefix) return std::nullopt;
        file_path.remove_prefix(prefix.size());
    }
    if (file_path.size() < 4 || file_path.substr(file_path.size() - 3) != ".py") return std::nullopt;
    file_path.remove_suffix(3);
    auto segs = split(file_path, '/');
    if (segs.back() == "__init__") segs.pop_back();
    if (segs.empty()) return std::nullopt;
    for (const auto& s : segs) {
        if (!catalog::is_identifier(s)) return std::nullopt;
    }
    return ApiPath(std::move(segs));
}

std::vector<PublicCandidate> filter_public(const CandidateSet& candidates, const std::filesystem::path& package_root,
                                           const PublicApiOptions& options) {
    const std::set<std::string> roots =
        options.import_roots.empty() ? discover_roots(package_root) : options.import_roots;
    ReExportIndex reexports(package_root, options.diagnostics);
    std::vector<PublicCandidate> out;

    auto visit = [&](const FunctionDelta& delta, const std::optional<Date>& removal) {
        auto module = module_path_of(delta.file_path, options.source_prefix);
        if (!module) return;
        if (!roots.empty() && !roots.count(module->front())) return;
        add_paths(*module, delta, removal, reexports, out);
    };
    for (const auto& [key, cand] : candidates.deprecated) visit(cand.deprecation, cand.removal_date);
    for (const auto& [key, delta] : candidates.usage_modified) visit(delta, std::nullopt);
    return out;
}

std::vector<catalog::OutdatedApiRecord> emit_catalog(std::span<const PublicCandidate> candidates,
                                                     const catalog::PackageId& package) {
    struct Entry {
        catalog::OutdatedApiRecord record;
        Date date;
    };
    std::map<catalog::RecordKey, Entry> chosen;
    for (const auto& c : candidates) {
        catalog::OutdatedApiRecord rec;
        rec.api_path = c.api_path;
        rec.package = package;
        const FunctionDelta& d = c.delta;
        if (d.classification == DeltaKind::deprecation_added) {
            rec.payload = catalog::DeprecatedInfo{d.date, c.removal_date, std::nullopt, std::nullopt, d.commit};
        } else {
            const auto change = d.classification == DeltaKind::removed          ? catalog::UsageChange::removed
                                : d.classification == DeltaKind::params_changed ? catalog::UsageChange::params_changed
                                                                                : catalog::UsageChange::return_changed;
            std::optional<std::string> new_sig;
            if (change != catalog::UsageChange::removed && d.new_snapshot) new_sig = render_signature(*d.new_snapshot);
            rec.payload = catalog::UsageModifiedInfo{change, render_signature(d.old_snapshot), std::move(new_sig),
                                                     d.commit, d.date};
        }
        rec.validate();
        const auto key = catalog::key_of(rec);
        auto it = chosen.find(key);
        if (it == chosen.end()) {
            chosen.emplace(key, Entry{std::move(rec), d.date});
            continue;
        }
        const bool deprecated = rec.kind() == catalog::ApiKind::deprecated;
        if (deprecated ? d.date < it->second.date : it->second.date < d.date) it->second = Entry{std::move(rec), d.date};
    }
    std::vector<catalog::OutdatedApiRecord> out;
    out.reserve(chosen.size());
    for (auto& [key, entry] : chosen) out.push_back(std::move(entry.record));
    return out;
}

}  // namespace apilot::miner
