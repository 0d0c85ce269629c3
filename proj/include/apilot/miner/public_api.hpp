#pragma once

#include "apilot/catalog/types.hpp"
#include "apilot/common/diagnostics.hpp"
#include "apilot/miner/mine.hpp"

#include <filesystem>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace apilot::miner {

struct PublicApiOptions {
    /// Repository-relative directory that holds the top-level packages
    /// ("src/" for a src layout). Files outside it are not importable.
    std::string source_prefix;
    /// Top-level modules that count as the package. When empty, the packages
    /// and modules found directly under package_root are used; when that
    /// directory is missing too, every top-level name counts.
    std::set<std::string> import_roots;
    DiagnosticSink diagnostics = null_sink();
};

/// A candidate reachable under one importable dotted path.
struct PublicCandidate {
    catalog::ApiPath api_path;
    FunctionDelta delta;
    /// Set for deprecated candidates that were later removed.
    std::optional<Date> removal_date;

    friend bool operator==(const PublicCandidate&, const PublicCandidate&) = default;
};

/// Module path a repository file is imported as, or nullopt when it is not
/// importable (not .py, outside source_prefix, non-identifier segments).
std::optional<catalog::ApiPath> module_path_of(std::string_view file_path, std::string_view source_prefix);

/// Every public dotted path of every candidate. A path is public when no
/// segment starts with '_' and, if the defining module version has a literal
/// __all__, the module-level name is listed in it. Names that ancestor
/// packages re-export with `from <module> import name` (or `*`) in their
/// __init__.py under package_root add one path each; chains of re-exports
/// are not followed.
std::vector<PublicCandidate> filter_public(const CandidateSet& candidates, const std::filesystem::path& package_root,
                                           const PublicApiOptions& options = {});

/// Catalog records sorted by (package, api_path, kind). When two candidates
/// land on one record key the earliest deprecation and the latest usage
/// change win.
std::vector<catalog::OutdatedApiRecord> emit_catalog(std::span<const PublicCandidate> candidates,
                                                     const catalog::PackageId& package);

}  // namespace apilot::miner
