#pragma once

#include "apilot/catalog/catalog.hpp"
#include "apilot/catalog/types.hpp"
#include "apilot/common/diagnostics.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::advisories {

struct AdvisoryRecord {
    std::string advisory_id;
    catalog::PackageId package;
    std::vector<catalog::VersionRange> affected_ranges;
    std::vector<catalog::ApiPath> symbols;
    std::string bug_type;  // empty when the document has no details
    std::optional<double> cvss;

    friend bool operator==(const AdvisoryRecord&, const AdvisoryRecord&) = default;
};

/// Curated advisory id -> affected API paths, for advisories whose upstream
/// document carries no symbol data.
using SymbolSupplement = std::map<std::string, std::vector<catalog::ApiPath>>;

/// {"<advisory id>": ["pkg.mod.func", ...], ...}. Throws MalformedAdvisory.
SymbolSupplement load_symbol_supplement(std::string_view json_text);
SymbolSupplement load_symbol_supplement(const std::filesystem::path& path);

/// Parses one OSV-style document:
///
///   {"id", "affected": [{"package": {"ecosystem", "name"},
///                        "ranges": [{"type": "ECOSYSTEM", "events": [...]}],
///                        "ecosystem_specific": {"imports": [...]}}],
///    "severity": [{"type", "score"}], "details"}
///
/// Events pair each "introduced" with the next "fixed"; a trailing
/// "introduced" leaves the range open. Imports are {"path", "symbols"}
/// objects or dotted strings; the supplement is consulted only when the
/// document lists none. bug_type is the first line of "details"; cvss comes
/// from the first severity entry that scores. Entries of other ecosystems
/// and non-ECOSYSTEM ranges are ignored.
///
/// Throws UnsupportedEcosystem when no PyPI package is affected and
/// MalformedAdvisory for a missing id, package or range, an unordered range
/// or an affected list naming several PyPI packages.
AdvisoryRecord ingest_advisory(std::string_view document, const SymbolSupplement* supplement = nullptr);

/// Renders the record back into the document format (vectors are not kept,
/// so severity is written as a plain score).
std::string render_advisory(const AdvisoryRecord& record);

/// One patched record per symbol. A record without symbols yields nothing
/// and a diagnostic line, since detection needs an API path.
std::vector<catalog::OutdatedApiRecord> to_catalog_records(const AdvisoryRecord& advisory,
                                                           const DiagnosticSink& diagnostics = stderr_sink());

struct IngestResult {
    std::vector<AdvisoryRecord> advisories;  // ordered by advisory id
    std::vector<std::string> errors;         // "<file>: <message>" for rejected documents
};

/// Ingests every *.json document under `dir` (recursively). Documents are
/// parsed in parallel; a rejected document is reported, not fatal.
IngestResult ingest_directory(const std::filesystem::path& dir, const SymbolSupplement* supplement = nullptr,
                              bool parallel = true);

}  // namespace apilot::advisories
