#pragma once

#include "apilot/sanitizer/detect.hpp"
#include "apilot/sanitizer/extract.hpp"

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::sanitizer {

enum class StageStatus { ok, failed, skipped };

std::string_view to_string(StageStatus status);

enum class InputMode {
    transcript,  // model output; code must be fenced
    source,      // plain source file, no extraction step
    automatic,   // transcript when the text contains a fence, else source
};

struct StageTimings {
    double extraction_ms = 0;
    double parse_ms = 0;
    double detect_ms = 0;

    double total_ms() const { return extraction_ms + parse_ms + detect_ms; }
};

struct SanitizationReport {
    StageStatus extraction = StageStatus::failed;
    std::string extraction_error;
    std::optional<ExtractedSnippet> snippet;
    StageStatus parse = StageStatus::failed;
    std::optional<pyparse::ParseFailure> parse_error;
    std::vector<Finding> findings;
    std::vector<catalog::ApiPath> ban_list;  // first-occurrence order, no duplicates
    StageTimings timings;

    bool failed() const { return extraction == StageStatus::failed || parse == StageStatus::failed; }
    bool clean() const { return !failed() && findings.empty(); }
};

struct SanitizeOptions {
    UserVersions user_versions;
    InputMode mode = InputMode::transcript;
};

SanitizationReport sanitize(std::string_view text, const catalog::ApiCatalog& catalog,
                            const SanitizeOptions& options = {});

/// sanitize() over many outputs, in parallel when OpenMP is enabled.
std::vector<SanitizationReport> sanitize_batch(std::span<const std::string> texts, const catalog::ApiCatalog& catalog,
                                               const SanitizeOptions& options = {}, bool parallel = true);

/// {extraction, parse, findings: [{api, kind, advisory?, line, col, reason}], ban_list, timings_ms}.
/// Columns are 1-based here. Only timings_ms varies between identical runs.
std::string report_to_json(const SanitizationReport& report);

/// Human-readable table of the same report.
std::string report_to_table(const SanitizationReport& report);

/// 0 clean, 1 findings, 2 extraction or parse failure.
int exit_status(const SanitizationReport& report);

}  // namespace apilot::sanitizer
