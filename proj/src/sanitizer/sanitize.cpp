#include "apilot/sanitizer/sanitize.hpp"
#include "apilot/common/error.hpp"

#include <json.hpp>

#include <fmt/format.h>

#include <chrono>

namespace apilot::sanitizer {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

bool has_fence(std::string_view text) {
    return text.find("```") != std::string_view::npos;
}

}  // namespace

std::string_view to_string(StageStatus status) {
    switch (status) {
        case StageStatus::ok: return "ok";
        case StageStatus::failed: return "failed";
        case StageStatus::skipped: return "skipped";
    }
    return "?";
}

SanitizationReport sanitize(std::string_view text, const catalog::ApiCatalog& catalog,
                            const SanitizeOptions& options) {
    SanitizationReport report;
    const bool source = options.mode == InputMode::source ||
                        (options.mode == InputMode::automatic && !has_fence(text));

    auto start = Clock::now();
    if (source) {
        report.extraction = StageStatus::skipped;
        report.snippet = ExtractedSnippet{std::string(text), std::nullopt, 0, 0};
    } else {
        try {
            report.snippet = extract_code(text);
            report.extraction = StageStatus::ok;
        } catch (const ExtractionFailed& e) {
            report.extraction_error = e.what();
        }
    }
    report.timings.extraction_ms = ms_since(start);
    if (!report.snippet) return report;

    start = Clock::now();
    auto parsed = parse_snippet(*report.snippet);
    report.timings.parse_ms = ms_since(start);
    if (auto* failure = std::get_if<pyparse::ParseFailure>(&parsed)) {
        report.parse_error = std::move(*failure);
        return report;
    }
    report.parse = StageStatus::ok;

    start = Clock::now();
    const auto& module = std::get<pyparse::Module>(parsed);
    report.findings = detect_outdated(module, resolve_bindings(module), catalog, options.user_versions);
    for (const auto& f : report.findings) {
        if (std::find(report.ban_list.begin(), report.ban_list.end(), f.api_path) == report.ban_list.end()) {
            report.ban_list.push_back(f.api_path);
        }
    }
    report.timings.detect_ms = ms_since(start);
    return report;
}

std::vector<SanitizationReport> sanitize_batch(std::span<const std::string> texts, const catalog::ApiCatalog& catalog,
                                               const SanitizeOptions& options, [[maybe_unused]] bool parallel) {
    std::vector<SanitizationReport> out(texts.size());
    const long n = static_cast<long>(texts.size());
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (long i = 0; i < n; ++i) {
        out[static_cast<std::size_t>(i)] = sanitize(texts[static_cast<std::size_t>(i)], catalog, options);
    }
    return out;
}

std::string report_to_json(const SanitizationReport& report) {
    using json = nlohmann::ordered_json;
    json doc;
    doc["extraction"] = to_string(report.extraction);
    if (!report.extraction_error.empty()) doc["extraction_error"] = report.extraction_error;
    if (report.snippet && report.extraction == StageStatus::ok) {
        doc["block"] = {{"index", report.snippet->block_index},
                        {"total", report.snippet->total_blocks},
                        {"language", report.snippet->fence_language_tag ? json(*report.snippet->fence_language_tag)
                                                                         : json(nullptr)}};
    }
    doc["parse"] = report.extraction == StageStatus::failed ? "failed" : to_string(report.parse);
    if (report.parse_error) {
        doc["parse_error"] = {{"message", report.parse_error->message},
                              {"line", report.parse_error->where.line},
                              {"col", report.parse_error->where.col + 1}};
    }
    json findings = json::array();
    for (const auto& f : report.findings) {
        json item = {{"api", f.api_path.dotted()}, {"kind", catalog::to_string(f.record.kind())}};
        if (!f.record.advisory_id().empty()) item["advisory"] = f.record.advisory_id();
        if (!f.also.empty()) {
            json more = json::array();
            for (const auto& r : f.also) {
                more.push_back(r.advisory_id().empty() ? std::string(catalog::to_string(r.kind())) : r.advisory_id());
            }
            item["also"] = std::move(more);
        }
        item["line"] = f.site.begin.line;
        item["col"] = f.site.begin.col + 1;
        item["reason"] = f.reason;
        item["resolution"] = f.resolution_chain;
        findings.push_back(std::move(item));
    }
    doc["findings"] = std::move(findings);
    json bans = json::array();
    for (const auto& p : report.ban_list) bans.push_back(p.dotted());
    doc["ban_list"] = std::move(bans);
    doc["timings_ms"] = {{"extraction", report.timings.extraction_ms},
                         {"parse", report.timings.parse_ms},
                         {"detect", report.timings.detect_ms}};
    return doc.dump(2) + "\n";
}

std::string report_to_table(const SanitizationReport& report) {
    std::string out;
    if (report.extraction == StageStatus::failed) {
        return fmt::format("extraction failed: {}\n", report.extraction_error);
    }
    if (report.parse_error) {
        return fmt::format("parse failed at {}:{}: {}\n", report.parse_error->where.line,
                           report.parse_error->where.col + 1, report.parse_error->message);
    }
    if (report.findings.empty()) return "no outdated APIs found\n";

    std::size_t w_loc = 8, w_api = 3, w_kind = 4;
    std::vector<std::string> locs;
    for (const auto& f : report.findings) {
        locs.push_back(fmt::format("{}:{}", f.site.begin.line, f.site.begin.col + 1));
        w_loc = std::max(w_loc, locs.back().size());
        w_api = std::max(w_api, f.api_path.dotted().size());
        w_kind = std::max(w_kind, catalog::to_string(f.record.kind()).size());
    }
    out += fmt::format("{:<{}}  {:<{}}  {:<{}}  {}\n", "location", w_loc, "api", w_api, "kind", w_kind, "reason");
    for (std::size_t i = 0; i < report.findings.size(); ++i) {
        const auto& f = report.findings[i];
        out += fmt::format("{:<{}}  {:<{}}  {:<{}}  {}\n", locs[i], w_loc, f.api_path.dotted(), w_api,
                           catalog::to_string(f.record.kind()), w_kind, f.reason);
    }
    out += fmt::format("{} finding(s); ban list: {}\n", report.findings.size(), report.ban_list.size());
    return out;
}

int exit_status(const SanitizationReport& report) {
    if (report.failed()) return 2;
    return report.findings.empty() ? 0 : 1;
}

}  // namespace apilot::sanitizer
