#pragma once

#include "apilot/common/error.hpp"
#include "apilot/guardrail/client.hpp"
#include "apilot/sanitizer/sanitize.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::guardrail {

/// Version tag of the wrapping prompt template compiled into the library.
std::string_view prompt_template_version();

/// Instruction section, the user prompt verbatim, then (when the ban list is
/// non-empty) a numbered list of banned dotted paths. `format_reminder` adds
/// a line after the instruction asking again for a single fenced block.
std::string wrap_prompt(std::string_view user_prompt, const std::vector<catalog::ApiPath>& ban_list,
                        bool format_reminder = false);

struct GenerationConfig {
    int max_iterations = 3;
    double temperature = 0.7;
    sanitizer::UserVersions user_versions;

    /// Throws ConfigError.
    void validate() const;
};

enum class SessionStatus { clean, exhausted };

std::string_view to_string(SessionStatus status);

struct Iteration {
    std::string wrapped_prompt;
    std::string raw_output;
    sanitizer::SanitizationReport report;
    double gen_ms = 0;
};

struct GenerationSession {
    std::string original_prompt;
    GenerationConfig config;
    std::vector<Iteration> iterations;
    std::vector<catalog::ApiPath> cumulative_ban_list;
    SessionStatus status = SessionStatus::exhausted;
    std::string final_code;
    std::vector<std::string> warnings;
    double gen_time_ms = 0;
    double san_time_ms = 0;
};

/// Thrown when the client fails mid-session; carries the iterations so far.
class GenerationInterrupted : public ClientFailure {
public:
    GenerationInterrupted(const std::string& message, GenerationSession partial)
        : ClientFailure(message), session(std::move(partial)) {}

    GenerationSession session;
};

/// Wrap, send, sanitize; stop when a reply is free of findings, otherwise add
/// its ban list and retry, at most max_iterations sends. Replies that fail
/// extraction or parsing use up an iteration and trigger the format reminder.
/// When every reply had findings, final_code is the last extracted snippet and
/// warnings explain each distinct API found in it.
GenerationSession generate_guarded(std::string_view prompt, LlmClient& client, const catalog::ApiCatalog& catalog,
                                   const GenerationConfig& config = {});

/// Explanation paragraph for a finding, by kind of its records.
std::string render_warning(const sanitizer::Finding& finding);

struct VersionGate {
    catalog::PackageId package;
    catalog::ApiPath api;
    std::vector<catalog::VersionRange> affected_ranges;
    std::string vulnerable_snippet;
    std::optional<std::string> clean_snippet;
};

/// Python source that looks up the installed version of the package and runs
/// the clean snippet (or prints a warning naming the API) when that version
/// is affected, the vulnerable snippet otherwise. Throws InvariantViolation
/// when no range is given.
std::string emit_version_gate(const VersionGate& gate);

/// Machine-readable session log; replaying the raw outputs through a
/// TranscriptClient reproduces the session.
std::string session_to_json(const GenerationSession& session);

/// The raw outputs recorded in a session log, in order.
std::vector<std::string> session_responses(std::string_view session_json);

}  // namespace apilot::guardrail
