#include "apilot/guardrail/guardrail.hpp"

#include "apilot/catalog/catalog.hpp"
#include "apilot/pyparse/lexer.hpp"

#include <json.hpp>

#include <fmt/format.h>

#include <chrono>
#include <map>
#include <set>
#include <string_view>

namespace apilot::guardrail {

namespace {

#include "prompt_template.inc"

using json = nlohmann::ordered_json;
using catalog::ApiPath;

struct PromptTemplate {
    std::map<std::string, std::string, std::less<>> sections;

    const std::string& at(std::string_view name) const {
        auto it = sections.find(name);
        if (it == sections.end()) throw ConfigError(fmt::format("prompt template lacks section '{}'", name));
        return it->second;
    }
};

PromptTemplate parse_template(std::string_view text) {
    PromptTemplate t;
    std::string* current = nullptr;
    std::size_t start = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        const auto line = text.substr(start, end - start);
        start = end + 1;
        if (line.rfind("@@ ", 0) == 0) {
            current = &t.sections[std::string(line.substr(3))];
        } else if (current && (line.empty() || line.front() != '#')) {
            if (!current->empty()) *current += '\n';
            *current += line;
        }
    }
    for (auto& [_, body] : t.sections) {
        while (!body.empty() && body.back() == '\n') body.pop_back();
    }
    return t;
}

const PromptTemplate& prompt_template() {
    static const PromptTemplate t = parse_template(kPromptTemplate);
    return t;
}

// Replaces the first `{key}` of the template text; the value is not rescanned.
std::string fill(std::string_view tpl, std::string_view key, std::string_view value) {
    const auto pos = tpl.find(key);
    if (pos == std::string_view::npos) return std::string(tpl);
    std::string out(tpl.substr(0, pos));
    out += value;
    out += tpl.substr(pos + key.size());
    return out;
}

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point start) {
    return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

std::string quote(std::string_view s) {
    return json(std::string(s)).dump();
}

std::string indent_block(std::string_view code, std::string_view pad) {
    // Lines that continue a multi-line string keep their text unchanged.
    std::set<int> inside_string;
    try {
        for (const auto& tok : pyparse::tokenize(code)) {
            if (tok.kind != pyparse::TokKind::String) continue;
            for (int l = tok.begin.line + 1; l <= tok.end.line; ++l) inside_string.insert(l);
        }
    } catch (const pyparse::SyntaxError&) {
        inside_string.clear();
    }
    std::string out;
    int line_no = 0;
    std::size_t start = 0;
    while (start <= code.size()) {
        auto end = code.find('\n', start);
        if (end == std::string_view::npos) end = code.size();
        const auto line = code.substr(start, end - start);
        ++line_no;
        if (!line.empty() && !inside_string.contains(line_no)) out += pad;
        out += line;
        out += '\n';
        if (end == code.size()) break;
        start = end + 1;
    }
    while (out.size() > 1 && out[out.size() - 1] == '\n' && out[out.size() - 2] == '\n') out.pop_back();
    return out;
}

bool blank(std::string_view s) {
    return s.find_first_not_of(" \t\r\n") == std::string_view::npos;
}

}  // namespace

std::string_view prompt_template_version() {
    return kPromptTemplateVersion;
}

std::string wrap_prompt(std::string_view user_prompt, const std::vector<ApiPath>& ban_list, bool format_reminder) {
    const auto& t = prompt_template();
    std::string out = t.at("instruction");
    if (format_reminder) out += "\n" + t.at("reminder");
    out += "\n\n" + fill(t.at("task"), "{prompt}", user_prompt);
    if (!ban_list.empty()) {
        std::string items;
        for (std::size_t i = 0; i < ban_list.size(); ++i) {
            if (i) items += '\n';
            items += fill(fill(t.at("ban_item"), "{n}", std::to_string(i + 1)), "{api}", ban_list[i].dotted());
        }
        out += "\n\n" + fill(t.at("ban_list"), "{items}", items);
    }
    return out + "\n";
}

void GenerationConfig::validate() const {
    if (max_iterations < 1) throw ConfigError(fmt::format("max_iterations must be at least 1, got {}", max_iterations));
    if (!(temperature >= 0.0 && temperature <= 2.0)) {
        throw ConfigError(fmt::format("temperature must be within [0, 2], got {}", temperature));
    }
}

std::string_view to_string(SessionStatus status) {
    return status == SessionStatus::clean ? "clean" : "exhausted";
}

GenerationSession generate_guarded(std::string_view prompt, LlmClient& client, const catalog::ApiCatalog& catalog,
                                   const GenerationConfig& config) {
    config.validate();
    GenerationSession session;
    session.original_prompt = std::string(prompt);
    session.config = config;
    sanitizer::SanitizeOptions options;
    options.user_versions = config.user_versions;
    options.mode = sanitizer::InputMode::transcript;

    bool reminder = false;
    const sanitizer::SanitizationReport* last_extracted = nullptr;
    for (int i = 0; i < config.max_iterations; ++i) {
        Iteration it;
        it.wrapped_prompt = wrap_prompt(prompt, session.cumulative_ban_list, reminder);
        const auto start = Clock::now();
        try {
            it.raw_output = client.send(it.wrapped_prompt, config.temperature);
        } catch (const ClientFailure& e) {
            session.gen_time_ms += ms_since(start);
            throw GenerationInterrupted(e.what(), std::move(session));
        }
        it.gen_ms = ms_since(start);
        session.gen_time_ms += it.gen_ms;
        it.report = sanitizer::sanitize(it.raw_output, catalog, options);
        session.san_time_ms += it.report.timings.total_ms();
        session.iterations.push_back(std::move(it));

        const auto& report = session.iterations.back().report;
        reminder = report.failed();
        if (report.failed()) continue;
        if (report.findings.empty()) {
            session.status = SessionStatus::clean;
            session.final_code = report.snippet->code;
            return session;
        }
        for (const auto& api : report.ban_list) {
            if (std::find(session.cumulative_ban_list.begin(), session.cumulative_ban_list.end(), api) ==
                session.cumulative_ban_list.end()) {
                session.cumulative_ban_list.push_back(api);
            }
        }
    }

    session.status = SessionStatus::exhausted;
    for (auto it = session.iterations.rbegin(); it != session.iterations.rend(); ++it) {
        if (it->report.parse == sanitizer::StageStatus::ok) {
            last_extracted = &it->report;
            break;
        }
    }
    if (last_extracted) {
        session.final_code = last_extracted->snippet->code;
        std::set<std::pair<std::string, std::string>> seen;
        for (const auto& f : last_extracted->findings) {
            if (seen.insert({f.api_path.dotted(), f.reason}).second) session.warnings.push_back(render_warning(f));
        }
    }
    return session;
}

std::string render_warning(const sanitizer::Finding& finding) {
    const auto api = finding.api_path.dotted();
    std::vector<const catalog::OutdatedApiRecord*> records{&finding.record};
    for (const auto& r : finding.also) records.push_back(&r);

    std::string out;
    for (const auto* r : records) {
        if (!out.empty()) out += ' ';
        if (const auto* d = r->deprecated()) {
            if (d->removed_date) {
                out += fmt::format(
                    "`{}` ({}) was deprecated on {} and removed on {}, a grace period of {} days. Code that calls it "
                    "fails on releases after the removal.",
                    api, r->package.name(), d->deprecated_date.to_string(), d->removed_date->to_string(),
                    days_between(d->deprecated_date, *d->removed_date));
            } else {
                out += fmt::format(
                    "`{}` ({}) was deprecated on {} and is not yet removed. It still runs but warns, and a later "
                    "release may drop it.",
                    api, r->package.name(), d->deprecated_date.to_string());
            }
        } else if (const auto* p = r->patched()) {
            out += fmt::format("`{}` ({}) is named in security advisory {}", api, r->package.name(), p->advisory_id);
            if (!p->bug_type.empty()) out += fmt::format(" ({})", p->bug_type);
            if (p->cvss) out += fmt::format(" with CVSS score {}", *p->cvss);
            out += fmt::format(". Affected versions: {}. Use a version outside these ranges or avoid the call.",
                               sanitizer::describe_ranges(p->affected_ranges));
        } else if (const auto* u = r->usage_modified()) {
            switch (u->change) {
                case catalog::UsageChange::removed:
                    out += fmt::format("`{}` ({}) was removed on {}. The old form `{}` no longer exists.", api,
                                       r->package.name(), u->evidence_date.to_string(), u->old_signature);
                    break;
                case catalog::UsageChange::params_changed:
                    out += fmt::format(
                        "The parameters of `{}` ({}) changed on {}: `{}` became `{}`. Calls written for the old form "
                        "may break or behave differently.",
                        api, r->package.name(), u->evidence_date.to_string(), u->old_signature,
                        u->new_signature.value_or("?"));
                    break;
                case catalog::UsageChange::return_changed:
                    out += fmt::format(
                        "The return value of `{}` ({}) changed on {} (signature `{}`). Code relying on the previous "
                        "result may misbehave.",
                        api, r->package.name(), u->evidence_date.to_string(), u->old_signature);
                    break;
            }
        }
    }
    return out;
}

std::string emit_version_gate(const VersionGate& gate) {
    if (gate.affected_ranges.empty()) throw InvariantViolation("version gate needs at least one affected range");
    std::vector<std::string> ranges;
    for (const auto& r : gate.affected_ranges) {
        ranges.push_back(fmt::format("({}, {})", quote(r.introduced.original_text()),
                                     r.fixed ? quote(r.fixed->original_text()) : "None"));
    }
    const auto package = gate.package.name();
    const auto api = gate.api.dotted();

    std::string affected_branch;
    if (gate.clean_snippet && !blank(*gate.clean_snippet)) {
        affected_branch = indent_block(*gate.clean_snippet, "    ");
    } else {
        affected_branch = fmt::format(
            "    print({})\n",
            quote(fmt::format("warning: {} is vulnerable in the installed {} version; upgrade {} before using it.",
                              api, package, package)));
    }
    const std::string vulnerable_branch =
        blank(gate.vulnerable_snippet) ? "    pass\n" : indent_block(gate.vulnerable_snippet, "    ");

    return fmt::format(
        "# Version gate for {api} ({package}).\n"
        "import re as _re\n"
        "from importlib.metadata import version as _installed_version\n"
        "\n"
        "PACKAGE = {qpackage}\n"
        "API = {qapi}\n"
        "# [introduced, fixed) pairs; None marks a range without a fix.\n"
        "AFFECTED = [{ranges}]\n"
        "\n"
        "\n"
        "def _release(text):\n"
        "    m = _re.match(r\"\\d+(?:\\.\\d+)*\", text)\n"
        "    parts = [int(p) for p in m.group(0).split(\".\")] if m else []\n"
        "    while parts and parts[-1] == 0:\n"
        "        parts.pop()\n"
        "    return tuple(parts)\n"
        "\n"
        "\n"
        "def _is_affected(text):\n"
        "    v = _release(text)\n"
        "    return any(_release(lo) <= v and (hi is None or v < _release(hi)) for lo, hi in AFFECTED)\n"
        "\n"
        "\n"
        "if _is_affected(_installed_version(PACKAGE)):\n"
        "{affected}"
        "else:\n"
        "{vulnerable}",
        fmt::arg("api", api), fmt::arg("package", package), fmt::arg("qpackage", quote(package)),
        fmt::arg("qapi", quote(api)), fmt::arg("ranges", fmt::join(ranges, ", ")),
        fmt::arg("affected", affected_branch), fmt::arg("vulnerable", vulnerable_branch));
}

std::string session_to_json(const GenerationSession& session) {
    json doc;
    doc["prompt_template"] = std::string(prompt_template_version());
    doc["original_prompt"] = session.original_prompt;
    json versions = json::object();
    for (const auto& [pkg, v] : session.config.user_versions) versions[pkg.name()] = v.original_text();
    doc["config"] = {{"max_iterations", session.config.max_iterations},
                     {"temperature", session.config.temperature},
                     {"user_versions", versions}};
    json iterations = json::array();
    for (const auto& it : session.iterations) {
        iterations.push_back({{"wrapped_prompt", it.wrapped_prompt},
                              {"raw_output", it.raw_output},
                              {"report", json::parse(sanitizer::report_to_json(it.report))},
                              {"gen_ms", it.gen_ms}});
    }
    doc["iterations"] = std::move(iterations);
    json bans = json::array();
    for (const auto& p : session.cumulative_ban_list) bans.push_back(p.dotted());
    doc["cumulative_ban_list"] = std::move(bans);
    doc["status"] = std::string(to_string(session.status));
    doc["final_code"] = session.final_code;
    doc["warnings"] = session.warnings;
    doc["gen_time_ms"] = session.gen_time_ms;
    doc["san_time_ms"] = session.san_time_ms;
    return doc.dump(2) + "\n";
}

std::vector<std::string> session_responses(std::string_view session_json) {
    try {
        std::vector<std::string> out;
        const auto doc = json::parse(session_json);
        for (const auto& it : doc.at("iterations")) out.push_back(it.at("raw_output"));
        return out;
    } catch (const json::exception& e) {
        throw ConfigError(fmt::format("malformed session log: {}", e.what()));
    }
}

}  // namespace apilot::guardrail
