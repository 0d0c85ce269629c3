#include "apilot/evalharness/harness.hpp"

#include "apilot/catalog/catalog.hpp"
#include "apilot/common/error.hpp"

#include <json.hpp>

#include <fmt/format.h>

#include <algorithm>
#include <chrono>
#include <ctime>
#include <exception>
#include <fstream>
#include <map>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace apilot::eval {

using json = nlohmann::ordered_json;
using catalog::ApiKind;
using catalog::ApiPath;

namespace {

constexpr ApiKind kKinds[] = {ApiKind::deprecated, ApiKind::patched, ApiKind::usage_modified};
constexpr TrialMode kModes[] = {TrialMode::vanilla, TrialMode::guarded};

std::string read_file(const std::filesystem::path& path, std::string_view what) {
    std::ifstream in(path);
    if (!in) throw ConfigError(fmt::format("cannot read {} {}", what, path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw ConfigError(fmt::format("cannot write {}", path.string()));
}

template <typename F>
void for_each_line(std::string_view text, F&& f) {
    std::size_t start = 0;
    int line_no = 0;
    while (start < text.size()) {
        auto end = text.find('\n', start);
        if (end == std::string_view::npos) end = text.size();
        ++line_no;
        auto line = text.substr(start, end - start);
        start = end + 1;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const auto first = line.find_first_not_of(" \t");
        if (first == std::string_view::npos || line[first] == '#') continue;
        f(line, line_no);
    }
}

json rate_json(const Rate& r) {
    return r ? json(*r) : json(nullptr);
}

bool names_target(const sanitizer::Finding& f, const ApiPath& target) {
    if (f.api_path == target || f.record.api_path == target) return true;
    return std::any_of(f.also.begin(), f.also.end(), [&](const auto& r) { return r.api_path == target; });
}

void measure(TrialResult& r, const sanitizer::SanitizationReport& report, const ApiPath& target) {
    r.contains_any_outdated = !report.findings.empty();
    r.contains_target = std::any_of(report.findings.begin(), report.findings.end(),
                                    [&](const auto& f) { return names_target(f, target); });
}

using Clock = std::chrono::steady_clock;

TrialResult run_vanilla(const BenchmarkEntry& entry, const TrialKey& key, guardrail::LlmClient& client,
                        const catalog::ApiCatalog& catalog, const guardrail::GenerationConfig& config) {
    TrialResult r;
    r.key = key;
    const auto prompt = guardrail::wrap_prompt(entry.instruction_prompt, {});
    const auto start = Clock::now();
    try {
        r.raw_output = client.send(prompt, config.temperature);
    } catch (const ClientFailure& e) {
        r.client_failure = e.what();
        return r;
    }
    r.gen_ms = std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    r.iterations = 1;
    sanitizer::SanitizeOptions options;
    options.user_versions = config.user_versions;
    const auto report = sanitizer::sanitize(r.raw_output, catalog, options);
    r.san_ms = report.timings.total_ms();
    r.extraction_ok = report.extraction == sanitizer::StageStatus::ok;
    r.parse_ok = report.parse == sanitizer::StageStatus::ok;
    measure(r, report, entry.target_api);
    json log;
    log["mode"] = "vanilla";
    log["wrapped_prompt"] = prompt;
    log["raw_output"] = r.raw_output;
    log["report"] = json::parse(sanitizer::report_to_json(report));
    r.session_log = log.dump(2) + "\n";
    return r;
}

TrialResult run_guarded(const BenchmarkEntry& entry, const TrialKey& key, guardrail::LlmClient& client,
                        const catalog::ApiCatalog& catalog, const guardrail::GenerationConfig& config) {
    TrialResult r;
    r.key = key;
    guardrail::GenerationSession session;
    try {
        session = guardrail::generate_guarded(entry.instruction_prompt, client, catalog, config);
    } catch (const guardrail::GenerationInterrupted& e) {
        r.client_failure = e.what();
        r.iterations = static_cast<int>(e.session.iterations.size());
        return r;
    }
    r.iterations = static_cast<int>(session.iterations.size());
    r.gen_ms = session.gen_time_ms;
    r.san_ms = session.san_time_ms;
    if (!session.iterations.empty()) r.raw_output = session.iterations.back().raw_output;
    const sanitizer::SanitizationReport* delivered = nullptr;
    for (const auto& it : session.iterations) {
        if (it.report.extraction == sanitizer::StageStatus::ok) r.extraction_ok = true;
        if (it.report.parse == sanitizer::StageStatus::ok) delivered = &it.report;
    }
    r.parse_ok = delivered != nullptr;
    if (delivered) measure(r, *delivered, entry.target_api);
    r.session_log = guardrail::session_to_json(session);
    return r;
}

class BorrowedClient final : public guardrail::LlmClient {
public:
    explicit BorrowedClient(guardrail::LlmClient& inner) : inner_(inner) {}
    std::string send(std::string_view prompt, double temperature) override { return inner_.send(prompt, temperature); }
    bool concurrent() const override { return inner_.concurrent(); }

private:
    guardrail::LlmClient& inner_;
};

double mean(const std::vector<double>& v) {
    if (v.empty()) return 0;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

Rate fraction(std::size_t num, std::size_t den) {
    if (den == 0) return std::nullopt;
    return static_cast<double>(num) / static_cast<double>(den);
}

}  // namespace

// ---------------------------------------------------------------- benchmark file

std::vector<BenchmarkEntry> parse_benchmark(std::string_view jsonl) {
    std::vector<BenchmarkEntry> out;
    for_each_line(jsonl, [&](std::string_view line, int line_no) {
        try {
            const auto doc = json::parse(line);
            BenchmarkEntry e;
            e.target_api = ApiPath::parse(doc.at("target_api").get<std::string>());
            const auto kind = doc.at("kind").get<std::string>();
            const auto parsed = catalog::api_kind_from_string(kind);
            if (!parsed) throw ConfigError(fmt::format("unknown kind '{}'", kind));
            e.kind = *parsed;
            e.package = catalog::PackageId::pypi(doc.at("package").get<std::string>());
            e.instruction_prompt = doc.at("prompt").get<std::string>();
            if (e.instruction_prompt.empty()) throw ConfigError("empty prompt");
            out.push_back(std::move(e));
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("benchmark line {}: {}", line_no, e.what()));
        } catch (const Error& e) {
            throw ConfigError(fmt::format("benchmark line {}: {}", line_no, e.what()));
        }
    });
    return out;
}

std::vector<BenchmarkEntry> load_benchmark(const std::filesystem::path& path) {
    return parse_benchmark(read_file(path, "benchmark"));
}

std::string benchmark_to_jsonl(std::span<const BenchmarkEntry> entries) {
    std::string out;
    for (const auto& e : entries) {
        json doc;
        doc["target_api"] = e.target_api.dotted();
        doc["kind"] = std::string(catalog::to_string(e.kind));
        doc["package"] = e.package.name();
        doc["prompt"] = e.instruction_prompt;
        out += doc.dump() + "\n";
    }
    return out;
}

void validate_benchmark(std::span<const BenchmarkEntry> entries, const catalog::ApiCatalog& catalog) {
    for (const auto& e : entries) {
        const auto idx = catalog.find_by_path(e.target_api.dotted());
        const bool found = std::any_of(idx.begin(), idx.end(), [&](std::size_t i) {
            const auto& r = catalog.at(i);
            return r.kind() == e.kind && r.package == e.package;
        });
        if (!found) {
            throw InvariantViolation(fmt::format("benchmark target {} ({}, {}) is not in the catalog",
                                                 e.target_api.dotted(), catalog::to_string(e.kind), e.package.name()));
        }
    }
}

std::string_view to_string(TrialMode mode) {
    return mode == TrialMode::vanilla ? "vanilla" : "guarded";
}

std::optional<TrialMode> trial_mode_from_string(std::string_view text) {
    if (text == "vanilla") return TrialMode::vanilla;
    if (text == "guarded") return TrialMode::guarded;
    return std::nullopt;
}

// ---------------------------------------------------------------- trials

std::vector<TrialResult> run_trials(std::span<const BenchmarkEntry> entries, const ClientFactory& factory,
                                    const catalog::ApiCatalog& catalog, const TrialOptions& options) {
    if (options.trials_per_entry < 1) {
        throw ConfigError(fmt::format("trials per entry must be at least 1, got {}", options.trials_per_entry));
    }
    if (options.jobs < 0) throw ConfigError(fmt::format("jobs must not be negative, got {}", options.jobs));
    options.generation.validate();

    std::vector<TrialKey> keys;
    for (std::size_t e = 0; e < entries.size(); ++e) {
        for (int t = 0; t < options.trials_per_entry; ++t) {
            for (auto m : kModes) {
                if (std::find(options.modes.begin(), options.modes.end(), m) != options.modes.end()) {
                    keys.push_back({e, t, m});
                }
            }
        }
    }

    std::vector<TrialResult> results(keys.size());
    std::vector<std::exception_ptr> errors(keys.size());
    const auto n = static_cast<std::ptrdiff_t>(keys.size());
    const auto body = [&](std::ptrdiff_t i) {
        try {
            const auto& key = keys[static_cast<std::size_t>(i)];
            const auto& entry = entries[key.entry];
            auto client = factory(entry, key);
            if (!client) throw ConfigError("client factory returned no client");
            results[static_cast<std::size_t>(i)] =
                key.mode == TrialMode::vanilla ? run_vanilla(entry, key, *client, catalog, options.generation)
                                               : run_guarded(entry, key, *client, catalog, options.generation);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    };
#ifdef _OPENMP
    const int threads = options.jobs > 0 ? options.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(threads) if (options.parallel)
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
#else
    for (std::ptrdiff_t i = 0; i < n; ++i) body(i);
#endif
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

std::vector<TrialResult> run_trials(std::span<const BenchmarkEntry> entries, guardrail::LlmClient& client,
                                    const catalog::ApiCatalog& catalog, const TrialOptions& options) {
    auto opts = options;
    opts.parallel = options.parallel && client.concurrent();
    return run_trials(
        entries, [&](const BenchmarkEntry&, const TrialKey&) { return std::make_unique<BorrowedClient>(client); },
        catalog, opts);
}

std::vector<std::string> transcript_keys(const BenchmarkEntry& entry, const TrialKey& key) {
    const auto api = entry.target_api.dotted();
    const auto mode = to_string(key.mode);
    return {fmt::format("{}/{}/{}", api, mode, key.trial), fmt::format("{}/{}", api, mode), api};
}

ClientFactory make_client_factory(const guardrail::ClientConfig& config) {
    if (config.kind == "mock") {
        auto set = std::make_shared<const guardrail::TranscriptSet>(guardrail::load_transcript_set(config.transcript_path));
        return [set](const BenchmarkEntry& entry, const TrialKey& key) -> std::unique_ptr<guardrail::LlmClient> {
            return std::make_unique<guardrail::TranscriptClient>(set->lookup(transcript_keys(entry, key)));
        };
    }
    if (config.kind == "http") {
        guardrail::HttpClient probe(config.http);  // surfaces configuration errors before any trial runs
        return [http = config.http](const BenchmarkEntry&, const TrialKey&) -> std::unique_ptr<guardrail::LlmClient> {
            return std::make_unique<guardrail::HttpClient>(http);
        };
    }
    throw ConfigError(fmt::format("unknown client kind '{}'", config.kind));
}

// ---------------------------------------------------------------- metrics

std::vector<TrialResult> select(std::span<const TrialResult> results, std::size_t entry, TrialMode mode) {
    std::vector<TrialResult> out;
    for (const auto& r : results) {
        if (r.key.entry == entry && r.key.mode == mode) out.push_back(r);
    }
    return out;
}

Rate f_api(std::span<const TrialResult> results) {
    std::size_t hit = 0, done = 0;
    for (const auto& r : results) {
        if (!r.completed()) continue;
        ++done;
        hit += r.contains_target;
    }
    return fraction(hit, done);
}

Rate f_api_plus(std::span<const TrialResult> results) {
    std::size_t hit = 0, done = 0;
    for (const auto& r : results) {
        if (!r.completed()) continue;
        ++done;
        hit += r.contains_any_outdated;
    }
    return fraction(hit, done);
}

Rate extract_rate(std::span<const TrialResult> results) {
    std::size_t ok = 0, done = 0;
    for (const auto& r : results) {
        if (!r.completed()) continue;
        ++done;
        ok += r.extraction_ok;
    }
    return fraction(ok, done);
}

Rate parse_rate(std::span<const TrialResult> results) {
    std::size_t ok = 0, extracted = 0;
    for (const auto& r : results) {
        if (!r.completed() || !r.extraction_ok) continue;
        ++extracted;
        ok += r.parse_ok;
    }
    return fraction(ok, extracted);
}

double reduction_rate(double vanilla_rate, double guarded_rate) {
    if (!(vanilla_rate > 0)) {
        throw UndefinedReduction(fmt::format("reduction rate needs a positive baseline, got {}", vanilla_rate));
    }
    return (vanilla_rate - guarded_rate) / vanilla_rate * 100.0;
}

MetricsReport compute_report(std::span<const BenchmarkEntry> entries, std::span<const TrialResult> results) {
    MetricsReport report;
    std::map<std::pair<std::size_t, TrialMode>, std::vector<TrialResult>> groups;
    for (const auto& r : results) {
        if (r.key.entry >= entries.size()) {
            throw InvariantViolation(fmt::format("trial refers to entry {} of {}", r.key.entry, entries.size()));
        }
        groups[{r.key.entry, r.key.mode}].push_back(r);
        report.client_failures += !r.completed();
    }

    for (const auto& [k, rs] : groups) {
        EntryMetrics m;
        m.entry = k.first;
        m.mode = k.second;
        std::vector<double> gen, san;
        for (const auto& r : rs) {
            if (!r.completed()) {
                ++m.failed;
                continue;
            }
            ++m.completed;
            gen.push_back(r.gen_ms);
            san.push_back(r.san_ms);
        }
        m.f_api = f_api(rs);
        m.f_api_plus = f_api_plus(rs);
        m.extract = extract_rate(rs);
        m.parse = parse_rate(rs);
        m.mean_gen_ms = mean(gen);
        m.mean_san_ms = mean(san);
        report.per_entry.push_back(m);
    }

    auto entry_metrics = [&](std::size_t entry, TrialMode mode) -> const EntryMetrics* {
        for (const auto& m : report.per_entry) {
            if (m.entry == entry && m.mode == mode) return &m;
        }
        return nullptr;
    };

    for (auto kind : kKinds) {
        for (auto mode : kModes) {
            KindMetrics km;
            km.kind = kind;
            km.mode = mode;
            std::vector<TrialResult> pooled;
            std::vector<double> fa, fap;
            for (const auto& m : report.per_entry) {
                if (m.mode != mode || entries[m.entry].kind != kind) continue;
                ++km.entries;
                km.completed += m.completed;
                km.failed += m.failed;
                if (m.f_api) fa.push_back(*m.f_api);
                if (m.f_api_plus) fap.push_back(*m.f_api_plus);
                const auto& g = groups.at({m.entry, mode});
                pooled.insert(pooled.end(), g.begin(), g.end());
            }
            if (km.entries == 0) continue;
            if (!fa.empty()) km.f_api_mean = mean(fa);
            if (!fap.empty()) km.f_api_plus_mean = mean(fap);
            km.f_api_pooled = f_api(pooled);
            km.f_api_plus_pooled = f_api_plus(pooled);
            km.extract = extract_rate(pooled);
            km.parse = parse_rate(pooled);
            std::vector<double> gen, san;
            for (const auto& r : pooled) {
                if (!r.completed()) continue;
                gen.push_back(r.gen_ms);
                san.push_back(r.san_ms);
            }
            km.mean_gen_ms = mean(gen);
            km.mean_san_ms = mean(san);
            report.per_kind.push_back(km);
        }
    }

    auto kind_metrics = [&](ApiKind kind, TrialMode mode) -> const KindMetrics* {
        for (const auto& k : report.per_kind) {
            if (k.kind == kind && k.mode == mode) return &k;
        }
        return nullptr;
    };

    for (auto kind : kKinds) {
        const auto* van = kind_metrics(kind, TrialMode::vanilla);
        const auto* gua = kind_metrics(kind, TrialMode::guarded);
        if (!van || !gua) continue;
        for (bool plus : {false, true}) {
            KindReduction red;
            red.kind = kind;
            red.metric = plus ? "F_API+" : "F_API";
            const auto& vm = plus ? van->f_api_plus_mean : van->f_api_mean;
            const auto& gm = plus ? gua->f_api_plus_mean : gua->f_api_mean;
            if (vm && gm && *vm > 0) red.rate_of_means = reduction_rate(*vm, *gm);
            std::vector<double> per;
            for (std::size_t e = 0; e < entries.size(); ++e) {
                if (entries[e].kind != kind) continue;
                const auto* ve = entry_metrics(e, TrialMode::vanilla);
                const auto* ge = entry_metrics(e, TrialMode::guarded);
                if (!ve || !ge) continue;
                const auto& v = plus ? ve->f_api_plus : ve->f_api;
                const auto& g = plus ? ge->f_api_plus : ge->f_api;
                if (v && g && *v > 0) per.push_back(reduction_rate(*v, *g));
            }
            red.defined_entries = static_cast<int>(per.size());
            if (!per.empty()) red.mean_of_rates = mean(per);
            report.reductions.push_back(red);
        }
    }
    return report;
}

std::string report_to_json(const MetricsReport& report, std::span<const BenchmarkEntry> entries) {
    json doc;
    json es = json::array();
    for (const auto& m : report.per_entry) {
        const auto& e = entries[m.entry];
        es.push_back({{"entry", m.entry},
                      {"target_api", e.target_api.dotted()},
                      {"kind", std::string(catalog::to_string(e.kind))},
                      {"package", e.package.name()},
                      {"mode", std::string(to_string(m.mode))},
                      {"completed", m.completed},
                      {"client_failures", m.failed},
                      {"f_api", rate_json(m.f_api)},
                      {"f_api_plus", rate_json(m.f_api_plus)},
                      {"extract_rate", rate_json(m.extract)},
                      {"parse_rate", rate_json(m.parse)},
                      {"timings", {{"mean_gen_ms", m.mean_gen_ms}, {"mean_san_ms", m.mean_san_ms}}}});
    }
    json ks = json::array();
    for (const auto& k : report.per_kind) {
        ks.push_back({{"kind", std::string(catalog::to_string(k.kind))},
                      {"mode", std::string(to_string(k.mode))},
                      {"entries", k.entries},
                      {"completed", k.completed},
                      {"client_failures", k.failed},
                      {"f_api_mean", rate_json(k.f_api_mean)},
                      {"f_api_plus_mean", rate_json(k.f_api_plus_mean)},
                      {"f_api_pooled", rate_json(k.f_api_pooled)},
                      {"f_api_plus_pooled", rate_json(k.f_api_plus_pooled)},
                      {"extract_rate", rate_json(k.extract)},
                      {"parse_rate", rate_json(k.parse)},
                      {"timings", {{"mean_gen_ms", k.mean_gen_ms}, {"mean_san_ms", k.mean_san_ms}}}});
    }
    json rs = json::array();
    for (const auto& r : report.reductions) {
        rs.push_back({{"kind", std::string(catalog::to_string(r.kind))},
                      {"metric", r.metric},
                      {"rate_of_means_pct", rate_json(r.rate_of_means)},
                      {"mean_of_rates_pct", rate_json(r.mean_of_rates)},
                      {"defined_entries", r.defined_entries}});
    }
    doc["entries"] = std::move(es);
    doc["kinds"] = std::move(ks);
    doc["reductions"] = std::move(rs);
    doc["client_failures"] = report.client_failures;
    return doc.dump(2) + "\n";
}

std::string report_to_table(const MetricsReport& report) {
    if (report.per_kind.empty()) return "no trials\n";
    auto rate = [](const Rate& r) { return r ? fmt::format("{:.4f}", *r) : std::string("-"); };
    auto pct = [](const std::optional<double>& r) { return r ? fmt::format("{:.2f}%", *r) : std::string("n/a"); };
    auto find_kind = [&](ApiKind kind, TrialMode mode) -> const KindMetrics* {
        for (const auto& k : report.per_kind) {
            if (k.kind == kind && k.mode == mode) return &k;
        }
        return nullptr;
    };
    auto find_red = [&](ApiKind kind, std::string_view metric) -> const KindReduction* {
        for (const auto& r : report.reductions) {
            if (r.kind == kind && r.metric == metric) return &r;
        }
        return nullptr;
    };

    std::string out = fmt::format("{:<16}{:>11}{:>10}{:>9}{:>12}{:>11}{:>9}\n", "kind", "F_API w/o", "F_API w/",
                                  "R_r", "F_API+ w/o", "F_API+ w/", "R_r");
    for (auto kind : kKinds) {
        const auto* v = find_kind(kind, TrialMode::vanilla);
        const auto* g = find_kind(kind, TrialMode::guarded);
        if (!v && !g) continue;
        const auto* r1 = find_red(kind, "F_API");
        const auto* r2 = find_red(kind, "F_API+");
        out += fmt::format("{:<16}{:>11}{:>10}{:>9}{:>12}{:>11}{:>9}\n", catalog::to_string(kind),
                           rate(v ? v->f_api_mean : Rate{}), rate(g ? g->f_api_mean : Rate{}),
                           pct(r1 ? r1->rate_of_means : std::nullopt), rate(v ? v->f_api_plus_mean : Rate{}),
                           rate(g ? g->f_api_plus_mean : Rate{}), pct(r2 ? r2->rate_of_means : std::nullopt));
    }
    if (!report.reductions.empty()) {
        out += fmt::format("\nR_r as mean of per-API reductions\n{:<16}{:>10}{:>10}{:>7}\n", "kind", "F_API", "F_API+",
                           "APIs");
        for (auto kind : kKinds) {
            const auto* r1 = find_red(kind, "F_API");
            const auto* r2 = find_red(kind, "F_API+");
            if (!r1 || !r2) continue;
            out += fmt::format("{:<16}{:>10}{:>10}{:>7}\n", catalog::to_string(kind), pct(r1->mean_of_rates),
                               pct(r2->mean_of_rates), r1->defined_entries);
        }
    }
    out += fmt::format("\n{:<16}{:<9}{:>6}{:>8}{:>9}{:>8}{:>11}{:>11}\n", "kind", "mode", "done", "failed", "extract",
                       "parse", "gen ms", "san ms");
    for (const auto& k : report.per_kind) {
        out += fmt::format("{:<16}{:<9}{:>6}{:>8}{:>9}{:>8}{:>11.1f}{:>11.3f}\n", catalog::to_string(k.kind),
                           to_string(k.mode), k.completed, k.failed, rate(k.extract), rate(k.parse), k.mean_gen_ms,
                           k.mean_san_ms);
    }
    return out;
}

// ---------------------------------------------------------------- persistence

std::string results_to_jsonl(std::span<const TrialResult> results) {
    std::string out;
    for (const auto& r : results) {
        json doc;
        doc["entry"] = r.key.entry;
        doc["trial"] = r.key.trial;
        doc["mode"] = std::string(to_string(r.key.mode));
        doc["raw_output"] = r.raw_output;
        doc["client_failure"] = r.client_failure ? json(*r.client_failure) : json(nullptr);
        doc["extraction_ok"] = r.extraction_ok;
        doc["parse_ok"] = r.parse_ok;
        doc["contains_target"] = r.contains_target;
        doc["contains_any_outdated"] = r.contains_any_outdated;
        doc["iterations"] = r.iterations;
        doc["timings"] = {{"gen_ms", r.gen_ms}, {"san_ms", r.san_ms}};
        out += doc.dump() + "\n";
    }
    return out;
}

std::vector<TrialResult> results_from_jsonl(std::string_view jsonl) {
    std::vector<TrialResult> out;
    for_each_line(jsonl, [&](std::string_view line, int line_no) {
        try {
            const auto doc = json::parse(line);
            TrialResult r;
            r.key.entry = doc.at("entry").get<std::size_t>();
            r.key.trial = doc.at("trial").get<int>();
            const auto mode = trial_mode_from_string(doc.at("mode").get<std::string>());
            if (!mode) throw ConfigError("unknown mode");
            r.key.mode = *mode;
            r.raw_output = doc.at("raw_output").get<std::string>();
            if (!doc.at("client_failure").is_null()) r.client_failure = doc["client_failure"].get<std::string>();
            r.extraction_ok = doc.at("extraction_ok").get<bool>();
            r.parse_ok = doc.at("parse_ok").get<bool>();
            r.contains_target = doc.at("contains_target").get<bool>();
            r.contains_any_outdated = doc.at("contains_any_outdated").get<bool>();
            r.iterations = doc.at("iterations").get<int>();
            r.gen_ms = doc.at("timings").at("gen_ms").get<double>();
            r.san_ms = doc.at("timings").at("san_ms").get<double>();
            out.push_back(std::move(r));
        } catch (const json::exception& e) {
            throw ConfigError(fmt::format("trial log line {}: {}", line_no, e.what()));
        } catch (const ConfigError& e) {
            throw ConfigError(fmt::format("trial log line {}: {}", line_no, e.what()));
        }
    });
    return out;
}

std::filesystem::path create_run_directory(const std::filesystem::path& base) {
    std::filesystem::create_directories(base);
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char stamp[32];
    std::strftime(stamp, sizeof stamp, "run-%Y%m%dT%H%M%SZ", &tm);
    for (int n = 1;; ++n) {
        auto dir = base / (n == 1 ? std::string(stamp) : fmt::format("{}-{}", stamp, n));
        if (std::filesystem::create_directory(dir)) return dir;
    }
}

void write_run(const std::filesystem::path& dir, std::span<const BenchmarkEntry> entries,
               std::span<const TrialResult> results, const MetricsReport& report) {
    std::filesystem::create_directories(dir / "sessions");
    write_file(dir / "bench.jsonl", benchmark_to_jsonl(entries));
    write_file(dir / "trials.jsonl", results_to_jsonl(results));
    for (const auto& r : results) {
        if (r.session_log.empty()) continue;
        write_file(dir / "sessions" / fmt::format("{}-{}-{}.json", r.key.entry, to_string(r.key.mode), r.key.trial),
                   r.session_log);
    }
    write_file(dir / "metrics.json", report_to_json(report, entries));
    write_file(dir / "metrics.txt", report_to_table(report));
}

}  // namespace apilot::eval
