#pragma once

#include "apilot/guardrail/guardrail.hpp"

#include <filesystem>
#include <functional>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::eval {

struct BenchmarkEntry {
    catalog::ApiPath target_api;
    catalog::ApiKind kind = catalog::ApiKind::deprecated;
    std::string instruction_prompt;
    catalog::PackageId package;
};

/// One JSON document per line: {target_api, kind, package, prompt}. Blank
/// lines and lines starting with '#' are skipped. Throws ConfigError naming
/// the line.
std::vector<BenchmarkEntry> parse_benchmark(std::string_view jsonl);
std::vector<BenchmarkEntry> load_benchmark(const std::filesystem::path& path);
std::string benchmark_to_jsonl(std::span<const BenchmarkEntry> entries);

/// Throws InvariantViolation when a target has no record of its kind and package.
void validate_benchmark(std::span<const BenchmarkEntry> entries, const catalog::ApiCatalog& catalog);

enum class TrialMode { vanilla, guarded };

std::string_view to_string(TrialMode mode);
std::optional<TrialMode> trial_mode_from_string(std::string_view text);

struct TrialKey {
    std::size_t entry = 0;
    int trial = 0;
    TrialMode mode = TrialMode::vanilla;

    friend bool operator==(const TrialKey&, const TrialKey&) = default;
    friend auto operator<=>(const TrialKey&, const TrialKey&) = default;
};

struct TrialResult {
    TrialKey key;
    std::string raw_output;                     // last reply received
    std::optional<std::string> client_failure;  // set when the client failed; excluded from rates
    bool extraction_ok = false;
    bool parse_ok = false;
    bool contains_target = false;
    bool contains_any_outdated = false;
    int iterations = 0;
    double gen_ms = 0;
    double san_ms = 0;
    std::string session_log;  // guarded mode only

    bool completed() const { return !client_failure; }
};

/// Called once per trial so that every trial is an independent session.
using ClientFactory =
    std::function<std::unique_ptr<guardrail::LlmClient>(const BenchmarkEntry& entry, const TrialKey& key)>;

struct TrialOptions {
    int trials_per_entry = 10;
    std::vector<TrialMode> modes{TrialMode::vanilla, TrialMode::guarded};
    guardrail::GenerationConfig generation;
    bool parallel = true;
    int jobs = 0;  // 0: OpenMP default
};

/// Vanilla trials send the wrapped prompt with an empty ban list once and
/// only measure the reply; guarded trials run the full loop. Results are
/// ordered by key whatever the schedule. Throws ConfigError on bad options.
std::vector<TrialResult> run_trials(std::span<const BenchmarkEntry> entries, const ClientFactory& factory,
                                    const catalog::ApiCatalog& catalog, const TrialOptions& options = {});

/// Same, with one shared client; runs serially unless the client is concurrent.
std::vector<TrialResult> run_trials(std::span<const BenchmarkEntry> entries, guardrail::LlmClient& client,
                                    const catalog::ApiCatalog& catalog, const TrialOptions& options = {});

/// Keys tried for a trial, most specific first: "<api>/<mode>/<trial>",
/// "<api>/<mode>", "<api>".
std::vector<std::string> transcript_keys(const BenchmarkEntry& entry, const TrialKey& key);

/// Factory over a client config; mock clients replay the keyed transcript.
ClientFactory make_client_factory(const guardrail::ClientConfig& config);

// ---------------------------------------------------------------- metrics

/// Rates are nullopt when their denominator is empty.
using Rate = std::optional<double>;

/// Results for one entry and mode.
std::vector<TrialResult> select(std::span<const TrialResult> results, std::size_t entry, TrialMode mode);

Rate f_api(std::span<const TrialResult> results);
Rate f_api_plus(std::span<const TrialResult> results);
Rate extract_rate(std::span<const TrialResult> results);
/// Parsed over extracted.
Rate parse_rate(std::span<const TrialResult> results);

/// (vanilla - guarded) / vanilla * 100. Throws UndefinedReduction when vanilla is 0.
double reduction_rate(double vanilla_rate, double guarded_rate);

struct EntryMetrics {
    std::size_t entry = 0;
    TrialMode mode = TrialMode::vanilla;
    int completed = 0;
    int failed = 0;
    Rate f_api, f_api_plus, extract, parse;
    double mean_gen_ms = 0;
    double mean_san_ms = 0;
};

/// One kind and mode. `*_mean` averages per-entry rates; `*_pooled` divides
/// pooled trial counts.
struct KindMetrics {
    catalog::ApiKind kind = catalog::ApiKind::deprecated;
    TrialMode mode = TrialMode::vanilla;
    int entries = 0;
    int completed = 0;
    int failed = 0;
    Rate f_api_mean, f_api_plus_mean, f_api_pooled, f_api_plus_pooled, extract, parse;
    double mean_gen_ms = 0;
    double mean_san_ms = 0;
};

/// Reduction for one kind and metric under both aggregation conventions.
/// rate_of_means: reduction of the kind-level mean rates.
/// mean_of_rates: mean of per-entry reductions over entries whose vanilla
/// rate is positive (`defined_entries` of them).
struct KindReduction {
    catalog::ApiKind kind = catalog::ApiKind::deprecated;
    std::string metric;  // "F_API" or "F_API+"
    std::optional<double> rate_of_means;
    std::optional<double> mean_of_rates;
    int defined_entries = 0;
};

struct MetricsReport {
    std::vector<EntryMetrics> per_entry;
    std::vector<KindMetrics> per_kind;
    std::vector<KindReduction> reductions;
    int client_failures = 0;
};

MetricsReport compute_report(std::span<const BenchmarkEntry> entries, std::span<const TrialResult> results);

/// Timing values sit under "timings" keys only.
std::string report_to_json(const MetricsReport& report, std::span<const BenchmarkEntry> entries);

/// Per kind: F_API and F_API+ without and with the guardrail and R_r, then
/// the mean-of-rates reductions, extraction and parse rates, and timings.
std::string report_to_table(const MetricsReport& report);

// ---------------------------------------------------------------- persistence

std::string results_to_jsonl(std::span<const TrialResult> results);
/// Throws ConfigError.
std::vector<TrialResult> results_from_jsonl(std::string_view jsonl);

/// Creates <base>/run-YYYYMMDDTHHMMSSZ (with a numeric suffix when taken).
std::filesystem::path create_run_directory(const std::filesystem::path& base);

/// bench.jsonl, trials.jsonl, sessions/<entry>-<mode>-<trial>.json,
/// metrics.json and metrics.txt.
void write_run(const std::filesystem::path& dir, std::span<const BenchmarkEntry> entries,
               std::span<const TrialResult> results, const MetricsReport& report);

}  // namespace apilot::eval
