#include "apilot/cli/cli.hpp"

#include "apilot/advisories/advisory.hpp"
#include "apilot/catalog/catalog.hpp"
#include "apilot/common/error.hpp"
#include "apilot/evalharness/harness.hpp"
#include "apilot/guardrail/guardrail.hpp"
#include "apilot/miner/public_api.hpp"

#include <CLI11.hpp>

#include <fmt/format.h>
#include <fmt/ostream.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

namespace apilot::cli {

namespace fs = std::filesystem;

namespace {

struct Settings {
    std::string catalog_path;
    std::string client_path;
    int max_iterations = 3;
    double temperature = 0.7;
    std::vector<std::string> package_versions;
    std::string out_path;
    bool verbose = false;
    int jobs = 0;
};

/// Operational failure with a message for stderr; maps to exit 2.
struct Failure {
    std::string message;
};

std::string read_all(std::istream& in) {
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string read_file(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Failure{fmt::format("cannot read {}", path.string())};
    return read_all(in);
}

void write_file(const fs::path& path, std::string_view text) {
    if (path.has_parent_path()) fs::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
    if (!out) throw Failure{fmt::format("cannot write {}", path.string())};
}

class Command {
public:
    Command(const Settings& s, Io io, const EnvLookup& env) : s_(s), io_(io), env_(env) {}

    int mine(const std::string& repo, const std::string& package, const std::string& since,
             const std::string& source_prefix, const std::vector<std::string>& import_roots) {
        const auto out = output_catalog_path();
        miner::MineOptions opts;
        if (!since.empty()) opts.since = Date::parse(since);
        opts.diagnostics = diagnostics();
        const auto history = miner::read_history(repo);
        const auto candidates = miner::mine_repository(history, opts);

        miner::PublicApiOptions popts;
        popts.source_prefix = source_prefix;
        popts.import_roots = {import_roots.begin(), import_roots.end()};
        popts.diagnostics = diagnostics();
        const fs::path package_root = fs::is_directory(repo) ? fs::path(repo) / source_prefix : fs::path();
        const auto pub = miner::filter_public(candidates, package_root, popts);
        const auto records = miner::emit_catalog(pub, catalog::PackageId::pypi(package));

        const auto base = base_catalog(out);
        const auto merged = catalog::merge_into(base, records);
        catalog::catalog_save(merged, out);

        std::size_t removed = 0, params = 0, returns = 0;
        for (const auto& [_, d] : candidates.usage_modified) {
            removed += d.classification == miner::DeltaKind::removed;
            params += d.classification == miner::DeltaKind::params_changed;
            returns += d.classification == miner::DeltaKind::return_changed;
        }
        fmt::print(io_.out, "commits mined: {}\n", history.size());
        fmt::print(io_.out, "deprecated candidates: {}\n", candidates.deprecated.size());
        fmt::print(io_.out, "usage-modified candidates: {} (removed {}, parameters {}, return {})\n",
                   candidates.usage_modified.size(), removed, params, returns);
        fmt::print(io_.out, "catalog records from this repository: {}; catalog now holds {} records ({})\n",
                   records.size(), merged.size(), out.string());

        std::optional<long> shortest;
        bool any = false;
        for (const auto& r : records) {
            if (r.kind() != catalog::ApiKind::deprecated) continue;
            if (!any) fmt::print(io_.out, "grace periods:\n");
            any = true;
            const auto g = catalog::grace_period(r);
            if (g) {
                fmt::print(io_.out, "  {}: {} days\n", r.api_path.dotted(), *g);
                shortest = shortest ? std::min(*shortest, *g) : *g;
            } else {
                fmt::print(io_.out, "  {}: not removed yet\n", r.api_path.dotted());
            }
        }
        if (shortest) fmt::print(io_.out, "shortest grace period: {} days\n", *shortest);
        return kExitOk;
    }

    int ingest(const std::string& dir, const std::string& symbols) {
        const auto out = output_catalog_path();
        if (!fs::is_directory(dir)) throw Failure{fmt::format("{} is not a directory", dir)};
        std::optional<advisories::SymbolSupplement> supplement;
        if (!symbols.empty()) supplement = advisories::load_symbol_supplement(fs::path(symbols));
        const auto result = advisories::ingest_directory(dir, supplement ? &*supplement : nullptr);
        if (!result.errors.empty()) {
            for (const auto& e : result.errors) fmt::print(io_.err, "error: {}\n", e);
            fmt::print(io_.err, "{} malformed advisory document(s); catalog not written\n", result.errors.size());
            return kExitError;
        }
        std::vector<catalog::OutdatedApiRecord> records;
        const auto sink = [this](std::string_view line) { fmt::print(io_.err, "{}\n", line); };
        for (const auto& a : result.advisories) {
            auto rs = advisories::to_catalog_records(a, sink);
            records.insert(records.end(), rs.begin(), rs.end());
        }
        const auto base = base_catalog(out);
        const auto merged = catalog::merge_into(base, records);
        catalog::catalog_save(merged, out);
        fmt::print(io_.out, "advisories: {}\npatched records: {}\ncatalog now holds {} records ({})\n",
                   result.advisories.size(), records.size(), merged.size(), out.string());
        return kExitOk;
    }

    int check(const std::string& input, const std::string& mode, bool as_json) {
        const auto cat = load_catalog();
        const auto text = input == "-" ? read_all(io_.in) : read_file(input);
        sanitizer::SanitizeOptions opts;
        opts.user_versions = user_versions();
        opts.mode = mode == "transcript" ? sanitizer::InputMode::transcript
                    : mode == "source"   ? sanitizer::InputMode::source
                                         : sanitizer::InputMode::automatic;
        const auto report = sanitizer::sanitize(text, cat, opts);
        const auto doc = sanitizer::report_to_json(report);
        if (!s_.out_path.empty()) write_file(s_.out_path, doc);
        io_.out << (as_json ? doc : sanitizer::report_to_table(report));
        if (s_.verbose) {
            fmt::print(io_.err, "timings: extraction {:.3f} ms, parse {:.3f} ms, detect {:.3f} ms\n",
                       report.timings.extraction_ms, report.timings.parse_ms, report.timings.detect_ms);
        }
        return sanitizer::exit_status(report);
    }

    int generate(const std::string& prompt_arg) {
        const auto cat = load_catalog();
        auto client = guardrail::make_client(client_config());
        const auto prompt = prompt_arg == "-" ? read_all(io_.in) : prompt_arg;
        if (prompt.find_first_not_of(" \t\r\n") == std::string::npos) throw Failure{"empty prompt"};
        const auto config = generation_config();

        guardrail::GenerationSession session;
        try {
            session = guardrail::generate_guarded(prompt, *client, cat, config);
        } catch (const guardrail::GenerationInterrupted& e) {
            const auto log = session_log_path();
            write_file(log, guardrail::session_to_json(e.session));
            fmt::print(io_.err, "error: client failed after {} iteration(s): {}\nsession log: {}\n",
                       e.session.iterations.size(), e.what(), log.string());
            return kExitError;
        }
        const auto log = session_log_path();
        write_file(log, guardrail::session_to_json(session));

        io_.out << session.final_code;
        if (!session.final_code.empty() && session.final_code.back() != '\n') io_.out << '\n';
        if (session.status == guardrail::SessionStatus::exhausted) {
            fmt::print(io_.out, "\nWARNING: outdated APIs remain after {} iteration(s).\n", session.iterations.size());
            for (const auto& w : session.warnings) fmt::print(io_.out, "- {}\n", w);
            if (session.final_code.empty()) fmt::print(io_.out, "- no reply contained parseable code\n");
        }
        fmt::print(io_.err, "status: {} after {} iteration(s); session log: {}\n",
                   guardrail::to_string(session.status), session.iterations.size(), log.string());
        return session.status == guardrail::SessionStatus::clean ? kExitOk : kExitExhausted;
    }

    int evaluate(const std::string& bench_path, int trials, const std::string& mode) {
        const auto cat = load_catalog();
        const auto bench = eval::load_benchmark(bench_path);
        eval::validate_benchmark(bench, cat);
        const auto factory = eval::make_client_factory(client_config());
        eval::TrialOptions opts;
        opts.trials_per_entry = trials;
        opts.generation = generation_config();
        opts.jobs = s_.jobs;
        if (mode == "vanilla") opts.modes = {eval::TrialMode::vanilla};
        if (mode == "guarded") opts.modes = {eval::TrialMode::guarded};
        const auto results = eval::run_trials(bench, factory, cat, opts);
        const auto report = eval::compute_report(bench, results);
        const auto dir = eval::create_run_directory(s_.out_path.empty() ? fs::path("apilot-runs") : fs::path(s_.out_path));
        eval::write_run(dir, bench, results, report);
        io_.out << eval::report_to_table(report);
        fmt::print(io_.err, "{} trials ({} client failures); run directory: {}\n", results.size(),
                   report.client_failures, dir.string());
        return kExitOk;
    }

private:
    DiagnosticSink diagnostics() const {
        if (!s_.verbose) return null_sink();
        return [this](std::string_view line) { fmt::print(io_.err, "{}\n", line); };
    }

    fs::path output_catalog_path() const {
        if (!s_.out_path.empty()) return s_.out_path;
        const auto c = catalog_path();
        if (!c) throw Failure{"no output catalog: pass --out, --catalog or set APILOT_CATALOG"};
        return *c;
    }

    // Catalog that new records are merged into: --catalog (or the
    // environment) when it exists, else the output file itself.
    catalog::ApiCatalog base_catalog(const fs::path& out) const {
        if (const auto c = catalog_path(); c && fs::exists(*c)) return catalog::catalog_load(fs::path(*c));
        return fs::exists(out) ? catalog::catalog_load(out) : catalog::ApiCatalog();
    }

    std::optional<std::string> catalog_path() const {
        if (!s_.catalog_path.empty()) return s_.catalog_path;
        if (auto v = env_("APILOT_CATALOG"); v && !v->empty()) return v;
        return std::nullopt;
    }

    catalog::ApiCatalog load_catalog() const {
        const auto path = catalog_path();
        if (!path) throw Failure{"no catalog: pass --catalog or set APILOT_CATALOG"};
        if (!fs::exists(*path)) throw Failure{fmt::format("catalog {} does not exist", *path)};
        return catalog::catalog_load(fs::path(*path));
    }

    guardrail::ClientConfig client_config() const {
        if (s_.client_path.empty()) throw Failure{"no client configured: pass --client <config.json>"};
        return guardrail::load_client_config(s_.client_path);
    }

    sanitizer::UserVersions user_versions() const {
        sanitizer::UserVersions out;
        for (const auto& pv : s_.package_versions) {
            const auto eq = pv.find('=');
            if (eq == std::string::npos || eq == 0 || eq + 1 == pv.size()) {
                throw Failure{fmt::format("--package-version expects name=version, got '{}'", pv)};
            }
            out[catalog::PackageId::pypi(pv.substr(0, eq))] = catalog::Version::parse(pv.substr(eq + 1));
        }
        return out;
    }

    guardrail::GenerationConfig generation_config() const {
        guardrail::GenerationConfig c;
        c.max_iterations = s_.max_iterations;
        c.temperature = s_.temperature;
        c.user_versions = user_versions();
        c.validate();
        return c;
    }

    fs::path session_log_path() const {
        if (!s_.out_path.empty()) return s_.out_path;
        return eval::create_run_directory("apilot-runs") / "session.json";
    }

    const Settings& s_;
    Io io_;
    const EnvLookup& env_;
};

}  // namespace

EnvLookup process_env() {
    return [](std::string_view name) -> std::optional<std::string> {
        const char* v = std::getenv(std::string(name).c_str());
        if (!v) return std::nullopt;
        return std::string(v);
    };
}

int run_cli(const std::vector<std::string>& args, Io io, const EnvLookup& env) {
    Settings s;
    CLI::App app{"Outdated-API catalog, checker and code-generation guardrail for Python", "apilot"};
    app.fallthrough();
    app.require_subcommand(1);
    app.add_option("--catalog", s.catalog_path, "Catalog file (default: $APILOT_CATALOG)");
    app.add_option("--client", s.client_path, "LLM client config (JSON)");
    app.add_option("--max-iter", s.max_iterations, "Guardrail iterations")->capture_default_str();
    app.add_option("--temperature", s.temperature, "Sampling temperature")->capture_default_str();
    app.add_option("--package-version", s.package_versions, "Installed version, name=version (repeatable)");
    app.add_option("--out", s.out_path, "Output path");
    app.add_option("--jobs", s.jobs, "Parallel trials for eval (0: all cores)")->check(CLI::NonNegativeNumber);
    app.add_flag("-v,--verbose", s.verbose, "Print diagnostics");

    std::string repo, package, since, source_prefix;
    std::vector<std::string> import_roots;
    auto* mine = app.add_subcommand("mine", "Mine a git repository or history fixture for deprecated and changed APIs");
    mine->add_option("--repo", repo, "Git checkout or history fixture")->required();
    mine->add_option("--package", package, "Distribution name")->required();
    mine->add_option("--since", since, "Only commits on or after YYYY-MM-DD");
    mine->add_option("--source-prefix", source_prefix, "Directory holding the top-level packages, e.g. src/");
    mine->add_option("--import-root", import_roots, "Top-level module that counts as the package (repeatable)");

    std::string adv_dir, symbols;
    auto* ingest = app.add_subcommand("ingest", "Add patched APIs from a directory of advisory documents");
    ingest->add_option("--advisories", adv_dir, "Directory of advisory documents")->required();
    ingest->add_option("--symbols", symbols, "Symbol supplement for advisories without import data");

    std::string input = "-", mode = "auto";
    bool as_json = false;
    auto* check = app.add_subcommand("check", "Report outdated API uses in code or a model transcript");
    check->add_option("input", input, "File to check, or - for stdin")->capture_default_str();
    check->add_option("--mode", mode, "Input kind")
        ->check(CLI::IsMember({"auto", "transcript", "source"}))
        ->capture_default_str();
    check->add_flag("--json", as_json, "Print the machine-readable report");

    std::string prompt;
    auto* generate = app.add_subcommand("generate", "Generate code through the guardrail loop");
    generate->add_option("--prompt", prompt, "Prompt text, or - for stdin")->required();

    std::string bench, eval_mode = "both";
    int trials = 10;
    auto* evaluate = app.add_subcommand("eval", "Run a benchmark with and without the guardrail");
    evaluate->add_option("--bench", bench, "Benchmark file (JSON lines)")->required();
    evaluate->add_option("--trials", trials, "Trials per entry")->check(CLI::PositiveNumber)->capture_default_str();
    evaluate->add_option("--mode", eval_mode, "Which modes to run")
        ->check(CLI::IsMember({"both", "vanilla", "guarded"}))
        ->capture_default_str();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, io.out, io.err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, io.out, io.err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, io.out, io.err);
        return kExitError;
    }

    Command cmd(s, io, env);
    try {
        if (mine->parsed()) return cmd.mine(repo, package, since, source_prefix, import_roots);
        if (ingest->parsed()) return cmd.ingest(adv_dir, symbols);
        if (check->parsed()) return cmd.check(input, mode, as_json);
        if (generate->parsed()) return cmd.generate(prompt);
        if (evaluate->parsed()) return cmd.evaluate(bench, trials, eval_mode);
    } catch (const Failure& f) {
        fmt::print(io.err, "error: {}\n", f.message);
        return kExitError;
    } catch (const EmptyHistory& e) {
        fmt::print(io.err, "error: empty history: {}\n", e.what());
        return kExitError;
    } catch (const Error& e) {
        fmt::print(io.err, "error: {}\n", e.what());
        return kExitError;
    } catch (const std::filesystem::filesystem_error& e) {
        fmt::print(io.err, "error: {}\n", e.what());
        return kExitError;
    }
    return kExitError;
}

}  // namespace apilot::cli
