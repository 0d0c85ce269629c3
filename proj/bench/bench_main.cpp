// Serial reference vs OpenMP path for each parallel kernel.
// Argument 0 runs the serial path, 1 the parallel one.

#include "apilot/advisories/advisory.hpp"
#include "apilot/evalharness/harness.hpp"
#include "apilot/miner/mine.hpp"
#include "apilot/sanitizer/sanitize.hpp"

#include "synthetic_catalog.hpp"
#include "synthetic_repo.hpp"

#include <benchmark/benchmark.h>
#include <fmt/format.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#ifndef APILOT_SOURCE_DIR
#error "APILOT_SOURCE_DIR must be defined"
#endif

namespace fs = std::filesystem;
using namespace apilot;

namespace {

const testing::synth::SyntheticCatalog& big_catalog() {
    static const auto cat = testing::synth::make_catalog(10'000, 3);
    return cat;
}

void BM_Mine(benchmark::State& state) {
    static const auto history = testing::synth::Generator(42).generate(60, 12);
    miner::MineOptions opts;
    opts.parallel = state.range(0) != 0;
    opts.diagnostics = null_sink();
    for (auto _ : state) benchmark::DoNotOptimize(miner::mine_repository(history.records, opts));
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(history.records.size()));
}

void BM_SanitizeBatch(benchmark::State& state) {
    static const auto texts = [] {
        std::vector<std::string> out;
        for (int i = 0; i < 128; ++i) {
            out.push_back("```python\n" + testing::synth::make_snippet(big_catalog(), 200, 1000 + i) + "```\n");
        }
        return out;
    }();
    const bool parallel = state.range(0) != 0;
    for (auto _ : state) {
        benchmark::DoNotOptimize(sanitizer::sanitize_batch(texts, big_catalog().catalog, {}, parallel));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(texts.size()));
}

// Copies of the fixture advisories under fresh ids.
const fs::path& advisory_dir() {
    static const fs::path dir = [] {
        const auto src = fs::path(APILOT_SOURCE_DIR) / "tests" / "data" / "advisories";
        const auto supplement = advisories::load_symbol_supplement(src / "symbols.json");
        std::vector<advisories::AdvisoryRecord> base;
        for (const auto& e : fs::directory_iterator(src / "osv")) {
            std::ifstream in(e.path());
            std::stringstream ss;
            ss << in.rdbuf();
            base.push_back(advisories::ingest_advisory(ss.str(), &supplement));
        }
        const auto out = fs::temp_directory_path() / fmt::format("apilot_bench_adv_{}", ::getpid());
        fs::create_directories(out);
        for (int i = 0; i < 600; ++i) {
            auto rec = base[static_cast<std::size_t>(i) % base.size()];
            rec.advisory_id = fmt::format("BENCH-{:04}", i);
            std::ofstream(out / (rec.advisory_id + ".json")) << advisories::render_advisory(rec);
        }
        return out;
    }();
    return dir;
}

void BM_IngestDirectory(benchmark::State& state) {
    const auto& dir = advisory_dir();
    const bool parallel = state.range(0) != 0;
    for (auto _ : state) benchmark::DoNotOptimize(advisories::ingest_directory(dir, nullptr, parallel));
}

void BM_EvalTrials(benchmark::State& state) {
    const auto& cat = big_catalog();
    static const auto setup = [&] {
        std::vector<eval::BenchmarkEntry> bench;
        auto set = std::make_shared<guardrail::TranscriptSet>();
        for (int i = 0; i < 20; ++i) {
            const auto& path = cat.paths[static_cast<std::size_t>(i) * 3];  // patched records
            bench.push_back({path, catalog::ApiKind::patched, "Call it.", catalog::PackageId::pypi(path.front())});
            const auto code = testing::synth::make_snippet(cat, 120, 77 + i);
            set->keyed[path.dotted()] = {"```python\n" + code + "```", "```python\nprint('ok')\n```"};
        }
        return std::pair{bench, set};
    }();
    eval::TrialOptions opts;
    opts.trials_per_entry = 5;
    opts.parallel = state.range(0) != 0;
    const auto set = setup.second;
    const eval::ClientFactory factory = [set](const eval::BenchmarkEntry& e, const eval::TrialKey& k) {
        return std::make_unique<guardrail::TranscriptClient>(set->lookup(eval::transcript_keys(e, k)));
    };
    for (auto _ : state) benchmark::DoNotOptimize(eval::run_trials(setup.first, factory, cat.catalog, opts));
}

}  // namespace

BENCHMARK(BM_Mine)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_SanitizeBatch)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_IngestDirectory)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_EvalTrials)->Arg(0)->Arg(1)->Unit(benchmark::kMillisecond);

int main(int argc, char** argv) {
    benchmark::Initialize(&argc, argv);
    if (benchmark::ReportUnrecognizedArguments(argc, argv)) return 1;
    benchmark::RunSpecifiedBenchmarks();
    benchmark::Shutdown();
    fs::remove_all(fs::temp_directory_path() / fmt::format("apilot_bench_adv_{}", ::getpid()));
    return 0;
}
