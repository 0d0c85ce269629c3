#include "apilot/miner/mine.hpp"
#include "apilot/common/error.hpp"

#include <algorithm>
#include <exception>

#include <fmt/format.h>

namespace apilot::miner {

std::optional<long> DeprecationCandidate::grace_days() const {
    if (!removal_date) return std::nullopt;
    return days_between(deprecation.date, *removal_date);
}

namespace {

struct FileResult {
    std::vector<FunctionDelta> deltas;
    bool skipped = false;
};

FileResult diff_file(const CommitRecord& commit, const ChangedFile& file) {
    FileResult r;
    if (!file.before) return r;  // an added file has nothing to compare against
    auto before = snapshot_file(*file.before);
    if (std::holds_alternative<pyparse::ParseFailure>(before)) {
        r.skipped = true;
        return r;
    }
    FileSnapshot after;
    if (file.after) {
        auto parsed = snapshot_file(*file.after);
        if (std::holds_alternative<pyparse::ParseFailure>(parsed)) {
            r.skipped = true;
            return r;
        }
        after = std::move(std::get<FileSnapshot>(parsed));
    }
    const auto& old = std::get<FileSnapshot>(before);
    r.deltas = diff_snapshots(old.functions, after.functions, commit.id, commit.date, file.path);
    for (auto& d : r.deltas) d.exports = d.classification == DeltaKind::removed ? old.exports : after.exports;
    return r;
}

void report(const DiagnosticSink& sink, const CommitRecord& commit, const ChangedFile& file) {
    if (sink) sink(fmt::format("SKIP {} {}: parse failure", commit.id, file.path));
}

int severity(DeltaKind k) {
    switch (k) {
        case DeltaKind::removed: return 0;
        case DeltaKind::params_changed: return 1;
        case DeltaKind::return_changed: return 2;
        case DeltaKind::deprecation_added: return 3;
    }
    return 3;
}

}  // namespace

std::vector<FunctionDelta> commit_deltas(const CommitRecord& commit, const DiagnosticSink& diagnostics) {
    std::vector<FunctionDelta> out;
    for (const auto& file : commit.changed_files) {
        auto r = diff_file(commit, file);
        if (r.skipped) report(diagnostics, commit, file);
        out.insert(out.end(), std::make_move_iterator(r.deltas.begin()), std::make_move_iterator(r.deltas.end()));
    }
    return out;
}

void accumulate(CandidateSet& set, const std::vector<FunctionDelta>& deltas) {
    std::map<CandidateKey, const FunctionDelta*> usage;
    for (const auto& d : deltas) {
        CandidateKey key{d.file_path, d.qualified_name};
        if (d.classification == DeltaKind::deprecation_added) {
            set.deprecated.try_emplace(std::move(key), DeprecationCandidate{d, std::nullopt, std::nullopt});
            continue;
        }
        if (d.classification == DeltaKind::removed) {
            auto it = set.deprecated.find(key);
            if (it != set.deprecated.end() && !it->second.removal_date) {
                it->second.removal_commit = d.commit;
                it->second.removal_date = d.date;
            }
        }
        auto [it, inserted] = usage.try_emplace(std::move(key), &d);
        if (!inserted && severity(d.classification) < severity(it->second->classification)) it->second = &d;
    }
    for (const auto& [key, d] : usage) set.usage_modified.insert_or_assign(key, *d);
}

void mine_into(CandidateSet& set, std::span<const CommitRecord> commits, const MineOptions& options) {
    struct Task {
        std::size_t commit;
        std::size_t file;
    };
    std::vector<Task> tasks;
    for (std::size_t c = 0; c < commits.size(); ++c) {
        commits[c].validate();
        for (std::size_t f = 0; f < commits[c].changed_files.size(); ++f) tasks.push_back({c, f});
    }

    std::vector<FileResult> results(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    const long n = static_cast<long>(tasks.size());
    [[maybe_unused]] const bool parallel = options.parallel;
#if defined(_OPENMP)
#pragma omp parallel for schedule(dynamic) if (parallel)
#endif
    for (long i = 0; i < n; ++i) {
        try {
            const auto& t = tasks[static_cast<std::size_t>(i)];
            results[static_cast<std::size_t>(i)] = diff_file(commits[t.commit], commits[t.commit].changed_files[t.file]);
        } catch (...) {
            errors[static_cast<std::size_t>(i)] = std::current_exception();
        }
    }
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }

    std::size_t i = 0;
    for (std::size_t c = 0; c < commits.size(); ++c) {
        std::vector<FunctionDelta> deltas;
        for (const auto& file : commits[c].changed_files) {
            auto& r = results[i++];
            if (r.skipped) report(options.diagnostics, commits[c], file);
            deltas.insert(deltas.end(), std::make_move_iterator(r.deltas.begin()),
                          std::make_move_iterator(r.deltas.end()));
        }
        accumulate(set, deltas);
    }
}

CandidateSet mine_repository(std::span<const CommitRecord> commits, const MineOptions& options) {
    std::vector<CommitRecord> window;
    for (const auto& c : commits) {
        if (!options.since || !(c.date < *options.since)) window.push_back(c);
    }
    if (window.empty()) {
        throw EmptyHistory(options.since ? fmt::format("no commit on or after {}", options.since->to_string())
                                         : std::string("no commits"));
    }
    std::stable_sort(window.begin(), window.end(),
                     [](const CommitRecord& a, const CommitRecord& b) { return a.date < b.date; });
    CandidateSet set;
    mine_into(set, window, options);
    return set;
}

}  // namespace apilot::miner
