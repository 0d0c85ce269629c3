#pragma once

#include "apilot/common/diagnostics.hpp"
#include "apilot/miner/diff.hpp"
#include "apilot/miner/history.hpp"

#include <compare>
#include <map>
#include <optional>
#include <span>
#include <string>

namespace apilot::miner {

/// Functions are told apart by defining file and qualified name.
struct CandidateKey {
    std::string file_path;
    std::string qualified_name;

    friend bool operator==(const CandidateKey&, const CandidateKey&) = default;
    friend auto operator<=>(const CandidateKey&, const CandidateKey&) = default;
};

struct DeprecationCandidate {
    FunctionDelta deprecation;  // the first deprecation_added delta
    std::optional<std::string> removal_commit;
    std::optional<Date> removal_date;

    /// Days from deprecation to removal, if removed.
    std::optional<long> grace_days() const;

    friend bool operator==(const DeprecationCandidate&, const DeprecationCandidate&) = default;
};

struct CandidateSet {
    std::map<CandidateKey, DeprecationCandidate> deprecated;
    /// Latest removed / params_changed / return_changed delta per function.
    std::map<CandidateKey, FunctionDelta> usage_modified;

    bool empty() const { return deprecated.empty() && usage_modified.empty(); }

    friend bool operator==(const CandidateSet&, const CandidateSet&) = default;
};

struct MineOptions {
    std::optional<Date> since;
    /// Snapshot and diff changed files on all OpenMP threads. The serial path
    /// is the reference the parallel one is tested against.
    bool parallel = true;
    DiagnosticSink diagnostics = stderr_sink();
};

/// Deltas of one commit, files in listed order. Unparseable file versions
/// are reported as "SKIP <commit> <path>: parse failure" and contribute
/// nothing.
std::vector<FunctionDelta> commit_deltas(const CommitRecord& commit, const DiagnosticSink& diagnostics);

/// Folds the deltas of one commit into `set`. Within a commit a function
/// keeps its most severe usage change: removed, then params, then return.
void accumulate(CandidateSet& set, const std::vector<FunctionDelta>& deltas);

/// Mines `commits` in the given order into `set`. Feeding a stream in
/// consecutive batches gives the same result as feeding it whole.
void mine_into(CandidateSet& set, std::span<const CommitRecord> commits, const MineOptions& options = {});

/// Keeps commits dated on or after `options.since`, orders them by date
/// (stable, so same-day commits keep their history order) and mines them.
/// Throws EmptyHistory when nothing is left.
CandidateSet mine_repository(std::span<const CommitRecord> commits, const MineOptions& options = {});

}  // namespace apilot::miner
