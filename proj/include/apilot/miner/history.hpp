#pragma once

#include "apilot/common/date.hpp"

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::miner {

struct ChangedFile {
    std::string path;
    std::optional<std::string> before;  // absent when the commit adds the file
    std::optional<std::string> after;   // absent when the commit deletes it

    friend bool operator==(const ChangedFile&, const ChangedFile&) = default;
};

struct CommitRecord {
    std::string id;
    Date date;
    std::optional<std::string> parent_id;
    std::vector<ChangedFile> changed_files;

    /// Throws InvariantViolation for an empty file list, a file with neither
    /// side, or an absolute path.
    void validate() const;

    friend bool operator==(const CommitRecord&, const CommitRecord&) = default;
};

/// Replayable history document: {"commits": [{id, date, parent_id,
/// changed_files: [{path, before, after}]}]}. Throws RepositoryError.
std::vector<CommitRecord> load_history_fixture(std::string_view json_text);
std::vector<CommitRecord> load_history_fixture(const std::filesystem::path& path);
std::string history_fixture_to_string(const std::vector<CommitRecord>& commits);

/// Commits reachable from HEAD along first parents, oldest first, each with
/// the .py files it changed relative to its first parent. Reads through the
/// git command-line tool. Throws RepositoryError.
std::vector<CommitRecord> read_git_history(const std::filesystem::path& repo);

/// Git checkout or fixture file, by what `path` is.
std::vector<CommitRecord> read_history(const std::filesystem::path& path);

}  // namespace apilot::miner
