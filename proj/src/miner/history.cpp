#include "apilot/miner/history.hpp"
#include "apilot/common/error.hpp"

#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <unistd.h>

#include <fmt/format.h>

namespace apilot::miner {

using json = nlohmann::ordered_json;

void CommitRecord::validate() const {
    if (id.empty()) throw InvariantViolation("commit without id");
    if (changed_files.empty()) throw InvariantViolation(fmt::format("commit {} changes no files", id));
    for (const auto& f : changed_files) {
        if (f.path.empty() || f.path.front() == '/') {
            throw InvariantViolation(fmt::format("commit {}: path '{}' is not repository-relative", id, f.path));
        }
        if (!f.before && !f.after) {
            throw InvariantViolation(fmt::format("commit {}: {} has neither a before nor an after version", id, f.path));
        }
    }
}

namespace {

std::optional<std::string> optional_string(const json& obj, const char* key) {
    auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
}

}  // namespace

std::vector<CommitRecord> load_history_fixture(std::string_view json_text) {
    std::vector<CommitRecord> out;
    try {
        const json doc = json::parse(json_text);
        for (const auto& c : doc.at("commits")) {
            CommitRecord rec;
            rec.id = c.at("id").get<std::string>();
            rec.date = Date::parse(c.at("date").get<std::string>());
            rec.parent_id = optional_string(c, "parent_id");
            for (const auto& f : c.at("changed_files")) {
                rec.changed_files.push_back(
                    {f.at("path").get<std::string>(), optional_string(f, "before"), optional_string(f, "after")});
            }
            rec.validate();
            out.push_back(std::move(rec));
        }
    } catch (const json::exception& e) {
        throw RepositoryError(fmt::format("malformed history fixture: {}", e.what()));
    } catch (const Error& e) {
        throw RepositoryError(fmt::format("malformed history fixture: {}", e.what()));
    }
    return out;
}

std::vector<CommitRecord> load_history_fixture(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw RepositoryError(fmt::format("cannot read {}", path.string()));
    std::stringstream ss;
    ss << in.rdbuf();
    return load_history_fixture(std::string_view(ss.str()));
}

std::string history_fixture_to_string(const std::vector<CommitRecord>& commits) {
    json doc;
    doc["commits"] = json::array();
    for (const auto& c : commits) {
        json files = json::array();
        for (const auto& f : c.changed_files) {
            files.push_back({{"path", f.path},
                             {"before", f.before ? json(*f.before) : json(nullptr)},
                             {"after", f.after ? json(*f.after) : json(nullptr)}});
        }
        doc["commits"].push_back({{"id", c.id},
                                  {"date", c.date.to_string()},
                                  {"parent_id", c.parent_id ? json(*c.parent_id) : json(nullptr)},
                                  {"changed_files", std::move(files)}});
    }
    return doc.dump(2) + "\n";
}

namespace {

std::string shell_quote(std::string_view s) {
    std::string out = "'";
    for (char c : s) {
        if (c == '\'') {
            out += "'\\''";
        } else {
            out.push_back(c);
        }
    }
    out += '\'';
    return out;
}

std::string run_capture(const std::string& command) {
    FILE* pipe = ::popen(command.c_str(), "r");
    if (!pipe) throw RepositoryError(fmt::format("cannot run: {}", command));
    std::string out;
    char buf[1 << 16];
    std::size_t n = 0;
    while ((n = std::fread(buf, 1, sizeof buf, pipe)) > 0) out.append(buf, n);
    const int status = ::pclose(pipe);
    if (status != 0) throw RepositoryError(fmt::format("command failed ({}): {}", status, command));
    return out;
}

std::string git(const std::filesystem::path& repo, std::string_view args) {
    return run_capture(fmt::format("git -C {} {} 2>/dev/null", shell_quote(repo.string()), args));
}

bool is_null_sha(std::string_view sha) { return sha.find_first_not_of('0') == std::string_view::npos; }

struct RawEntry {
    std::string path;
    std::string old_blob;
    std::string new_blob;
};

// Reads many blobs with a single `git cat-file --batch`.
std::map<std::string, std::string> read_blobs(const std::filesystem::path& repo, const std::vector<std::string>& shas) {
    std::map<std::string, std::string> out;
    if (shas.empty()) return out;
    char name[] = "/tmp/apilot-blobs-XXXXXX";
    const int fd = ::mkstemp(name);
    if (fd < 0) throw RepositoryError("cannot create a temporary file");
    {
        std::string list;
        for (const auto& s : shas) list += s + "\n";
        const auto written = ::write(fd, list.data(), list.size());
        ::close(fd);
        if (written != static_cast<ssize_t>(list.size())) {
            ::unlink(name);
            throw RepositoryError("cannot write a temporary file");
        }
    }
    std::string raw;
    try {
        raw = git(repo, fmt::format("cat-file --batch < {}", shell_quote(name)));
    } catch (...) {
        ::unlink(name);
        throw;
    }
    ::unlink(name);
    std::size_t pos = 0;
    while (pos < raw.size()) {
        const std::size_t eol = raw.find('\n', pos);
        if (eol == std::string::npos) break;
        std::istringstream header(raw.substr(pos, eol - pos));
        std::string sha, type;
        std::size_t size = 0;
        header >> sha >> type >> size;
        if (type != "blob") throw RepositoryError(fmt::format("object {} is not a blob", sha));
        out[sha] = raw.substr(eol + 1, size);
        pos = eol + 1 + size + 1;
    }
    return out;
}

}  // namespace

std::vector<CommitRecord> read_git_history(const std::filesystem::path& repo) {
    try {
        git(repo, "rev-parse --verify HEAD");
    } catch (const RepositoryError&) {
        throw RepositoryError(fmt::format("{} is not a git repository with commits", repo.string()));
    }
    const std::string log = git(repo,
                                "-c log.showRoot=true log --first-parent --reverse --raw -z --no-abbrev "
                                "--no-renames --diff-merges=first-parent --format=%x01%H%x20%P%x20%cs HEAD");

    struct PendingCommit {
        CommitRecord record;
        std::vector<RawEntry> entries;
    };
    std::vector<PendingCommit> pending;
    std::vector<std::string> wanted;

    std::size_t pos = 0;
    while ((pos = log.find('\x01', pos)) != std::string::npos) {
        const std::size_t next = log.find('\x01', pos + 1);
        const std::string_view chunk =
            std::string_view(log).substr(pos + 1, (next == std::string::npos ? log.size() : next) - pos - 1);
        pos = next == std::string::npos ? log.size() : next;

        const std::size_t header_end = chunk.find('\0');
        std::istringstream header(std::string(chunk.substr(0, header_end)));
        std::vector<std::string> words;
        for (std::string w; header >> w;) words.push_back(w);
        if (words.size() < 2) throw RepositoryError("unexpected git log output");
        PendingCommit pc;
        pc.record.id = words.front();
        pc.record.date = Date::parse(words.back());
        if (words.size() > 2) pc.record.parent_id = words[1];

        std::size_t p = header_end == std::string_view::npos ? chunk.size() : header_end + 1;
        while (p < chunk.size()) {
            if (chunk[p] == '\n') {
                ++p;
                continue;
            }
            const std::size_t meta_end = chunk.find('\0', p);
            const std::size_t path_end = chunk.find('\0', meta_end + 1);
            if (meta_end == std::string_view::npos || path_end == std::string_view::npos) break;
            // ":old_mode new_mode old_sha new_sha status"
            std::istringstream meta(std::string(chunk.substr(p + 1, meta_end - p - 1)));
            std::string old_mode, new_mode, old_sha, new_sha, status;
            meta >> old_mode >> new_mode >> old_sha >> new_sha >> status;
            std::string path(chunk.substr(meta_end + 1, path_end - meta_end - 1));
            p = path_end + 1;
            const bool regular = (old_mode == "000000" || old_mode.rfind("100", 0) == 0) &&
                                 (new_mode == "000000" || new_mode.rfind("100", 0) == 0);
            if (!regular || path.size() < 3 || path.compare(path.size() - 3, 3, ".py") != 0) continue;
            RawEntry e{std::move(path), is_null_sha(old_sha) ? "" : old_sha, is_null_sha(new_sha) ? "" : new_sha};
            if (!e.old_blob.empty()) wanted.push_back(e.old_blob);
            if (!e.new_blob.empty()) wanted.push_back(e.new_blob);
            pc.entries.push_back(std::move(e));
        }
        if (!pc.entries.empty()) pending.push_back(std::move(pc));
    }

    std::sort(wanted.begin(), wanted.end());
    wanted.erase(std::unique(wanted.begin(), wanted.end()), wanted.end());
    const auto blobs = read_blobs(repo, wanted);

    std::vector<CommitRecord> out;
    out.reserve(pending.size());
    for (auto& pc : pending) {
        for (auto& e : pc.entries) {
            ChangedFile f{std::move(e.path), std::nullopt, std::nullopt};
            if (!e.old_blob.empty()) f.before = blobs.at(e.old_blob);
            if (!e.new_blob.empty()) f.after = blobs.at(e.new_blob);
            pc.record.changed_files.push_back(std::move(f));
        }
        out.push_back(std::move(pc.record));
    }
    return out;
}

std::vector<CommitRecord> read_history(const std::filesystem::path& path) {
    std::error_code ec;
    if (std::filesystem::is_directory(path, ec)) return read_git_history(path);
    if (std::filesystem::is_regular_file(path, ec)) return load_history_fixture(path);
    throw RepositoryError(fmt::format("{} is neither a git repository nor a history file", path.string()));
}

}  // namespace apilot::miner
