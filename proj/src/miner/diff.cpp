#include "apilot/miner/diff.hpp"

#include <algorithm>
#include <unordered_map>

namespace apilot::miner {

std::string_view to_string(DeltaKind kind) {
    switch (kind) {
        case DeltaKind::removed: return "removed";
        case DeltaKind::params_changed: return "params_changed";
        case DeltaKind::return_changed: return "return_changed";
        case DeltaKind::deprecation_added: return "deprecation_added";
    }
    return "?";
}

namespace {

bool same_multiset(std::vector<std::string> a, std::vector<std::string> b) {
    if (a.size() != b.size()) return false;
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    return a == b;
}

}  // namespace

std::vector<FunctionDelta> diff_snapshots(const std::vector<FunctionSnapshot>& old_snaps,
                                          const std::vector<FunctionSnapshot>& new_snaps, std::string_view commit,
                                          Date date, std::string_view file_path) {
    std::unordered_map<std::string_view, const FunctionSnapshot*> after;
    for (const auto& s : new_snaps) after[s.qualified_name] = &s;

    std::vector<FunctionDelta> out;
    auto emit = [&](const FunctionSnapshot& old, const FunctionSnapshot* now, DeltaKind kind) {
        FunctionDelta d;
        d.file_path = std::string(file_path);
        d.qualified_name = old.qualified_name;
        d.classification = kind;
        d.old_snapshot = old;
        if (now) d.new_snapshot = *now;
        d.commit = std::string(commit);
        d.date = date;
        out.push_back(std::move(d));
    };
    for (const auto& old : old_snaps) {
        auto it = after.find(old.qualified_name);
        if (it == after.end()) {
            emit(old, nullptr, DeltaKind::removed);
            continue;
        }
        const FunctionSnapshot& now = *it->second;
        if (old.params != now.params) emit(old, &now, DeltaKind::params_changed);
        if (!same_multiset(old.return_exprs, now.return_exprs)) emit(old, &now, DeltaKind::return_changed);
        if (!old.has_deprecation_warning && now.has_deprecation_warning) {
            emit(old, &now, DeltaKind::deprecation_added);
        }
    }
    return out;
}

}  // namespace apilot::miner
