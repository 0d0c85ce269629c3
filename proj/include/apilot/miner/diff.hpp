#pragma once

#include "apilot/common/date.hpp"
#include "apilot/miner/snapshot.hpp"

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace apilot::miner {

enum class DeltaKind { removed, params_changed, return_changed, deprecation_added };

std::string_view to_string(DeltaKind kind);

struct FunctionDelta {
    std::string file_path;
    std::string qualified_name;
    DeltaKind classification = DeltaKind::removed;
    FunctionSnapshot old_snapshot;
    std::optional<FunctionSnapshot> new_snapshot;
    std::string commit;
    Date date;
    /// __all__ of the module version the delta describes: the parent's for
    /// removals, the child's otherwise.
    std::optional<std::vector<std::string>> exports;

    friend bool operator==(const FunctionDelta&, const FunctionDelta&) = default;
};

/// Deltas between the snapshots of one file in a parent and a child commit,
/// ordered by the old snapshot order, then removed < params < return <
/// deprecation for one function.
std::vector<FunctionDelta> diff_snapshots(const std::vector<FunctionSnapshot>& old_snaps,
                                          const std::vector<FunctionSnapshot>& new_snaps, std::string_view commit,
                                          Date date, std::string_view file_path = {});

}  // namespace apilot::miner
