#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "cotsel/uncertainty.hpp"

namespace cotsel {

struct UncertaintyGroup {
    int u = 1;
    std::vector<std::string> member_ids;  // input order, never empty
};

/// Uncertainty groups ordered by strictly decreasing u; the first
/// floor(n/2) groups are the difficult pool, the rest the easy pool.
struct DifficultyPartition {
    std::vector<UncertaintyGroup> groups;
    size_t difficult_count = 0;

    bool is_difficult(size_t group_index) const { return group_index < difficult_count; }
    std::span<const UncertaintyGroup> difficult_groups() const {
        return {groups.data(), difficult_count};
    }
    std::span<const UncertaintyGroup> easy_groups() const {
        return {groups.data() + difficult_count, groups.size() - difficult_count};
    }

    /// Stable content hash, recorded in selection provenance.
    std::string digest() const;
};

/// One group per distinct u, sorted by decreasing u; membership order inside
/// a group follows score input order.
std::vector<UncertaintyGroup> group_by_uncertainty(
    const std::vector<UncertaintyScore>& scores);

/// Splits ordered groups into difficult/easy with difficult = first floor(n/2).
DifficultyPartition split_difficulty(std::vector<UncertaintyGroup> groups);

/// Human-readable report: one line per group with u, size, tag, member ids.
std::string partition_report(const DifficultyPartition& partition);

nlohmann::json partition_to_json(const DifficultyPartition& partition);
DifficultyPartition partition_from_json(const nlohmann::json& j);

} // namespace cotsel
