#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here recomputes results from first principles with the dumbest
// possible code; none of it may call into the implementation paths it checks.

#include <algorithm>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace cotsel::oracles {

/// Disagreement by literal set construction over raw answer strings.
inline int brute_force_disagreement(const std::vector<std::string>& answers) {
    std::set<std::string> unique;
    for (const auto& a : answers) unique.insert(a);
    return static_cast<int>(unique.size());
}

struct RefGroup {
    int u;
    std::vector<std::string> members;
};

struct RefPartition {
    std::vector<RefGroup> groups;
    size_t difficult_count;
};

/// Naive sort-and-slice partition reference: collect distinct u values,
/// sort descending, bucket by scan, slice at floor(n/2).
inline RefPartition reference_partition(
    const std::vector<std::pair<std::string, int>>& scores) {
    std::vector<int> distinct;
    for (const auto& [id, u] : scores)
        if (std::find(distinct.begin(), distinct.end(), u) == distinct.end())
            distinct.push_back(u);
    std::sort(distinct.begin(), distinct.end(), std::greater<int>());

    RefPartition out;
    for (int u : distinct) {
        RefGroup group{u, {}};
        for (const auto& [id, su] : scores)
            if (su == u) group.members.push_back(id);
        out.groups.push_back(std::move(group));
    }
    out.difficult_count = out.groups.size() / 2;
    return out;
}

struct RefSample {
    std::string id;
    double complexity;
    bool eligible;  // has rationale and answer
};

/// Difficulty-balanced selection re-derived step by step from the stated
/// rules: per pool, pick i targets group (i mod n) advancing past spent
/// groups; picks alternate highest/lowest complexity starting with highest
/// for variant A and lowest for variant B; ties break to the smaller id;
/// ineligible samples are skipped. Returns picks in order, or nullopt when a
/// pool runs dry.
inline std::optional<std::vector<std::string>> reference_cams_select(
    const std::vector<std::vector<RefSample>>& difficult_groups,
    const std::vector<std::vector<RefSample>>& easy_groups, int m, bool variant_a) {
    std::set<std::string> picked;
    std::vector<std::string> out;

    auto pick_one = [&](const std::vector<RefSample>& group,
                        bool want_max) -> std::optional<std::string> {
        std::optional<RefSample> best;
        for (const auto& s : group) {
            if (picked.count(s.id) || !s.eligible) continue;
            if (!best) {
                best = s;
                continue;
            }
            bool better;
            if (s.complexity != best->complexity)
                better = want_max ? s.complexity > best->complexity
                                  : s.complexity < best->complexity;
            else
                better = s.id < best->id;
            if (better) best = s;
        }
        if (!best) return std::nullopt;
        return best->id;
    };

    auto pick_pool = [&](const std::vector<std::vector<RefSample>>& groups,
                         int quota) -> bool {
        if (quota > 0 && groups.empty()) return false;
        for (int i = 0; i < quota; ++i) {
            bool want_max = (i % 2 == 0) == variant_a;
            std::optional<std::string> chosen;
            for (size_t attempt = 0; attempt < groups.size() && !chosen; ++attempt)
                chosen = pick_one(groups[(i + attempt) % groups.size()], want_max);
            if (!chosen) return false;
            picked.insert(*chosen);
            out.push_back(*chosen);
        }
        return true;
    };

    int difficult_quota = m / 2;
    int easy_quota = m - difficult_quota;
    if (difficult_groups.empty()) {
        difficult_quota = 0;
        easy_quota = m;
    } else if (easy_groups.empty()) {
        difficult_quota = m;
        easy_quota = 0;
    }
    if (!pick_pool(difficult_groups, difficult_quota)) return std::nullopt;
    if (!pick_pool(easy_groups, easy_quota)) return std::nullopt;
    return out;
}

} // namespace cotsel::oracles
