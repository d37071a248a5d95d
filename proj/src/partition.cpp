#include "cotsel/partition.hpp"

#include <map>
#include <set>

#include "cotsel/errors.hpp"
#include "cotsel/util.hpp"

namespace cotsel {

using nlohmann::json;

std::string DifficultyPartition::digest() const {
    std::string blob;
    for (const auto& g : groups) {
        blob += std::to_string(g.u);
        blob += '|';
        for (const auto& id : g.member_ids) {
            blob += id;
            blob += ',';
        }
        blob += ';';
    }
    blob += '#';
    blob += std::to_string(difficult_count);
    return hex64(fnv1a64(blob));
}

std::vector<UncertaintyGroup> group_by_uncertainty(
    const std::vector<UncertaintyScore>& scores) {
    if (scores.empty())
        throw Error(ErrorCode::precondition, "cannot group an empty score list");

    std::set<std::string> seen;
    std::map<int, std::vector<std::string>> by_u;  // ascending u
    for (const auto& s : scores) {
        if (!seen.insert(s.sample_id).second)
            throw Error(ErrorCode::duplicate_sample,
                        "duplicate uncertainty score for sample '" + s.sample_id + "'");
        by_u[s.u].push_back(s.sample_id);
    }

    std::vector<UncertaintyGroup> groups;
    groups.reserve(by_u.size());
    for (auto it = by_u.rbegin(); it != by_u.rend(); ++it)
        groups.push_back({it->first, std::move(it->second)});
    return groups;
}

DifficultyPartition split_difficulty(std::vector<UncertaintyGroup> groups) {
    for (size_t i = 0; i + 1 < groups.size(); ++i)
        if (groups[i].u <= groups[i + 1].u)
            throw Error(ErrorCode::unordered_groups,
                        "groups must be strictly decreasing in u (u=" +
                            std::to_string(groups[i].u) + " before u=" +
                            std::to_string(groups[i + 1].u) + ")");
    for (const auto& g : groups)
        if (g.member_ids.empty())
            throw Error(ErrorCode::invariant_violation,
                        "group u=" + std::to_string(g.u) + " is empty");

    DifficultyPartition partition;
    partition.difficult_count = groups.size() / 2;
    partition.groups = std::move(groups);
    return partition;
}

std::string partition_report(const DifficultyPartition& partition) {
    std::string out = "group\tu\tsize\ttag\tmembers\n";
    for (size_t i = 0; i < partition.groups.size(); ++i) {
        const auto& g = partition.groups[i];
        out += std::to_string(i + 1);
        out += '\t';
        out += std::to_string(g.u);
        out += '\t';
        out += std::to_string(g.member_ids.size());
        out += '\t';
        out += partition.is_difficult(i) ? "difficult" : "easy";
        out += '\t';
        for (size_t m = 0; m < g.member_ids.size(); ++m) {
            if (m) out += ' ';
            out += g.member_ids[m];
        }
        out += '\n';
    }
    return out;
}

json partition_to_json(const DifficultyPartition& partition) {
    json groups = json::array();
    for (const auto& g : partition.groups)
        groups.push_back({{"u", g.u}, {"member_ids", g.member_ids}});
    return json{{"groups", groups},
                {"difficult_count", partition.difficult_count},
                {"digest", partition.digest()}};
}

DifficultyPartition partition_from_json(const json& j) {
    DifficultyPartition partition;
    for (const auto& g : j.at("groups")) {
        UncertaintyGroup group;
        group.u = g.at("u").get<int>();
        group.member_ids = g.at("member_ids").get<std::vector<std::string>>();
        partition.groups.push_back(std::move(group));
    }
    partition.difficult_count = j.at("difficult_count").get<size_t>();
    if (partition.difficult_count != partition.groups.size() / 2)
        throw Error(ErrorCode::invariant_violation,
                    "difficult_count does not match floor(n/2)");
    return partition;
}

} // namespace cotsel
