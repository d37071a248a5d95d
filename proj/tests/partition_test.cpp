#include <set>

#include "cotsel/errors.hpp"
#include "cotsel/partition.hpp"
#include "cotsel/util.hpp"
#include "doctest.h"
#include "support/oracles.hpp"

using namespace cotsel;

namespace {

UncertaintyScore score_of(const std::string& id, int u) {
    UncertaintyScore s;
    s.sample_id = id;
    s.u = u;
    s.k = 5;
    s.answer_multiset.assign(5, "a");
    return s;
}

std::vector<UncertaintyScore> scores_of(
    const std::vector<std::pair<std::string, int>>& pairs) {
    std::vector<UncertaintyScore> out;
    for (const auto& [id, u] : pairs) out.push_back(score_of(id, u));
    return out;
}

} // namespace

TEST_CASE("group_by_uncertainty groups by u in decreasing order") {
    auto groups =
        group_by_uncertainty(scores_of({{"q1", 3}, {"q2", 1}, {"q3", 3}, {"q4", 2}}));
    REQUIRE(groups.size() == 3);
    CHECK(groups[0].u == 3);
    CHECK(groups[0].member_ids == std::vector<std::string>{"q1", "q3"});
    CHECK(groups[1].u == 2);
    CHECK(groups[1].member_ids == std::vector<std::string>{"q4"});
    CHECK(groups[2].u == 1);
    CHECK(groups[2].member_ids == std::vector<std::string>{"q2"});
}

TEST_CASE("group_by_uncertainty handles degenerate shapes") {
    CHECK(group_by_uncertainty(scores_of({{"only", 2}})).size() == 1);

    auto all_same = group_by_uncertainty(scores_of({{"a", 2}, {"b", 2}, {"c", 2}}));
    REQUIRE(all_same.size() == 1);
    CHECK(all_same[0].member_ids.size() == 3);
}

TEST_CASE("group_by_uncertainty rejects duplicate sample ids") {
    try {
        group_by_uncertainty(scores_of({{"q1", 2}, {"q1", 3}}));
        FAIL("expected duplicate error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::duplicate_sample);
    }
}

TEST_CASE("split_difficulty follows the worked n=4 example") {
    auto partition = split_difficulty(group_by_uncertainty(
        scores_of({{"a", 4}, {"b", 3}, {"c", 2}, {"d", 1}})));
    REQUIRE(partition.groups.size() == 4);
    CHECK(partition.difficult_count == 2);
    CHECK(partition.difficult_groups()[0].u == 4);
    CHECK(partition.difficult_groups()[1].u == 3);
    CHECK(partition.easy_groups()[0].u == 2);
    CHECK(partition.easy_groups()[1].u == 1);
}

TEST_CASE("split_difficulty gives difficult floor(n/2) groups for odd n") {
    auto partition = split_difficulty(group_by_uncertainty(
        scores_of({{"a", 5}, {"b", 4}, {"c", 3}, {"d", 2}, {"e", 1}})));
    CHECK(partition.difficult_count == 2);  // floor(5/2)
    CHECK(partition.easy_groups().size() == 3);

    auto single = split_difficulty(group_by_uncertainty(scores_of({{"a", 2}, {"b", 2}})));
    CHECK(single.difficult_count == 0);  // n=1: everything easy
    CHECK(single.easy_groups().size() == 1);
}

TEST_CASE("split_difficulty rejects unordered groups") {
    std::vector<UncertaintyGroup> unordered{{2, {"a"}}, {3, {"b"}}};
    try {
        split_difficulty(unordered);
        FAIL("expected unordered error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unordered_groups);
    }
}

TEST_CASE("partition equals naive sort-and-slice reference on random inputs") {
    DetRng rng(2024);
    for (int trial = 0; trial < 300; ++trial) {
        size_t n = 1 + rng.next_below(100);
        std::vector<std::pair<std::string, int>> raw;
        for (size_t i = 0; i < n; ++i)
            raw.emplace_back("s" + std::to_string(i),
                             1 + static_cast<int>(rng.next_below(5)));

        auto partition = split_difficulty(group_by_uncertainty(scores_of(raw)));
        auto reference = oracles::reference_partition(raw);

        REQUIRE(partition.groups.size() == reference.groups.size());
        CHECK(partition.difficult_count == reference.difficult_count);
        for (size_t g = 0; g < partition.groups.size(); ++g) {
            CHECK(partition.groups[g].u == reference.groups[g].u);
            CHECK(partition.groups[g].member_ids == reference.groups[g].members);
        }

        // coverage and disjointness
        std::set<std::string> seen;
        size_t total = 0;
        for (const auto& g : partition.groups) {
            total += g.member_ids.size();
            for (const auto& id : g.member_ids) CHECK(seen.insert(id).second);
        }
        CHECK(total == raw.size());

        // order law
        if (partition.difficult_count > 0 &&
            partition.difficult_count < partition.groups.size()) {
            int min_difficult = partition.difficult_groups().back().u;
            int max_easy = partition.easy_groups().front().u;
            CHECK(min_difficult > max_easy);
        }
    }
}

TEST_CASE("partition is stable under score permutation up to within-group order") {
    auto scores = scores_of({{"a", 3}, {"b", 1}, {"c", 3}, {"d", 2}, {"e", 1}});
    auto base = split_difficulty(group_by_uncertainty(scores));

    std::reverse(scores.begin(), scores.end());
    auto reversed = split_difficulty(group_by_uncertainty(scores));

    REQUIRE(base.groups.size() == reversed.groups.size());
    for (size_t g = 0; g < base.groups.size(); ++g) {
        CHECK(base.groups[g].u == reversed.groups[g].u);
        std::set<std::string> lhs(base.groups[g].member_ids.begin(),
                                  base.groups[g].member_ids.end());
        std::set<std::string> rhs(reversed.groups[g].member_ids.begin(),
                                  reversed.groups[g].member_ids.end());
        CHECK(lhs == rhs);
    }
}

TEST_CASE("partition report and json round-trip") {
    auto partition = split_difficulty(group_by_uncertainty(
        scores_of({{"a", 4}, {"b", 3}, {"c", 2}, {"d", 1}})));

    std::string report = partition_report(partition);
    CHECK(report.find("difficult") != std::string::npos);
    CHECK(report.find("easy") != std::string::npos);

    auto restored = partition_from_json(partition_to_json(partition));
    CHECK(restored.digest() == partition.digest());
    CHECK(restored.difficult_count == partition.difficult_count);
}
