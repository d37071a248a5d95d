#include "cotsel/selector.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "cotsel/errors.hpp"
#include "cotsel/prompting.hpp"
#include "cotsel/util.hpp"

namespace cotsel {

using nlohmann::json;

const char* strategy_name(Strategy strategy) {
    switch (strategy) {
        case Strategy::cams_balanced: return "cams_balanced";
        case Strategy::random_fewshot: return "random_fewshot";
        case Strategy::uncertainty_only: return "uncertainty_only";
        case Strategy::complexity_only: return "complexity_only";
        case Strategy::all_difficult: return "all_difficult";
        case Strategy::all_easy: return "all_easy";
        case Strategy::zero_shot: return "zero_shot";
    }
    return "unknown";
}

std::vector<std::string> strategy_names() {
    return {"cams_balanced", "random_fewshot",  "uncertainty_only", "complexity_only",
            "all_difficult", "all_easy",        "zero_shot"};
}

Strategy strategy_from_name(const std::string& name) {
    for (Strategy s : {Strategy::cams_balanced, Strategy::random_fewshot,
                       Strategy::uncertainty_only, Strategy::complexity_only,
                       Strategy::all_difficult, Strategy::all_easy, Strategy::zero_shot})
        if (name == strategy_name(s)) return s;
    std::string valid;
    for (const auto& n : strategy_names()) valid += (valid.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::usage,
                "unknown strategy '" + name + "' (valid: " + valid + ")");
}

bool strategy_is_seeded(Strategy strategy) {
    return strategy == Strategy::random_fewshot || strategy == Strategy::uncertainty_only;
}

std::vector<std::string> ExemplarSet::ids() const {
    std::vector<std::string> out;
    out.reserve(exemplars.size());
    for (const auto& e : exemplars) out.push_back(e.sample_id);
    return out;
}

namespace {

struct Candidate {
    std::string id;
    double score = 0.0;   // complexity; 0 for strategies that ignore it
    int u = 0;
    bool from_difficult = false;
    const Sample* sample = nullptr;
};

struct SelectionContext {
    const DifficultyPartition& partition;
    const std::map<std::string, double>& scores;
    const Corpus& train;
    bool need_scores;
    std::vector<std::pair<std::string, std::string>>& skipped;

    Candidate make_candidate(const std::string& id, int u, bool difficult) const {
        Candidate c;
        c.id = id;
        c.u = u;
        c.from_difficult = difficult;
        c.sample = train.find(id);
        if (need_scores) {
            auto it = scores.find(id);
            if (it == scores.end())
                throw Error(ErrorCode::missing_complexity,
                            "no complexity score for partition member '" + id + "'");
            c.score = it->second;
        }
        return c;
    }

    bool eligible(const Candidate& c) const {
        return c.sample != nullptr && c.sample->has_rationale() &&
               !c.sample->gold_answer.empty();
    }

    void record_skip(const Candidate& c, const char* reason) const {
        skipped.emplace_back(c.id, reason);
    }
};

// Pool of candidates per uncertainty group, preserving partition group order.
struct GroupPool {
    std::vector<std::vector<Candidate>> groups;

    bool empty_of_unpicked(const std::set<std::string>& picked) const {
        for (const auto& g : groups)
            for (const auto& c : g)
                if (!picked.count(c.id)) return false;
        return true;
    }
};

GroupPool build_pool(const SelectionContext& ctx, bool difficult) {
    GroupPool pool;
    auto groups = difficult ? ctx.partition.difficult_groups()
                            : ctx.partition.easy_groups();
    for (const auto& g : groups) {
        std::vector<Candidate> members;
        members.reserve(g.member_ids.size());
        for (const auto& id : g.member_ids)
            members.push_back(ctx.make_candidate(id, g.u, difficult));
        pool.groups.push_back(std::move(members));
    }
    return pool;
}

// Best unpicked eligible candidate of one group by (score, id) order; walks
// past ineligible ones, recording each skip. Null when the group is spent.
const Candidate* pick_in_group(const SelectionContext& ctx,
                               const std::vector<Candidate>& group, PickKind kind,
                               const std::set<std::string>& picked) {
    std::vector<const Candidate*> order;
    order.reserve(group.size());
    for (const auto& c : group)
        if (!picked.count(c.id)) order.push_back(&c);
    std::sort(order.begin(), order.end(), [&](const Candidate* a, const Candidate* b) {
        if (a->score != b->score)
            return kind == PickKind::argmax ? a->score > b->score : a->score < b->score;
        return a->id < b->id;  // deterministic tie-break
    });
    for (const Candidate* c : order) {
        if (ctx.eligible(*c)) return c;
        ctx.record_skip(*c, "missing rationale");
    }
    return nullptr;
}

// Difficulty-balanced picks within one pool: pick i targets group (i mod n),
// advancing past spent groups, and alternates argmax/argmin starting from
// the variant's phase.
void pick_from_pool(const SelectionContext& ctx, const GroupPool& pool, int quota,
                    CamsVariant variant, const char* pool_name,
                    std::set<std::string>& picked, std::vector<const Candidate*>& out,
                    std::vector<PickKind>& kinds) {
    const size_t n = pool.groups.size();
    if (quota > 0 && n == 0)
        throw Error(ErrorCode::pool_exhausted,
                    std::string(pool_name) + " pool has no groups");
    for (int i = 0; i < quota; ++i) {
        const bool max_first = variant == CamsVariant::A;
        const PickKind kind =
            (i % 2 == 0) == max_first ? PickKind::argmax : PickKind::argmin;
        const Candidate* chosen = nullptr;
        for (size_t attempt = 0; attempt < n && !chosen; ++attempt) {
            const auto& group = pool.groups[(static_cast<size_t>(i) + attempt) % n];
            chosen = pick_in_group(ctx, group, kind, picked);
        }
        if (!chosen)
            throw Error(ErrorCode::pool_exhausted,
                        std::string(pool_name) + " pool exhausted after " +
                            std::to_string(i) + " picks (needed " +
                            std::to_string(quota) + ")");
        picked.insert(chosen->id);
        out.push_back(chosen);
        kinds.push_back(kind);
    }
}

std::vector<Candidate> all_candidates(const SelectionContext& ctx) {
    std::vector<Candidate> out;
    for (size_t gi = 0; gi < ctx.partition.groups.size(); ++gi) {
        const auto& g = ctx.partition.groups[gi];
        for (const auto& id : g.member_ids)
            out.push_back(ctx.make_candidate(id, g.u, ctx.partition.is_difficult(gi)));
    }
    return out;
}

// Walks a sorted candidate order, taking the first `count` eligible unpicked
// entries; errors with the pool name when the order runs dry.
void take_ordered(const SelectionContext& ctx, std::vector<Candidate>& order, int count,
                  PickKind kind, const char* pool_name, std::set<std::string>& picked,
                  std::vector<Candidate>& out, std::vector<PickKind>& kinds) {
    int taken = 0;
    for (const auto& c : order) {
        if (taken == count) break;
        if (picked.count(c.id)) continue;
        if (!ctx.eligible(c)) {
            ctx.record_skip(c, "missing rationale");
            continue;
        }
        picked.insert(c.id);
        out.push_back(c);
        kinds.push_back(kind);
        ++taken;
    }
    if (taken < count)
        throw Error(ErrorCode::pool_exhausted,
                    std::string(pool_name) + " pool exhausted (needed " +
                        std::to_string(count) + ", found " + std::to_string(taken) + ")");
}

std::vector<Candidate> eligible_only(const SelectionContext& ctx,
                                     const std::vector<Candidate>& candidates) {
    std::vector<Candidate> out;
    for (const auto& c : candidates)
        if (ctx.eligible(c)) out.push_back(c);
    return out;
}

} // namespace

SelectionResult select_exemplars(const DifficultyPartition& partition,
                                 const std::vector<ComplexityScore>& scores,
                                 const SelectionConfig& config, const Corpus& train) {
    if (config.m < 0) throw Error(ErrorCode::precondition, "m must be >= 0");

    SelectionResult result;
    result.set.config = config;
    result.set.corpus_name = train.name;
    result.set.partition_digest = partition.digest();

    const bool need_scores = config.strategy == Strategy::cams_balanced ||
                             config.strategy == Strategy::complexity_only ||
                             config.strategy == Strategy::all_difficult ||
                             config.strategy == Strategy::all_easy;
    result.set.scorer_id = "none";
    if (need_scores && !scores.empty()) result.set.scorer_id = scores.front().scorer_id;

    if (config.strategy == Strategy::zero_shot) return result;

    auto score_map = complexity_map(scores);
    SelectionContext ctx{partition, score_map, train, need_scores, result.skipped};

    std::vector<Candidate> chosen;
    std::vector<PickKind> kinds;
    std::set<std::string> picked;

    switch (config.strategy) {
        case Strategy::cams_balanced: {
            GroupPool difficult = build_pool(ctx, true);
            GroupPool easy = build_pool(ctx, false);
            int difficult_quota = config.m / 2;
            int easy_quota = config.m - difficult_quota;
            // A structurally one-sided partition (n=1) sends every pick to
            // the populated side rather than failing.
            if (difficult.groups.empty()) {
                difficult_quota = 0;
                easy_quota = config.m;
            } else if (easy.groups.empty()) {
                difficult_quota = config.m;
                easy_quota = 0;
            }
            std::vector<const Candidate*> refs;
            pick_from_pool(ctx, difficult, difficult_quota, config.variant, "difficult",
                           picked, refs, kinds);
            pick_from_pool(ctx, easy, easy_quota, config.variant, "easy", picked, refs,
                           kinds);
            for (const Candidate* c : refs) chosen.push_back(*c);
            break;
        }
        case Strategy::uncertainty_only: {
            const size_t n = partition.groups.size();
            DetRng rng(config.seed);
            for (size_t gi = 0; gi < n; ++gi) {
                int quota = config.m / static_cast<int>(n) +
                            (gi < static_cast<size_t>(config.m) % n ? 1 : 0);
                std::vector<Candidate> members;
                const auto& g = partition.groups[gi];
                for (const auto& id : g.member_ids)
                    members.push_back(ctx.make_candidate(id, g.u, partition.is_difficult(gi)));
                members = eligible_only(ctx, members);
                if (static_cast<int>(members.size()) < quota)
                    throw Error(ErrorCode::pool_exhausted,
                                "stratum u=" + std::to_string(g.u) + " exhausted (needed " +
                                    std::to_string(quota) + ", found " +
                                    std::to_string(members.size()) + ")");
                for (int q = 0; q < quota; ++q) {
                    size_t at = static_cast<size_t>(rng.next_below(members.size()));
                    chosen.push_back(members[at]);
                    kinds.push_back(PickKind::random);
                    picked.insert(members[at].id);
                    members.erase(members.begin() + static_cast<long>(at));
                }
            }
            break;
        }
        case Strategy::complexity_only: {
            auto candidates = all_candidates(ctx);
            auto desc = candidates;
            std::sort(desc.begin(), desc.end(), [](const Candidate& a, const Candidate& b) {
                if (a.score != b.score) return a.score > b.score;
                return a.id < b.id;
            });
            auto asc = candidates;
            std::sort(asc.begin(), asc.end(), [](const Candidate& a, const Candidate& b) {
                if (a.score != b.score) return a.score < b.score;
                return a.id < b.id;
            });
            const int max_count = (config.m + 1) / 2;
            const int min_count = config.m / 2;
            take_ordered(ctx, desc, max_count, PickKind::argmax, "global", picked, chosen,
                         kinds);
            take_ordered(ctx, asc, min_count, PickKind::argmin, "global", picked, chosen,
                         kinds);
            break;
        }
        case Strategy::all_difficult:
        case Strategy::all_easy: {
            const bool hard = config.strategy == Strategy::all_difficult;
            auto candidates = all_candidates(ctx);
            std::sort(candidates.begin(), candidates.end(),
                      [&](const Candidate& a, const Candidate& b) {
                          if (a.u != b.u) return hard ? a.u > b.u : a.u < b.u;
                          if (a.score != b.score)
                              return hard ? a.score > b.score : a.score < b.score;
                          return a.id < b.id;
                      });
            take_ordered(ctx, candidates, config.m,
                         hard ? PickKind::argmax : PickKind::argmin,
                         hard ? "difficult" : "easy", picked, chosen, kinds);
            break;
        }
        case Strategy::random_fewshot: {
            auto pool = eligible_only(ctx, all_candidates(ctx));
            if (static_cast<int>(pool.size()) < config.m)
                throw Error(ErrorCode::pool_exhausted,
                            "train pool exhausted (needed " + std::to_string(config.m) +
                                ", found " + std::to_string(pool.size()) + ")");
            DetRng rng(config.seed);
            for (int i = 0; i < config.m; ++i) {
                size_t at = static_cast<size_t>(rng.next_below(pool.size()));
                chosen.push_back(pool[at]);
                kinds.push_back(PickKind::random);
                pool.erase(pool.begin() + static_cast<long>(at));
            }
            break;
        }
        case Strategy::zero_shot:
            break;  // handled above
    }

    for (size_t i = 0; i < chosen.size(); ++i) {
        const Candidate& c = chosen[i];
        Exemplar e;
        e.sample_id = c.id;
        e.question = c.sample->question;
        e.options = c.sample->options;
        e.rationale = *c.sample->rationale;
        e.answer = c.sample->gold_answer;
        result.set.exemplars.push_back(std::move(e));
        result.set.picks.push_back({c.id, c.u, c.from_difficult, kinds[i]});
    }
    return result;
}

namespace {

const char* pick_kind_name(PickKind kind) {
    switch (kind) {
        case PickKind::argmax: return "argmax";
        case PickKind::argmin: return "argmin";
        case PickKind::random: return "random";
    }
    return "unknown";
}

PickKind pick_kind_from_name(const std::string& name) {
    if (name == "argmax") return PickKind::argmax;
    if (name == "argmin") return PickKind::argmin;
    return PickKind::random;
}

} // namespace

std::string serialize_exemplar_set(const SelectionResult& result) {
    const ExemplarSet& set = result.set;
    json exemplars = json::array();
    for (const auto& e : set.exemplars) {
        json item{{"sample_id", e.sample_id},
                  {"question", e.question},
                  {"rationale", e.rationale},
                  {"answer", e.answer}};
        if (!e.options.empty()) item["options"] = e.options;
        exemplars.push_back(std::move(item));
    }
    json picks = json::array();
    for (const auto& p : set.picks)
        picks.push_back({{"sample_id", p.sample_id},
                         {"group_u", p.group_u},
                         {"pool", p.from_difficult ? "difficult" : "easy"},
                         {"kind", pick_kind_name(p.kind)}});
    json skipped = json::array();
    for (const auto& [id, reason] : result.skipped)
        skipped.push_back({{"sample_id", id}, {"reason", reason}});

    json doc{{"strategy", strategy_name(set.config.strategy)},
             {"variant", set.config.variant == CamsVariant::A ? "A" : "B"},
             {"m", set.config.m},
             {"seed", set.config.seed},
             {"corpus", set.corpus_name},
             {"partition_digest", set.partition_digest},
             {"scorer_id", set.scorer_id},
             {"exemplars", exemplars},
             {"picks", picks},
             {"skipped", skipped}};
    return doc.dump(2) + "\n";
}

SelectionResult parse_exemplar_set(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, std::string("selection artifact: ") + e.what());
    }
    SelectionResult result;
    result.set.config.strategy = strategy_from_name(doc.at("strategy").get<std::string>());
    result.set.config.variant =
        doc.value("variant", "A") == "B" ? CamsVariant::B : CamsVariant::A;
    result.set.config.m = doc.at("m").get<int>();
    result.set.config.seed = doc.value("seed", 0ull);
    result.set.corpus_name = doc.value("corpus", "");
    result.set.partition_digest = doc.value("partition_digest", "");
    result.set.scorer_id = doc.value("scorer_id", "none");
    for (const auto& item : doc.at("exemplars")) {
        Exemplar e;
        e.sample_id = item.at("sample_id").get<std::string>();
        e.question = item.at("question").get<std::string>();
        e.rationale = item.at("rationale").get<std::string>();
        e.answer = item.at("answer").get<std::string>();
        if (item.contains("options"))
            e.options = item.at("options").get<std::vector<std::string>>();
        result.set.exemplars.push_back(std::move(e));
    }
    for (const auto& item : doc.value("picks", json::array())) {
        PickProvenance p;
        p.sample_id = item.at("sample_id").get<std::string>();
        p.group_u = item.at("group_u").get<int>();
        p.from_difficult = item.at("pool").get<std::string>() == "difficult";
        p.kind = pick_kind_from_name(item.at("kind").get<std::string>());
        result.set.picks.push_back(std::move(p));
    }
    for (const auto& item : doc.value("skipped", json::array()))
        result.skipped.emplace_back(item.at("sample_id").get<std::string>(),
                                    item.at("reason").get<std::string>());
    return result;
}

void save_exemplar_set(const SelectionResult& result, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::storage_failure, "cannot write " + path.string());
    out << serialize_exemplar_set(result);
}

SelectionResult load_exemplar_set(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::storage_failure,
                    "cannot open selection artifact " + path.string());
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return parse_exemplar_set(buffer.str());
}

std::string build_prompt(const ExemplarSet& exemplars, const Sample& test_sample,
                         PromptMode mode) {
    if (mode == PromptMode::few_shot_cot && exemplars.exemplars.empty())
        throw Error(ErrorCode::precondition,
                    "few_shot_cot requires a non-empty exemplar set");

    if (mode == PromptMode::zero_shot_cot) return zero_shot_prompt(test_sample);

    std::string prompt;
    for (const auto& e : exemplars.exemplars) {
        prompt += "Question: " + squash_newlines(e.question);
        if (!e.options.empty()) prompt += "\nOptions: " + render_options(e.options);
        prompt += "\nAnswer: " + squash_newlines(e.rationale) + " The answer is " +
                  squash_newlines(e.answer) + ".";
        prompt += "\n\n";
    }
    prompt += render_question_block(test_sample);
    prompt += "\nAnswer:";
    return prompt;
}

} // namespace cotsel
