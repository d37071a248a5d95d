#include "cotsel/uncertainty.hpp"

#include <map>
#include <set>

#include "cotsel/errors.hpp"
#include "cotsel/prompting.hpp"

namespace cotsel {

using nlohmann::json;

json sampling_record_to_json(const SamplingRecord& record) {
    json j{{"sample_id", record.sample_id},
           {"iteration", record.iteration},
           {"raw_text", record.raw_text},
           {"canonical", record.normalized.canonical},
           {"model_id", record.model_id},
           {"temperature", record.temperature}};
    if (record.normalized.matched_option_index)
        j["matched_option_index"] = *record.normalized.matched_option_index;
    return j;
}

SamplingRecord sampling_record_from_json(const json& j) {
    SamplingRecord record;
    record.sample_id = j.at("sample_id").get<std::string>();
    record.iteration = j.at("iteration").get<int>();
    record.raw_text = j.at("raw_text").get<std::string>();
    record.normalized.canonical = j.at("canonical").get<std::string>();
    if (j.contains("matched_option_index"))
        record.normalized.matched_option_index = j.at("matched_option_index").get<int>();
    record.model_id = j.at("model_id").get<std::string>();
    record.temperature = j.at("temperature").get<double>();
    return record;
}

std::string disagreement_key(const NormalizedAnswer& normalized) {
    if (normalized.matched_option_index)
        return std::string(1, static_cast<char>('a' + *normalized.matched_option_index));
    return normalized.canonical;
}

UncertaintyScore disagreement(std::span<const SamplingRecord> records, int k) {
    if (records.size() != static_cast<size_t>(k))
        throw Error(ErrorCode::wrong_count,
                    "expected " + std::to_string(k) + " records, got " +
                        std::to_string(records.size()));
    const std::string& id = records.front().sample_id;
    for (const auto& r : records)
        if (r.sample_id != id)
            throw Error(ErrorCode::mixed_samples,
                        "records mix sample ids '" + id + "' and '" + r.sample_id + "'");

    UncertaintyScore score;
    score.sample_id = id;
    score.k = k;
    std::set<std::string> unique;
    for (const auto& r : records) {
        std::string key = disagreement_key(r.normalized);
        unique.insert(key);
        score.answer_multiset.push_back(std::move(key));
    }
    score.u = static_cast<int>(unique.size());
    return score;
}

CacheKey sampling_cache_key(const std::string& model_id, const std::string& corpus_name,
                            int k, double temperature) {
    return CacheKey{CacheKind::sampling, model_id, corpus_name,
                    json{{"k", k}, {"temperature", temperature}}};
}

ProbeReport probe_corpus(const Corpus& train, ModelBackend& model, CacheStore& cache,
                         const ProbeConfig& config) {
    if (config.k < 1) throw Error(ErrorCode::precondition, "k must be >= 1");

    const CacheKey key =
        sampling_cache_key(config.model_id, train.name, config.k, config.temperature);

    std::set<std::pair<std::string, int>> cached;
    for (const auto& j : cache.read_all(key))
        cached.insert({j.at("sample_id").get<std::string>(), j.at("iteration").get<int>()});

    size_t sample_count = train.samples.size();
    if (config.limit > 0 && static_cast<size_t>(config.limit) < sample_count)
        sample_count = static_cast<size_t>(config.limit);

    struct Task {
        const Sample* sample;
        int iteration;
    };
    std::vector<Task> tasks;
    ProbeReport report;
    report.samples_considered = static_cast<int>(sample_count);
    std::map<std::string, size_t> sample_slot;
    for (size_t i = 0; i < sample_count; ++i) {
        const Sample& s = train.samples[i];
        sample_slot[s.id] = report.per_sample.size();
        report.per_sample.push_back({s.id, 0, 0, 0});
        for (int iter = 1; iter <= config.k; ++iter) {
            if (cached.count({s.id, iter})) {
                ++report.cached_records;
                ++report.per_sample.back().cached_count;
            } else {
                tasks.push_back({&s, iter});
            }
        }
    }

    struct Outcome {
        SamplingRecord record;
        std::string error;
    };
    std::function<Outcome(size_t)> probe_one = [&](size_t t) -> Outcome {
        const Sample& s = *tasks[t].sample;
        const int iter = tasks[t].iteration;
        GenerationRequest req;
        req.model_id = config.model_id;
        req.prompt = zero_shot_prompt(s);
        req.image = s.image_ref;
        req.temperature = config.temperature;
        req.max_tokens = config.max_tokens;
        req.request_tag = "probe:" + s.id + "#" + std::to_string(iter);
        try {
            Completion c = model.generate(req);
            SamplingRecord record;
            record.sample_id = s.id;
            record.iteration = iter;
            record.raw_text = c.raw_text;
            record.normalized = normalize_answer(c.raw_text, train.task_kind, s.options);
            record.model_id = config.model_id;
            record.temperature = config.temperature;
            return {std::move(record), ""};
        } catch (const Error& e) {
            return {{}, e.what()};
        }
    };
    auto outcomes = parallel_map<Outcome>(tasks.size(), config.parallelism, probe_one);

    // Appends happen in task order regardless of completion order, so the
    // cache file is deterministic given deterministic replies.
    for (size_t t = 0; t < tasks.size(); ++t) {
        auto& slot = report.per_sample[sample_slot[tasks[t].sample->id]];
        if (!outcomes[t].error.empty()) {
            report.failures.emplace_back(
                tasks[t].sample->id + "#" + std::to_string(tasks[t].iteration),
                outcomes[t].error);
            ++slot.failed_count;
            continue;
        }
        cache.append(key, sampling_record_to_json(outcomes[t].record));
        ++report.new_records;
        ++slot.new_count;
    }
    return report;
}

ScoreReport score_all(const CacheStore& cache, const CacheKey& key, const Corpus& corpus,
                      int k) {
    std::map<std::string, std::map<int, SamplingRecord>> by_sample;
    for (const auto& j : cache.read_all(key)) {
        SamplingRecord record = sampling_record_from_json(j);
        if (record.iteration < 1 || record.iteration > k) continue;
        auto& slot = by_sample[record.sample_id];
        slot.emplace(record.iteration, std::move(record));  // first occurrence wins
    }

    ScoreReport report;
    for (const auto& s : corpus.samples) {
        auto it = by_sample.find(s.id);
        const int found = it == by_sample.end() ? 0 : static_cast<int>(it->second.size());
        if (found == 0) {
            ++report.unprobed;
        } else if (found < k) {
            report.incomplete.emplace_back(s.id, found);
        } else {
            std::vector<SamplingRecord> records;
            records.reserve(static_cast<size_t>(k));
            for (auto& [iter, record] : it->second) records.push_back(std::move(record));
            report.scores.push_back(disagreement(records, k));
        }
    }
    return report;
}

} // namespace cotsel
