#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "cotsel/cache.hpp"
#include "cotsel/corpus.hpp"
#include "cotsel/modelgate.hpp"

namespace cotsel {

/// One model completion for (sample, iteration). The (sample_id, iteration,
/// model_id, temperature) tuple is unique within a cache store.
struct SamplingRecord {
    std::string sample_id;
    int iteration = 1;  // 1..k
    std::string raw_text;
    NormalizedAnswer normalized;
    std::string model_id;
    double temperature = 0.5;
};

nlohmann::json sampling_record_to_json(const SamplingRecord& record);
SamplingRecord sampling_record_from_json(const nlohmann::json& j);

/// u = number of distinct answers over the k samplings of one question.
struct UncertaintyScore {
    std::string sample_id;
    int u = 1;
    int k = 1;
    std::vector<std::string> answer_multiset;  // k entries, iteration order
};

/// The string two completions must share to count as the same answer:
/// the option letter when the reply resolved to an option, otherwise the
/// canonical raw text. Collapses "B" and "blue" into one answer.
std::string disagreement_key(const NormalizedAnswer& normalized);

/// u over exactly k records of one sample.
UncertaintyScore disagreement(std::span<const SamplingRecord> records, int k);

struct ProbeConfig {
    std::string model_id;
    int k = 5;
    double temperature = 0.5;
    int max_tokens = 512;
    int limit = 0;        // 0 = whole corpus; otherwise first `limit` samples
    int parallelism = 1;
};

struct ProbeReport {
    int samples_considered = 0;
    int new_records = 0;
    int cached_records = 0;
    std::vector<std::pair<std::string, std::string>> failures;  // (sample#iter, error)

    struct PerSample {
        std::string sample_id;
        int new_count = 0;
        int cached_count = 0;
        int failed_count = 0;
    };
    std::vector<PerSample> per_sample;  // corpus order
};

CacheKey sampling_cache_key(const std::string& model_id, const std::string& corpus_name,
                            int k, double temperature);

/// Zero-shot k-probe with resume: records already cached are never re-fetched,
/// and per-iteration gateway failures are reported without aborting the run.
ProbeReport probe_corpus(const Corpus& train, ModelBackend& model, CacheStore& cache,
                         const ProbeConfig& config);

struct ScoreReport {
    std::vector<UncertaintyScore> scores;
    std::vector<std::pair<std::string, int>> incomplete;  // (sample id, records found)
    int unprobed = 0;
};

/// One UncertaintyScore per fully cached sample; partially cached samples are
/// listed, never silently scored.
ScoreReport score_all(const CacheStore& cache, const CacheKey& key, const Corpus& corpus,
                      int k);

} // namespace cotsel
