#pragma once

#include <map>
#include <memory>
#include <string>

#include "cotsel/cache.hpp"
#include "cotsel/complexity.hpp"
#include "cotsel/config.hpp"
#include "cotsel/corpus.hpp"
#include "cotsel/evalharness.hpp"
#include "cotsel/modelgate.hpp"
#include "cotsel/partition.hpp"
#include "cotsel/selector.hpp"
#include "cotsel/uncertainty.hpp"

namespace cotsel {

/// Replays completions recorded under a cache key instead of paying a second
/// gateway call. Requests are identified by tag plus a digest of the request
/// payload, so identical tags with different prompts never collide. Wraps
/// any backend.
class CachingBackend : public ModelBackend {
public:
    CachingBackend(ModelBackend& inner, CacheStore& store, CacheKey key);

    Completion generate(const GenerationRequest& request) override;
    BackendKind kind() const override { return inner_.kind(); }

    int hits() const { return hits_; }
    int misses() const { return misses_; }

private:
    ModelBackend& inner_;
    CacheStore& store_;
    CacheKey key_;
    std::map<std::string, std::string> replay_;
    std::mutex mu_;
    int hits_ = 0;
    int misses_ = 0;
};

/// Builds the backend named by config.backend ("http" or "mock:<spec-file>").
std::unique_ptr<ModelBackend> make_backend(const PipelineConfig& config);

std::unique_ptr<ComplexityScorer> make_scorer(const PipelineConfig& config,
                                              ModelBackend& backend);

/// Derived artifact locations under config.out_dir.
struct PipelinePaths {
    std::filesystem::path complexity_report;
    std::filesystem::path partition_file;
    std::filesystem::path partition_report;
    std::filesystem::path selection_artifact;
    std::filesystem::path run_file;
    std::filesystem::path comparison_table;
};
PipelinePaths pipeline_paths(const PipelineConfig& config, const std::string& corpus_name);

// One function per pipeline stage; each loads its inputs from files written
// by the previous stage, so stages re-run independently.
ProbeReport run_probe(const PipelineConfig& config);
std::vector<ComplexityScore> run_score_complexity(const PipelineConfig& config);
DifficultyPartition run_partition(const PipelineConfig& config);
SelectionResult run_select(const PipelineConfig& config);

struct EvaluateOutcome {
    EvaluationRun run;
    int new_calls = 0;  // gateway calls actually paid
    int replayed = 0;   // completions replayed from the cache
};
EvaluateOutcome run_evaluate(const PipelineConfig& config);

struct CompareOutcome {
    StrategyComparison comparison;
    int new_calls = 0;
    int replayed = 0;
};
CompareOutcome run_compare(const PipelineConfig& config);

} // namespace cotsel
