#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "cotsel/corpus.hpp"
#include "cotsel/modelgate.hpp"
#include "cotsel/partition.hpp"
#include "cotsel/selector.hpp"

namespace cotsel {

struct SampleResult {
    std::string sample_id;
    std::string raw_text;
    NormalizedAnswer prediction;
    double credit = 0.0;
    std::optional<std::string> error_tag;  // gateway failure, counted as wrong
};

struct EvaluationRun {
    std::string run_id;
    std::string model_id;
    double temperature = 0.5;
    nlohmann::json provenance;  // strategy/seed/exemplar ids etc.
    std::vector<SampleResult> results;
    double accuracy = 0.0;      // mean per-sample credit
};

struct EvalConfig {
    std::string model_id;
    double temperature = 0.5;
    int max_tokens = 512;
    int votes = 1;          // >1 enables self-consistency plurality voting
    int parallelism = 1;
};

/// Per-sample credit in [0,1]: option-index equality for multiple choice,
/// min(matches/3, 1) against annotator answers for open-ended with
/// gold_answers_multi, exact canonical match otherwise.
double credit(const NormalizedAnswer& prediction, const Sample& sample, TaskKind kind);

/// Runs inference over the test split. Every sample gets a result; gateway
/// failures are recorded as incorrect with an error tag, never dropped.
/// Exemplar ids must be disjoint from test ids.
EvaluationRun evaluate(const Corpus& test, const ExemplarSet& exemplars,
                       ModelBackend& model, const EvalConfig& config);

/// Self-consistency: `votes` sampled completions per test sample, plurality
/// canonical answer wins, ties resolved by first occurrence. votes=1 is
/// exactly evaluate().
EvaluationRun self_consistency(const Corpus& test, const ExemplarSet& exemplars,
                               ModelBackend& model, const EvalConfig& config);

struct VarianceReport {
    Strategy strategy = Strategy::cams_balanced;
    std::vector<std::pair<uint64_t, double>> runs;  // (seed, accuracy)
    double mean = 0.0;
    double spread = 0.0;  // max - min
    double stddev = 0.0;  // sample standard deviation
};

struct StrategyComparison {
    std::vector<VarianceReport> reports;
    std::vector<EvaluationRun> runs;  // all runs, report order
};

struct CompareConfig {
    EvalConfig eval;
    int m = 4;
    CamsVariant variant = CamsVariant::A;
};

/// Runs each strategy over the given seeds (deterministic strategies run
/// once, seeds ignored) and reports per-strategy accuracy variance.
StrategyComparison compare_strategies(const Corpus& test, const Corpus& train,
                                      const DifficultyPartition& partition,
                                      const std::vector<ComplexityScore>& scores,
                                      ModelBackend& model,
                                      const std::vector<Strategy>& strategies,
                                      const std::vector<uint64_t>& seeds,
                                      const CompareConfig& config);

/// Tab-separated table with columns strategy, seed, accuracy, spread, stddev.
std::string comparison_table(const StrategyComparison& comparison);

/// Accuracy per subdomain tag; multi-tagged samples count in every tag,
/// untagged samples only in the aggregate.
std::map<std::string, double> subdomain_breakdown(const EvaluationRun& run,
                                                  const Corpus& corpus);

/// Line-delimited per-sample records plus one footer aggregate record.
std::string serialize_run(const EvaluationRun& run);
void save_run(const EvaluationRun& run, const std::filesystem::path& path);

} // namespace cotsel
