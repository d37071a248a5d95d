#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "cotsel/complexity.hpp"
#include "cotsel/corpus.hpp"
#include "cotsel/partition.hpp"

namespace cotsel {

enum class Strategy {
    cams_balanced,
    random_fewshot,
    uncertainty_only,
    complexity_only,
    all_difficult,
    all_easy,
    zero_shot,
};

const char* strategy_name(Strategy strategy);
Strategy strategy_from_name(const std::string& name);
std::vector<std::string> strategy_names();

/// Seeded strategies re-run per seed in comparisons; the rest are pure
/// functions of partition + scores.
bool strategy_is_seeded(Strategy strategy);

enum class CamsVariant { A, B };

struct SelectionConfig {
    Strategy strategy = Strategy::cams_balanced;
    int m = 4;
    uint64_t seed = 0;
    CamsVariant variant = CamsVariant::A;
};

struct Exemplar {
    std::string sample_id;
    std::string question;
    std::vector<std::string> options;
    std::string rationale;
    std::string answer;
};

enum class PickKind { argmax, argmin, random };

/// Where each exemplar came from; kept for auditability and tested against
/// the balance laws.
struct PickProvenance {
    std::string sample_id;
    int group_u = 0;
    bool from_difficult = false;
    PickKind kind = PickKind::random;
};

struct ExemplarSet {
    std::vector<Exemplar> exemplars;
    std::vector<PickProvenance> picks;  // parallel to exemplars
    SelectionConfig config;
    std::string corpus_name;
    std::string partition_digest;
    std::string scorer_id;  // "none" when the strategy ignores complexity

    std::vector<std::string> ids() const;
};

struct SelectionResult {
    ExemplarSet set;
    /// Would-be picks skipped over (e.g. missing rationale), as (id, reason).
    std::vector<std::pair<std::string, std::string>> skipped;
};

/// Applies the configured selection strategy over a difficulty partition and
/// complexity scores. Strategies that consult complexity require a score for
/// every partition member; exemplar-eligible samples must carry rationales.
SelectionResult select_exemplars(const DifficultyPartition& partition,
                                 const std::vector<ComplexityScore>& scores,
                                 const SelectionConfig& config, const Corpus& train);

std::string serialize_exemplar_set(const SelectionResult& result);
SelectionResult parse_exemplar_set(const std::string& text);
void save_exemplar_set(const SelectionResult& result, const std::filesystem::path& path);
SelectionResult load_exemplar_set(const std::filesystem::path& path);

enum class PromptMode { zero_shot_cot, few_shot_cot };

/// Renders the full prompt: exemplar blocks in order, then the test question
/// block. Zero-shot appends "Let's think step by step." instead.
std::string build_prompt(const ExemplarSet& exemplars, const Sample& test_sample,
                         PromptMode mode);

} // namespace cotsel
