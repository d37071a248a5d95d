#pragma once

#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cotsel/corpus.hpp"
#include "cotsel/modelgate.hpp"

namespace cotsel {

/// Unimodal text stand-in for a multimodal sample:
/// question '\n' options '\n' caption, segments omitted (with their
/// delimiter) when absent.
struct FlattenedSample {
    std::string sample_id;
    std::string text;
};

/// caption_exempt marks pure-text corpora where no caption is expected.
FlattenedSample flatten(const Sample& sample, bool caption_exempt = false);

struct ComplexityScore {
    std::string sample_id;
    double score = 0.0;
    std::string scorer_id;
    double scale_min = 1.0;
    double scale_max = 10.0;
};

class ComplexityScorer {
public:
    virtual ~ComplexityScorer() = default;
    virtual double score_text(const std::string& text) = 0;
    virtual std::string id() const = 0;
    virtual std::pair<double, double> scale() const = 0;
};

/// Deterministic offline scorer. Frozen affine combination of token count,
/// option-marker count, numeric-token count, and reasoning-cue keywords,
/// clamped to [1, 10]:
///   score = min(1 + 0.05*tokens + 0.25*options + 0.2*numerics + 0.5*cues, 10)
class HeuristicScorer : public ComplexityScorer {
public:
    double score_text(const std::string& text) override;
    std::string id() const override { return "heuristic.v1"; }
    std::pair<double, double> scale() const override { return {1.0, 10.0}; }
};

struct JudgeConfig {
    std::string model_id;
    int max_tokens = 16;
    double scale_min = 1.0;
    double scale_max = 10.0;
};

/// Model-backed scorer: fixed rubric, temperature 0, reply must contain a
/// bare number within the declared scale.
class JudgeScorer : public ComplexityScorer {
public:
    JudgeScorer(ModelBackend& backend, JudgeConfig config);

    double score_text(const std::string& text) override;
    std::string id() const override;
    std::pair<double, double> scale() const override {
        return {config_.scale_min, config_.scale_max};
    }

private:
    ModelBackend& backend_;
    JudgeConfig config_;
};

ComplexityScore score_flattened(const FlattenedSample& flat, ComplexityScorer& scorer);

/// Scores every sample, preserving corpus order.
std::vector<ComplexityScore> score_corpus(const Corpus& corpus, ComplexityScorer& scorer,
                                          bool caption_exempt = false);

/// Line-delimited report: sample_id, score, scorer_id, scale per record.
std::string complexity_report(const std::vector<ComplexityScore>& scores);
std::vector<ComplexityScore> parse_complexity_report(const std::string& text);

std::map<std::string, double> complexity_map(const std::vector<ComplexityScore>& scores);

// --- instruction evolution -------------------------------------------------

enum class EvolveTechnique { add_constraints, specification, increase_reasoning_steps };

const char* technique_name(EvolveTechnique technique);

struct EvolveConfig {
    std::string model_id;
    int max_tokens = 512;
    double temperature = 0.5;
    bool generate_responses = false;  // also ask for an answer per rewrite
};

/// One rewrite under the fixed per-technique template. Output must be
/// non-empty and distinct from the input; one retry, then error.
std::string evolve(const std::string& instruction, ModelBackend& model,
                   EvolveTechnique technique, const EvolveConfig& config);

struct EvolutionStep {
    std::string instruction;
    EvolveTechnique technique;
    std::optional<std::string> response;
};

struct EvolutionChain {
    std::string seed;
    std::vector<EvolutionStep> steps;  // I^(1)..I^(M)

    size_t length() const { return steps.size() + 1; }
    std::vector<std::string> instructions() const;
};

/// Builds I^(0)..I^(M), cycling through the three techniques.
EvolutionChain evolve_chain(const std::string& seed, ModelBackend& model, int m,
                            const EvolveConfig& config);

struct RankedInstruction {
    std::string instruction;
    double score = 0.0;
    size_t chain_position = 0;
};

/// Scores every chain item once and ranks by score (non-increasing); equal
/// scores rank the later chain position as more complex. All-or-nothing:
/// any scorer failure aborts the ranking.
std::vector<RankedInstruction> rank_chain(const EvolutionChain& chain,
                                          ComplexityScorer& judge);

} // namespace cotsel
