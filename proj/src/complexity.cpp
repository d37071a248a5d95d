#include "cotsel/complexity.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <sstream>

#include "cotsel/errors.hpp"
#include "cotsel/prompt_templates.hpp"
#include "cotsel/prompting.hpp"
#include "cotsel/util.hpp"
#include "json.hpp"

namespace cotsel {

FlattenedSample flatten(const Sample& sample, bool caption_exempt) {
    std::string text = squash_newlines(sample.question);
    if (!sample.options.empty()) {
        text += '\n';
        text += render_options(sample.options);
    }
    if (sample.has_caption()) {
        text += '\n';
        text += squash_newlines(*sample.caption);
    } else if (!caption_exempt) {
        throw Error(ErrorCode::missing_caption,
                    "sample '" + sample.id + "' has no caption; run attach_captions first");
    }
    return {sample.id, std::move(text)};
}

namespace {

bool is_cue_word(const std::string& token) {
    static const std::set<std::string> kCues = {
        "why",  "how",     "explain", "because", "calculate",
        "compare", "derive", "steps",   "prove",   "difference"};
    return kCues.count(token) > 0;
}

std::string strip_token_edges(const std::string& token) {
    size_t b = 0, e = token.size();
    auto alnum = [](char c) {
        return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9');
    };
    while (b < e && !alnum(token[b])) ++b;
    while (e > b && !alnum(token[e - 1])) --e;
    return token.substr(b, e - b);
}

size_t count_option_markers(const std::string& text) {
    size_t count = 0;
    for (size_t i = 0; i + 2 < text.size(); ++i)
        if (text[i] == '(' && text[i + 1] >= 'a' && text[i + 1] <= 'z' &&
            text[i + 2] == ')')
            ++count;
    return count;
}

} // namespace

double HeuristicScorer::score_text(const std::string& text) {
    size_t tokens = 0, numerics = 0, cues = 0;
    std::istringstream in(to_lower(text));
    std::string token;
    while (in >> token) {
        ++tokens;
        if (token.find_first_of("0123456789") != std::string::npos) ++numerics;
        if (is_cue_word(strip_token_edges(token))) ++cues;
    }
    double raw = 1.0 + 0.05 * static_cast<double>(tokens) +
                 0.25 * static_cast<double>(count_option_markers(text)) +
                 0.2 * static_cast<double>(numerics) + 0.5 * static_cast<double>(cues);
    return std::min(raw, 10.0);
}

JudgeScorer::JudgeScorer(ModelBackend& backend, JudgeConfig config)
    : backend_(backend), config_(std::move(config)) {}

std::string JudgeScorer::id() const {
    return "judge." + config_.model_id + "." + templates::kTemplateVersion;
}

namespace {

std::string substitute(const char* tmpl, const char* placeholder,
                       const std::string& value) {
    std::string out(tmpl);
    size_t pos = out.find(placeholder);
    if (pos != std::string::npos) out.replace(pos, std::strlen(placeholder), value);
    return out;
}

std::optional<double> first_number(const std::string& text) {
    for (size_t i = 0; i < text.size(); ++i) {
        char c = text[i];
        if (c >= '0' && c <= '9') {
            size_t start = (i > 0 && (text[i - 1] == '-' || text[i - 1] == '+')) ? i - 1 : i;
            size_t end = i;
            bool dot = false;
            while (end < text.size() &&
                   ((text[end] >= '0' && text[end] <= '9') || (text[end] == '.' && !dot))) {
                if (text[end] == '.') dot = true;
                ++end;
            }
            try {
                return std::stod(text.substr(start, end - start));
            } catch (...) {
                return std::nullopt;
            }
        }
    }
    return std::nullopt;
}

} // namespace

double JudgeScorer::score_text(const std::string& text) {
    GenerationRequest req;
    req.model_id = config_.model_id;
    req.prompt = substitute(templates::kJudgeRubric, "{text}", text);
    req.temperature = 0.0;
    req.max_tokens = config_.max_tokens;
    req.request_tag = "judge:" + hex64(fnv1a64(id() + "\x1f" + text)) + "#1";

    Completion reply = backend_.generate(req);
    auto value = first_number(reply.raw_text);
    if (!value)
        throw Error(ErrorCode::unparseable_reply,
                    "judge reply contains no number: '" + trim(reply.raw_text) + "'");
    if (*value < config_.scale_min || *value > config_.scale_max)
        throw Error(ErrorCode::unparseable_reply,
                    "judge score " + std::to_string(*value) + " outside scale [" +
                        std::to_string(config_.scale_min) + ", " +
                        std::to_string(config_.scale_max) + "]");
    return *value;
}

ComplexityScore score_flattened(const FlattenedSample& flat, ComplexityScorer& scorer) {
    auto [lo, hi] = scorer.scale();
    return {flat.sample_id, scorer.score_text(flat.text), scorer.id(), lo, hi};
}

std::vector<ComplexityScore> score_corpus(const Corpus& corpus, ComplexityScorer& scorer,
                                          bool caption_exempt) {
    std::vector<ComplexityScore> scores;
    scores.reserve(corpus.samples.size());
    for (const auto& s : corpus.samples)
        scores.push_back(score_flattened(flatten(s, caption_exempt), scorer));
    return scores;
}

std::string complexity_report(const std::vector<ComplexityScore>& scores) {
    std::string out;
    for (const auto& s : scores) {
        nlohmann::json j{{"sample_id", s.sample_id},
                         {"score", s.score},
                         {"scorer_id", s.scorer_id},
                         {"scale", {s.scale_min, s.scale_max}}};
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<ComplexityScore> parse_complexity_report(const std::string& text) {
    std::vector<ComplexityScore> scores;
    std::istringstream in(text);
    std::string line;
    size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (trim(line).empty()) continue;
        try {
            auto j = nlohmann::json::parse(line);
            ComplexityScore s;
            s.sample_id = j.at("sample_id").get<std::string>();
            s.score = j.at("score").get<double>();
            s.scorer_id = j.at("scorer_id").get<std::string>();
            s.scale_min = j.at("scale").at(0).get<double>();
            s.scale_max = j.at("scale").at(1).get<double>();
            scores.push_back(std::move(s));
        } catch (const nlohmann::json::exception& e) {
            throw Error(ErrorCode::parse_error, "complexity report line " +
                                                    std::to_string(line_no) + ": " +
                                                    e.what());
        }
    }
    return scores;
}

std::map<std::string, double> complexity_map(const std::vector<ComplexityScore>& scores) {
    std::map<std::string, double> out;
    for (const auto& s : scores) out[s.sample_id] = s.score;
    return out;
}

const char* technique_name(EvolveTechnique technique) {
    switch (technique) {
        case EvolveTechnique::add_constraints: return "add_constraints";
        case EvolveTechnique::specification: return "specification";
        case EvolveTechnique::increase_reasoning_steps: return "increase_reasoning_steps";
    }
    return "unknown";
}

namespace {

const char* technique_template(EvolveTechnique technique) {
    switch (technique) {
        case EvolveTechnique::add_constraints: return templates::kEvolveAddConstraints;
        case EvolveTechnique::specification: return templates::kEvolveSpecification;
        case EvolveTechnique::increase_reasoning_steps:
            return templates::kEvolveIncreaseReasoningSteps;
    }
    return templates::kEvolveAddConstraints;
}

} // namespace

std::string evolve(const std::string& instruction, ModelBackend& model,
                   EvolveTechnique technique, const EvolveConfig& config) {
    const std::string prompt =
        substitute(technique_template(technique), "{instruction}", instruction);
    for (int attempt = 1; attempt <= 2; ++attempt) {
        GenerationRequest req;
        req.model_id = config.model_id;
        req.prompt = prompt;
        req.temperature = config.temperature;
        req.max_tokens = config.max_tokens;
        req.request_tag = "evolve:" + hex64(fnv1a64(instruction)) + "#" +
                          std::to_string(attempt);
        std::string rewritten = trim(model.generate(req).raw_text);
        if (!rewritten.empty() && rewritten != instruction) return rewritten;
    }
    throw Error(ErrorCode::evolution_stalled,
                std::string("model returned empty or identical rewrite twice (") +
                    technique_name(technique) + ")");
}

std::vector<std::string> EvolutionChain::instructions() const {
    std::vector<std::string> out;
    out.reserve(length());
    out.push_back(seed);
    for (const auto& step : steps) out.push_back(step.instruction);
    return out;
}

EvolutionChain evolve_chain(const std::string& seed, ModelBackend& model, int m,
                            const EvolveConfig& config) {
    static constexpr EvolveTechnique kCycle[] = {
        EvolveTechnique::add_constraints, EvolveTechnique::specification,
        EvolveTechnique::increase_reasoning_steps};
    EvolutionChain chain;
    chain.seed = seed;
    std::string current = seed;
    for (int step = 0; step < m; ++step) {
        EvolveTechnique technique = kCycle[step % 3];
        current = evolve(current, model, technique, config);
        std::optional<std::string> response;
        if (config.generate_responses) {
            GenerationRequest req;
            req.model_id = config.model_id;
            req.prompt = current;
            req.temperature = config.temperature;
            req.max_tokens = config.max_tokens;
            req.request_tag =
                "respond:" + hex64(fnv1a64(current)) + "#" + std::to_string(step + 1);
            response = model.generate(req).raw_text;
        }
        chain.steps.push_back({current, technique, std::move(response)});
    }
    return chain;
}

std::vector<RankedInstruction> rank_chain(const EvolutionChain& chain,
                                          ComplexityScorer& judge) {
    std::vector<RankedInstruction> ranked;
    const auto instructions = chain.instructions();
    ranked.reserve(instructions.size());
    for (size_t pos = 0; pos < instructions.size(); ++pos)
        ranked.push_back({instructions[pos], judge.score_text(instructions[pos]), pos});

    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const RankedInstruction& a, const RankedInstruction& b) {
                         if (a.score != b.score) return a.score > b.score;
                         return a.chain_position > b.chain_position;
                     });
    return ranked;
}

} // namespace cotsel
