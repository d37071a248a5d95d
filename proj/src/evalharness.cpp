#include "cotsel/evalharness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>

#include "cotsel/errors.hpp"
#include "cotsel/uncertainty.hpp"
#include "cotsel/util.hpp"

namespace cotsel {

using nlohmann::json;

double credit(const NormalizedAnswer& prediction, const Sample& sample, TaskKind kind) {
    if (kind == TaskKind::multiple_choice) {
        auto gold = gold_option_index(sample);
        if (!gold || !prediction.matched_option_index) return 0.0;
        return *prediction.matched_option_index == *gold ? 1.0 : 0.0;
    }
    if (!sample.gold_answers_multi.empty()) {
        int matches = 0;
        for (const auto& answer : sample.gold_answers_multi)
            if (canonical_text(answer) == prediction.canonical) ++matches;
        return std::min(static_cast<double>(matches) / 3.0, 1.0);
    }
    return canonical_text(sample.gold_answer) == prediction.canonical ? 1.0 : 0.0;
}

namespace {

std::string make_run_id(const Corpus& test, const ExemplarSet& exemplars,
                        const EvalConfig& config) {
    std::string blob = test.name + "\x1f" + config.model_id + "\x1f" +
                       std::to_string(config.temperature) + "\x1f" +
                       std::to_string(config.votes);
    for (const auto& id : exemplars.ids()) blob += "\x1f" + id;
    return hex64(fnv1a64(blob));
}

EvaluationRun run_inference(const Corpus& test, const ExemplarSet& exemplars,
                            ModelBackend& model, const EvalConfig& config, int votes) {
    if (test.samples.empty())
        throw Error(ErrorCode::precondition, "test split is empty");
    if (votes < 1) throw Error(ErrorCode::precondition, "votes must be >= 1");

    const std::vector<std::string> ids = exemplars.ids();
    const std::set<std::string> exemplar_ids(ids.begin(), ids.end());
    for (const auto& s : test.samples)
        if (exemplar_ids.count(s.id))
            throw Error(ErrorCode::invariant_violation,
                        "exemplar '" + s.id + "' appears in the test split");

    const PromptMode mode = exemplars.exemplars.empty() ? PromptMode::zero_shot_cot
                                                        : PromptMode::few_shot_cot;

    std::function<SampleResult(size_t)> infer_one = [&](size_t i) -> SampleResult {
        const Sample& s = test.samples[i];
        SampleResult result;
        result.sample_id = s.id;

        // Vote keys follow first-occurrence order so plurality ties resolve
        // to the earliest answer.
        std::vector<std::string> key_order;
        std::map<std::string, int> counts;
        std::map<std::string, NormalizedAnswer> representative;
        std::map<std::string, std::string> raw_of;
        std::string error_tag;
        const std::string prompt = build_prompt(exemplars, s, mode);

        for (int vote = 1; vote <= votes; ++vote) {
            GenerationRequest req;
            req.model_id = config.model_id;
            req.prompt = prompt;
            req.image = s.image_ref;
            req.temperature = config.temperature;
            req.max_tokens = config.max_tokens;
            req.request_tag = "eval:" + s.id + "#" + std::to_string(vote);
            try {
                Completion c = model.generate(req);
                NormalizedAnswer normalized =
                    normalize_answer(c.raw_text, test.task_kind, s.options);
                std::string key = disagreement_key(normalized);
                if (!counts.count(key)) {
                    key_order.push_back(key);
                    representative[key] = normalized;
                    raw_of[key] = c.raw_text;
                }
                counts[key] += 1;
            } catch (const Error& e) {
                error_tag = error_code_name(e.code());
            }
        }

        if (counts.empty()) {
            result.credit = 0.0;
            result.error_tag = error_tag.empty() ? "no-completion" : error_tag;
            return result;
        }

        std::string best = key_order.front();
        for (const auto& key : key_order)
            if (counts[key] > counts[best]) best = key;

        result.raw_text = raw_of[best];
        result.prediction = representative[best];
        result.credit = credit(result.prediction, s, test.task_kind);
        if (!error_tag.empty()) result.error_tag = error_tag;  // partial vote failure
        return result;
    };

    EvaluationRun run;
    run.model_id = config.model_id;
    run.temperature = config.temperature;
    run.run_id = make_run_id(test, exemplars, config);
    run.provenance = json{{"strategy", strategy_name(exemplars.config.strategy)},
                          {"variant", exemplars.config.variant == CamsVariant::A ? "A" : "B"},
                          {"m", exemplars.config.m},
                          {"seed", exemplars.config.seed},
                          {"exemplar_ids", exemplars.ids()},
                          {"partition_digest", exemplars.partition_digest},
                          {"scorer_id", exemplars.scorer_id},
                          {"votes", votes}};
    run.results =
        parallel_map<SampleResult>(test.samples.size(), config.parallelism, infer_one);

    double total = 0.0;
    for (const auto& r : run.results) total += r.credit;
    run.accuracy = total / static_cast<double>(run.results.size());
    return run;
}

} // namespace

EvaluationRun evaluate(const Corpus& test, const ExemplarSet& exemplars,
                       ModelBackend& model, const EvalConfig& config) {
    return run_inference(test, exemplars, model, config, 1);
}

EvaluationRun self_consistency(const Corpus& test, const ExemplarSet& exemplars,
                               ModelBackend& model, const EvalConfig& config) {
    return run_inference(test, exemplars, model, config, config.votes);
}

StrategyComparison compare_strategies(const Corpus& test, const Corpus& train,
                                      const DifficultyPartition& partition,
                                      const std::vector<ComplexityScore>& scores,
                                      ModelBackend& model,
                                      const std::vector<Strategy>& strategies,
                                      const std::vector<uint64_t>& seeds,
                                      const CompareConfig& config) {
    if (seeds.empty()) throw Error(ErrorCode::precondition, "at least one seed required");

    StrategyComparison comparison;
    for (Strategy strategy : strategies) {
        VarianceReport report;
        report.strategy = strategy;

        std::vector<uint64_t> run_seeds =
            strategy_is_seeded(strategy) ? seeds : std::vector<uint64_t>{seeds.front()};
        for (uint64_t seed : run_seeds) {
            SelectionConfig selection{strategy,
                                      strategy == Strategy::zero_shot ? 0 : config.m, seed,
                                      config.variant};
            SelectionResult selected =
                select_exemplars(partition, scores, selection, train);
            EvaluationRun run = evaluate(test, selected.set, model, config.eval);
            report.runs.emplace_back(seed, run.accuracy);
            comparison.runs.push_back(std::move(run));
        }

        double sum = 0.0, lo = report.runs.front().second, hi = lo;
        for (const auto& [seed, acc] : report.runs) {
            sum += acc;
            lo = std::min(lo, acc);
            hi = std::max(hi, acc);
        }
        report.mean = sum / static_cast<double>(report.runs.size());
        report.spread = hi - lo;
        if (report.runs.size() > 1) {
            double ss = 0.0;
            for (const auto& [seed, acc] : report.runs)
                ss += (acc - report.mean) * (acc - report.mean);
            report.stddev = std::sqrt(ss / static_cast<double>(report.runs.size() - 1));
        }
        comparison.reports.push_back(std::move(report));
    }
    return comparison;
}

namespace {

std::string format_real(double v) {
    char buffer[32];
    std::snprintf(buffer, sizeof(buffer), "%.6f", v);
    return buffer;
}

} // namespace

std::string comparison_table(const StrategyComparison& comparison) {
    std::string out = "strategy\tseed\taccuracy\tspread\tstddev\n";
    for (const auto& report : comparison.reports)
        for (const auto& [seed, acc] : report.runs) {
            out += strategy_name(report.strategy);
            out += '\t';
            out += std::to_string(seed);
            out += '\t';
            out += format_real(acc);
            out += '\t';
            out += format_real(report.spread);
            out += '\t';
            out += format_real(report.stddev);
            out += '\n';
        }
    return out;
}

std::map<std::string, double> subdomain_breakdown(const EvaluationRun& run,
                                                  const Corpus& corpus) {
    std::map<std::string, double> sums;
    std::map<std::string, int> counts;
    for (const auto& result : run.results) {
        const Sample* sample = corpus.find(result.sample_id);
        if (!sample) continue;
        for (const auto& tag : sample->subdomain) {
            sums[tag] += result.credit;
            counts[tag] += 1;
        }
    }
    std::map<std::string, double> out;
    for (const auto& [tag, sum] : sums) out[tag] = sum / counts[tag];
    return out;
}

std::string serialize_run(const EvaluationRun& run) {
    std::string out;
    for (const auto& r : run.results) {
        json line{{"sample_id", r.sample_id},
                  {"raw_text", r.raw_text},
                  {"prediction", r.prediction.canonical},
                  {"credit", r.credit}};
        if (r.prediction.matched_option_index)
            line["matched_option_index"] = *r.prediction.matched_option_index;
        if (r.error_tag) line["error"] = *r.error_tag;
        out += line.dump();
        out += '\n';
    }
    json footer{{"run_id", run.run_id},
                {"model_id", run.model_id},
                {"temperature", run.temperature},
                {"samples", run.results.size()},
                {"aggregate_accuracy", run.accuracy},
                {"provenance", run.provenance}};
    out += footer.dump();
    out += '\n';
    return out;
}

void save_run(const EvaluationRun& run, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw Error(ErrorCode::storage_failure, "cannot write run file " + path.string());
    out << serialize_run(run);
}

} // namespace cotsel
