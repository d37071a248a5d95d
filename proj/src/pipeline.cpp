#include "cotsel/pipeline.hpp"

#include <fstream>
#include <iostream>
#include <sstream>

#include "cotsel/errors.hpp"
#include "cotsel/util.hpp"

namespace cotsel {

using nlohmann::json;

namespace {

std::string request_replay_key(const GenerationRequest& request) {
    std::string blob = request.request_tag;
    blob += '\x1f';
    blob += request.model_id;
    blob += '\x1f';
    blob += request.prompt;
    blob += '\x1f';
    blob += std::to_string(request.temperature);
    blob += '\x1f';
    blob += std::to_string(request.max_tokens);
    if (request.image) {
        blob += '\x1f';
        blob += *request.image;
    }
    return request.request_tag + "|" + hex64(fnv1a64(blob));
}

} // namespace

CachingBackend::CachingBackend(ModelBackend& inner, CacheStore& store, CacheKey key)
    : inner_(inner), store_(store), key_(std::move(key)) {
    for (const auto& record : store_.read_all(key_))
        replay_.emplace(record.at("key").get<std::string>(),
                        record.at("raw_text").get<std::string>());
}

Completion CachingBackend::generate(const GenerationRequest& request) {
    const std::string replay_key = request_replay_key(request);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = replay_.find(replay_key);
        if (it != replay_.end()) {
            ++hits_;
            return {it->second, 0, inner_.kind()};
        }
    }
    Completion completion = inner_.generate(request);
    {
        std::lock_guard<std::mutex> lock(mu_);
        store_.append(key_, json{{"key", replay_key},
                                 {"tag", request.request_tag},
                                 {"raw_text", completion.raw_text}});
        replay_[replay_key] = completion.raw_text;
        ++misses_;
    }
    return completion;
}

std::unique_ptr<ModelBackend> make_backend(const PipelineConfig& config) {
    if (config.backend.rfind("mock:", 0) == 0)
        return std::make_unique<MockBackend>(load_mock_spec(config.backend.substr(5)));
    if (config.backend == "mock")
        throw Error(ErrorCode::usage, "mock backend needs a spec file: mock:<path>");
    if (config.backend != "http")
        throw Error(ErrorCode::usage,
                    "unknown backend '" + config.backend + "' (expected http or mock:<path>)");

    HttpBackendConfig http;
    http.endpoint = config.endpoint;
    http.auth_token = config.auth_token;
    http.parallelism = config.parallelism;
    http.verbose = config.verbose;
    return std::make_unique<HttpBackend>(std::move(http));
}

std::unique_ptr<ComplexityScorer> make_scorer(const PipelineConfig& config,
                                              ModelBackend& backend) {
    if (config.scorer == "heuristic") return std::make_unique<HeuristicScorer>();
    if (config.scorer == "judge") {
        JudgeConfig judge;
        judge.model_id = config.judge_model_id;
        return std::make_unique<JudgeScorer>(backend, judge);
    }
    throw Error(ErrorCode::usage,
                "unknown scorer '" + config.scorer + "' (expected heuristic or judge)");
}

PipelinePaths pipeline_paths(const PipelineConfig& config,
                             const std::string& corpus_name) {
    const std::filesystem::path out(config.out_dir);
    PipelinePaths paths;
    paths.complexity_report =
        out / (corpus_name + "." + config.scorer + ".complexity.jsonl");
    paths.partition_file = out / (corpus_name + "." + config.model_id + ".partition.json");
    paths.partition_report =
        out / (corpus_name + "." + config.model_id + ".partition.tsv");
    paths.selection_artifact =
        out / (corpus_name + "." + config.strategy + ".selection.json");
    paths.run_file = out / (corpus_name + "." + config.strategy + ".run.jsonl");
    paths.comparison_table = out / (corpus_name + ".comparison.tsv");
    return paths;
}

namespace {

Corpus load_pipeline_corpus(const PipelineConfig& config) {
    if (config.corpus_path.empty())
        throw Error(ErrorCode::usage, "no corpus path configured (--corpus)");
    return load_corpus(config.corpus_path, task_kind_from_name(config.task_kind));
}

void write_text(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::storage_failure, "cannot write " + path.string());
    out << text;
}

std::string read_text(const std::filesystem::path& path, const char* what,
                      const char* prerequisite_command) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error(ErrorCode::precondition,
                    std::string(what) + " not found at " + path.string() + "; run `cotsel " +
                        prerequisite_command + "` first");
    std::ostringstream buffer;
    buffer << in.rdbuf();
    return buffer.str();
}

} // namespace

ProbeReport run_probe(const PipelineConfig& config) {
    Corpus corpus = load_pipeline_corpus(config);
    Corpus train = split_view(corpus, Split::train);
    auto backend = make_backend(config);
    CacheStore cache(config.cache_root);

    ProbeConfig probe;
    probe.model_id = config.model_id;
    probe.k = config.k;
    probe.temperature = config.temperature;
    probe.max_tokens = config.max_tokens;
    probe.limit = config.probe_limit;
    probe.parallelism = config.parallelism;
    return probe_corpus(train, *backend, cache, probe);
}

std::vector<ComplexityScore> run_score_complexity(const PipelineConfig& config) {
    Corpus corpus = load_pipeline_corpus(config);
    Corpus train = split_view(corpus, Split::train);
    auto backend = make_backend(config);

    CacheStore cache(config.cache_root);
    if (config.fetch_captions) {
        CacheKey caption_key{CacheKind::complexity, config.model_id, train.name,
                             json{{"stage", "captions"}}};
        CachingBackend caption_backend(*backend, cache, caption_key);
        CaptionConfig captions{config.model_id, 128, config.parallelism};
        auto [captioned, report] = attach_captions(train, caption_backend, captions);
        for (const auto& [id, error] : report.failures)
            std::cerr << "caption failed for " << id << ": " << error << "\n";
        train = std::move(captioned);
    }

    CacheKey judge_key{CacheKind::complexity, config.judge_model_id, train.name,
                       json{{"scorer", config.scorer}}};
    CachingBackend cached_backend(*backend, cache, judge_key);

    auto scorer = make_scorer(config, cached_backend);
    auto scores = score_corpus(train, *scorer, config.caption_exempt);

    auto paths = pipeline_paths(config, corpus.name);
    write_text(paths.complexity_report, complexity_report(scores));
    return scores;
}

DifficultyPartition run_partition(const PipelineConfig& config) {
    Corpus corpus = load_pipeline_corpus(config);
    Corpus train = split_view(corpus, Split::train);
    CacheStore cache(config.cache_root);
    const CacheKey key =
        sampling_cache_key(config.model_id, train.name, config.k, config.temperature);

    ScoreReport report = score_all(cache, key, train, config.k);
    if (report.scores.empty())
        throw Error(ErrorCode::precondition,
                    "no complete sampling records for corpus '" + train.name +
                        "'; run `cotsel probe` first");
    auto partition = split_difficulty(group_by_uncertainty(report.scores));

    auto paths = pipeline_paths(config, corpus.name);
    write_text(paths.partition_file, partition_to_json(partition).dump(2) + "\n");
    write_text(paths.partition_report, partition_report(partition));
    return partition;
}

SelectionResult run_select(const PipelineConfig& config) {
    SelectionConfig selection;
    selection.strategy = strategy_from_name(config.strategy);
    selection.m = selection.strategy == Strategy::zero_shot ? 0 : config.m;
    selection.seed = config.seeds.empty() ? 0 : config.seeds.front();
    selection.variant = config.variant == "B" ? CamsVariant::B : CamsVariant::A;

    Corpus corpus = load_pipeline_corpus(config);
    Corpus train = split_view(corpus, Split::train);
    auto paths = pipeline_paths(config, corpus.name);

    auto partition = partition_from_json(
        json::parse(read_text(paths.partition_file, "partition file", "partition")));

    std::vector<ComplexityScore> scores;
    const bool needs_scores = selection.strategy == Strategy::cams_balanced ||
                              selection.strategy == Strategy::complexity_only ||
                              selection.strategy == Strategy::all_difficult ||
                              selection.strategy == Strategy::all_easy;
    if (needs_scores)
        scores = parse_complexity_report(read_text(paths.complexity_report,
                                                   "complexity report",
                                                   "score-complexity"));

    SelectionResult result = select_exemplars(partition, scores, selection, train);
    save_exemplar_set(result, paths.selection_artifact);
    return result;
}

EvaluateOutcome run_evaluate(const PipelineConfig& config) {
    Corpus corpus = load_pipeline_corpus(config);
    Corpus test = split_view(corpus, Split::test);
    auto paths = pipeline_paths(config, corpus.name);
    SelectionResult selected = load_exemplar_set(paths.selection_artifact);

    auto backend = make_backend(config);
    CacheStore cache(config.cache_root);
    CacheKey eval_key{CacheKind::evaluation, config.model_id, test.name,
                      json{{"temperature", config.temperature},
                           {"votes", config.votes},
                           {"exemplars", selected.set.ids()}}};
    CachingBackend cached_backend(*backend, cache, eval_key);

    EvalConfig eval;
    eval.model_id = config.model_id;
    eval.temperature = config.temperature;
    eval.max_tokens = config.max_tokens;
    eval.votes = config.votes;
    eval.parallelism = config.parallelism;

    EvaluateOutcome outcome;
    outcome.run = config.votes > 1
                      ? self_consistency(test, selected.set, cached_backend, eval)
                      : evaluate(test, selected.set, cached_backend, eval);
    outcome.new_calls = cached_backend.misses();
    outcome.replayed = cached_backend.hits();
    save_run(outcome.run, paths.run_file);
    return outcome;
}

CompareOutcome run_compare(const PipelineConfig& config) {
    std::vector<Strategy> strategies;
    std::istringstream in(config.strategy);
    std::string name;
    while (std::getline(in, name, ','))
        if (!name.empty()) strategies.push_back(strategy_from_name(name));

    Corpus corpus = load_pipeline_corpus(config);
    Corpus train = split_view(corpus, Split::train);
    Corpus test = split_view(corpus, Split::test);
    auto paths = pipeline_paths(config, corpus.name);

    auto partition = partition_from_json(
        json::parse(read_text(paths.partition_file, "partition file", "partition")));
    auto scores = parse_complexity_report(
        read_text(paths.complexity_report, "complexity report", "score-complexity"));

    auto backend = make_backend(config);
    CacheStore cache(config.cache_root);
    // one store for the whole comparison; replay keys carry the prompt
    // digest, so runs with different exemplar sets never collide
    CacheKey compare_key{CacheKind::evaluation, config.model_id, test.name,
                         json{{"stage", "compare"},
                              {"strategies", config.strategy},
                              {"seeds", config.seeds},
                              {"m", config.m},
                              {"variant", config.variant},
                              {"temperature", config.temperature}}};
    CachingBackend cached_backend(*backend, cache, compare_key);

    CompareConfig compare;
    compare.eval.model_id = config.model_id;
    compare.eval.temperature = config.temperature;
    compare.eval.max_tokens = config.max_tokens;
    compare.eval.parallelism = config.parallelism;
    compare.m = config.m;
    compare.variant = config.variant == "B" ? CamsVariant::B : CamsVariant::A;

    CompareOutcome outcome;
    outcome.comparison = compare_strategies(test, train, partition, scores,
                                            cached_backend, strategies, config.seeds,
                                            compare);
    outcome.new_calls = cached_backend.misses();
    outcome.replayed = cached_backend.hits();
    write_text(paths.comparison_table, comparison_table(outcome.comparison));
    return outcome;
}

} // namespace cotsel
