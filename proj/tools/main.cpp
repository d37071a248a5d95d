// cotsel — difficulty-balanced few-shot exemplar selection pipeline.
//
// Subcommands map 1:1 onto pipeline stages so every stage can be re-run and
// inspected on its own. All stages resume from the cache; rerunning never
// re-pays completed gateway calls.

#include <iostream>

#include "CLI11.hpp"
#include "cotsel/errors.hpp"
#include "cotsel/pipeline.hpp"

using namespace cotsel;
using nlohmann::json;

namespace {

// Collects only the flags the user actually set, so config-file and
// environment values survive for everything left untouched.
struct FlagCapture {
    std::string config_path;

    void add_common(CLI::App& cmd) {
        cmd.add_option("--config", config_path, "JSON config file");
        add_string(cmd, "--corpus", "corpus_path", "corpus file (line-delimited records)");
        add_string(cmd, "--task-kind", "task_kind", "multiple_choice or open_ended");
        add_string(cmd, "--backend", "backend", "http or mock:<spec-file>");
        add_string(cmd, "--endpoint", "endpoint", "chat-completions endpoint URL");
        add_string(cmd, "--model", "model_id", "model identifier");
        add_int(cmd, "-k,--k", "k", "sampling iterations per sample");
        add_double(cmd, "--temperature", "temperature", "sampling temperature");
        add_int(cmd, "-m,--exemplars", "m", "number of prompt exemplars");
        add_string(cmd, "--strategy", "strategy", "selection strategy");
        add_string(cmd, "--variant", "variant", "cams variant A or B");
        add_seeds(cmd);
        add_string(cmd, "--scorer", "scorer", "heuristic or judge");
        add_string(cmd, "--judge-model", "judge_model_id",
                   "model used by the judge scorer (defaults to --model)");
        add_string(cmd, "--cache-root", "cache_root", "cache directory");
        add_string(cmd, "--out-dir", "out_dir", "artifact output directory");
        add_int(cmd, "--parallelism", "parallelism", "max in-flight gateway calls");
        add_int(cmd, "--limit", "probe_limit", "probe only the first N samples");
        add_int(cmd, "--max-tokens", "max_tokens", "completion token budget");
        add_int(cmd, "--votes", "votes", "self-consistency votes per sample");
        add_flag(cmd, "--caption-exempt", "caption_exempt",
                 "pure-text corpus, no captions expected");
        add_flag(cmd, "--fetch-captions", "fetch_captions",
                 "fill missing captions through the gateway before scoring");
        add_flag(cmd, "--verbose", "verbose", "log gateway traffic (auth redacted)");
        add_flag(cmd, "--dry-run", "dry_run", "print the resolved plan and exit");
    }

    PipelineConfig resolve() {
        json flags = json::object();
        for (const auto& collect : collectors_) collect(flags);
        return load_config(config_path, flags);
    }

private:
    std::vector<std::function<void(json&)>> collectors_;

    void add_string(CLI::App& cmd, const char* flag, std::string key, const char* help) {
        auto value = std::make_shared<std::string>();
        CLI::Option* opt = cmd.add_option(flag, *value, help);
        collectors_.push_back([opt, key, value](json& flags) {
            if (opt->count() > 0) flags[key] = *value;
        });
    }
    void add_int(CLI::App& cmd, const char* flag, std::string key, const char* help) {
        auto value = std::make_shared<int>(0);
        CLI::Option* opt = cmd.add_option(flag, *value, help);
        collectors_.push_back([opt, key, value](json& flags) {
            if (opt->count() > 0) flags[key] = *value;
        });
    }
    void add_double(CLI::App& cmd, const char* flag, std::string key, const char* help) {
        auto value = std::make_shared<double>(0);
        CLI::Option* opt = cmd.add_option(flag, *value, help);
        collectors_.push_back([opt, key, value](json& flags) {
            if (opt->count() > 0) flags[key] = *value;
        });
    }
    void add_flag(CLI::App& cmd, const char* flag, std::string key, const char* help) {
        const std::string description(help);
        CLI::Option* opt = cmd.add_flag(std::string(flag), description);
        collectors_.push_back([opt, key](json& flags) {
            if (opt->count() > 0) flags[key] = true;
        });
    }
    void add_seeds(CLI::App& cmd) {
        auto value = std::make_shared<std::vector<uint64_t>>();
        CLI::Option* opt =
            cmd.add_option("--seeds", *value, "seeds for random strategies")
                ->delimiter(',');
        collectors_.push_back([opt, value](json& flags) {
            if (opt->count() > 0) flags["seeds"] = *value;
        });
    }
};

bool announce_dry_run(const PipelineConfig& config) {
    if (!config.dry_run) return false;
    std::cout << "resolved plan (dry run, no gateway calls):\n"
              << config_to_json(config).dump(2) << "\n";
    return true;
}

int cmd_probe(FlagCapture& capture) {
    PipelineConfig config = capture.resolve();
    if (announce_dry_run(config)) return 0;
    ProbeReport report = run_probe(config);
    for (const auto& s : report.per_sample) {
        std::cout << s.sample_id << ": " << (s.new_count + s.cached_count) << "/"
                  << config.k << " cached (" << s.new_count << " new";
        if (s.failed_count) std::cout << ", " << s.failed_count << " failed";
        std::cout << ")\n";
    }
    std::cout << "probed " << report.samples_considered << " samples: "
              << report.new_records << " new calls, " << report.cached_records
              << " already cached, " << report.failures.size() << " failures\n";
    for (const auto& [what, error] : report.failures)
        std::cout << "  failed " << what << ": " << error << "\n";
    return report.failures.empty() ? 0 : 1;
}

int cmd_score_complexity(FlagCapture& capture) {
    PipelineConfig config = capture.resolve();
    if (announce_dry_run(config)) return 0;
    auto scores = run_score_complexity(config);
    Corpus corpus = load_corpus(config.corpus_path, task_kind_from_name(config.task_kind));
    auto paths = pipeline_paths(config, corpus.name);
    std::cout << "scored " << scores.size() << " samples with " << config.scorer
              << " -> " << paths.complexity_report.string() << "\n";
    return 0;
}

int cmd_partition(FlagCapture& capture) {
    PipelineConfig config = capture.resolve();
    if (announce_dry_run(config)) return 0;
    auto partition = run_partition(config);
    Corpus corpus = load_corpus(config.corpus_path, task_kind_from_name(config.task_kind));
    auto paths = pipeline_paths(config, corpus.name);
    std::cout << partition_report(partition);
    std::cout << "partition digest " << partition.digest() << " -> "
              << paths.partition_file.string() << "\n";
    return 0;
}

int cmd_select(FlagCapture& capture) {
    PipelineConfig config = capture.resolve();
    if (announce_dry_run(config)) return 0;
    SelectionResult result = run_select(config);
    Corpus corpus = load_corpus(config.corpus_path, task_kind_from_name(config.task_kind));
    auto paths = pipeline_paths(config, corpus.name);
    std::cout << "selected " << result.set.exemplars.size() << " exemplars ("
              << config.strategy << ") -> " << paths.selection_artifact.string() << "\n";
    for (const auto& pick : result.set.picks)
        std::cout << "  " << pick.sample_id << " (u=" << pick.group_u << ", "
                  << (pick.from_difficult ? "difficult" : "easy") << ")\n";
    for (const auto& [id, reason] : result.skipped)
        std::cout << "  skipped " << id << ": " << reason << "\n";
    return 0;
}

int cmd_build_prompt(FlagCapture& capture, const std::string& sample_id,
                     const std::string& mode) {
    PipelineConfig config = capture.resolve();
    if (announce_dry_run(config)) return 0;
    Corpus corpus = load_corpus(config.corpus_path, task_kind_from_name(config.task_kind));
    const Sample* sample = corpus.find(sample_id);
    if (!sample) throw Error(ErrorCode::unknown_sample, "no sample '" + sample_id + "'");
    auto paths = pipeline_paths(config, corpus.name);
    SelectionResult selected = load_exemplar_set(paths.selection_artifact);
    PromptMode prompt_mode =
        mode == "zero_shot" ? PromptMode::zero_shot_cot : PromptMode::few_shot_cot;
    std::cout << build_prompt(selected.set, *sample, prompt_mode) << "\n";
    return 0;
}

int cmd_evaluate(FlagCapture& capture) {
    PipelineConfig config = capture.resolve();
    if (announce_dry_run(config)) return 0;
    EvaluateOutcome outcome = run_evaluate(config);
    const EvaluationRun& run = outcome.run;
    Corpus corpus = load_corpus(config.corpus_path, task_kind_from_name(config.task_kind));
    auto paths = pipeline_paths(config, corpus.name);
    std::cout << "evaluated " << run.results.size() << " samples: accuracy "
              << run.accuracy << " -> " << paths.run_file.string() << "\n";
    std::cout << "gateway: " << outcome.new_calls << " new calls, " << outcome.replayed
              << " replayed from cache\n";
    auto breakdown = subdomain_breakdown(run, corpus);
    for (const auto& [tag, acc] : breakdown)
        std::cout << "  " << tag << ": " << acc << "\n";
    return 0;
}

int cmd_compare(FlagCapture& capture) {
    PipelineConfig config = capture.resolve();
    if (announce_dry_run(config)) return 0;
    CompareOutcome outcome = run_compare(config);
    std::cout << comparison_table(outcome.comparison);
    std::cout << "gateway: " << outcome.new_calls << " new calls, " << outcome.replayed
              << " replayed from cache\n";
    Corpus corpus = load_corpus(config.corpus_path, task_kind_from_name(config.task_kind));
    std::cout << "table -> "
              << pipeline_paths(config, corpus.name).comparison_table.string() << "\n";
    return 0;
}

int cmd_compact_cache(FlagCapture& capture) {
    PipelineConfig config = capture.resolve();
    if (announce_dry_run(config)) return 0;
    CacheStore cache(config.cache_root);
    size_t removed_total = 0;
    for (const auto& key : cache.known_keys()) {
        auto key_fn = [&key](const json& record) -> std::string {
            if (key.kind == CacheKind::sampling)
                return record.value("sample_id", "") + "#" +
                       std::to_string(record.value("iteration", 0)) + "@" +
                       record.value("model_id", "") + "/" +
                       std::to_string(record.value("temperature", 0.0));
            return record.value("tag", record.dump());
        };
        auto stats = cache.compact(key, key_fn);
        removed_total += stats.removed;
        std::cout << cache_kind_name(key.kind) << "/" << key.digest() << ": kept "
                  << stats.kept << ", removed " << stats.removed << "\n";
    }
    std::cout << "compacted " << removed_total << " duplicate records\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"difficulty-balanced few-shot exemplar selection"};
    app.require_subcommand(1);

    std::vector<std::pair<CLI::App*, std::function<int()>>> handlers;
    std::vector<std::unique_ptr<FlagCapture>> captures;

    auto add_command = [&](const char* name, const char* help,
                           std::function<int(FlagCapture&)> handler) -> CLI::App* {
        CLI::App* cmd = app.add_subcommand(name, help);
        auto capture = std::make_unique<FlagCapture>();
        capture->add_common(*cmd);
        FlagCapture* raw = capture.get();
        captures.push_back(std::move(capture));
        handlers.emplace_back(cmd, [raw, handler] { return handler(*raw); });
        return cmd;
    };

    add_command("probe", "k-sample the train split zero-shot into the cache", cmd_probe);
    add_command("score-complexity", "flatten and score the train split",
                cmd_score_complexity);
    add_command("partition", "group cached uncertainty scores into difficulty pools",
                cmd_partition);
    add_command("select", "pick prompt exemplars with the configured strategy",
                cmd_select);
    add_command("evaluate", "run the test split under the selected prompt",
                cmd_evaluate);
    add_command("compare", "run several strategies over seeds and tabulate variance",
                cmd_compare);
    add_command("compact-cache", "drop duplicate cache records (keeps first)",
                cmd_compact_cache);

    // build-prompt takes positionals on top of the common flags.
    std::string prompt_sample_id;
    std::string prompt_mode = "few_shot";
    {
        CLI::App* cmd = app.add_subcommand("build-prompt",
                                           "print the prompt for one sample");
        auto capture = std::make_unique<FlagCapture>();
        capture->add_common(*cmd);
        cmd->add_option("--sample-id", prompt_sample_id, "target sample id")->required();
        cmd->add_option("--mode", prompt_mode, "few_shot or zero_shot");
        FlagCapture* raw = capture.get();
        captures.push_back(std::move(capture));
        handlers.emplace_back(cmd, [&, raw] {
            return cmd_build_prompt(*raw, prompt_sample_id, prompt_mode);
        });
    }

    try {
        app.parse(argc, argv);
        for (auto& [cmd, handler] : handlers)
            if (cmd->parsed()) return handler();
        return 1;
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
