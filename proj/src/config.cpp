#include "cotsel/config.hpp"

#include <cstdlib>
#include <fstream>

#include "cotsel/errors.hpp"

namespace cotsel {

using nlohmann::json;

std::map<std::string, std::string> config_env_snapshot() {
    std::map<std::string, std::string> env;
    if (const char* v = std::getenv("COTSEL_ENDPOINT")) env["COTSEL_ENDPOINT"] = v;
    if (const char* v = std::getenv("COTSEL_API_KEY")) env["COTSEL_API_KEY"] = v;
    if (const char* v = std::getenv("COTSEL_PARALLELISM")) env["COTSEL_PARALLELISM"] = v;
    return env;
}

namespace {

void apply_overrides(PipelineConfig& config, const json& overrides) {
    if (!overrides.is_object()) return;
    auto set_string = [&](const char* key, std::string& field) {
        if (overrides.contains(key)) field = overrides.at(key).get<std::string>();
    };
    auto set_int = [&](const char* key, int& field) {
        if (overrides.contains(key)) field = overrides.at(key).get<int>();
    };
    auto set_bool = [&](const char* key, bool& field) {
        if (overrides.contains(key)) field = overrides.at(key).get<bool>();
    };

    set_string("corpus_path", config.corpus_path);
    set_string("task_kind", config.task_kind);
    set_bool("caption_exempt", config.caption_exempt);
    set_bool("fetch_captions", config.fetch_captions);
    set_string("backend", config.backend);
    set_string("endpoint", config.endpoint);
    set_string("auth_token", config.auth_token);
    set_string("model_id", config.model_id);
    set_int("k", config.k);
    if (overrides.contains("temperature"))
        config.temperature = overrides.at("temperature").get<double>();
    set_int("m", config.m);
    set_string("strategy", config.strategy);
    set_string("variant", config.variant);
    if (overrides.contains("seeds"))
        config.seeds = overrides.at("seeds").get<std::vector<uint64_t>>();
    set_string("scorer", config.scorer);
    set_string("judge_model_id", config.judge_model_id);
    set_string("cache_root", config.cache_root);
    set_string("out_dir", config.out_dir);
    set_int("parallelism", config.parallelism);
    set_int("probe_limit", config.probe_limit);
    set_int("max_tokens", config.max_tokens);
    set_int("votes", config.votes);
    set_bool("verbose", config.verbose);
    set_bool("dry_run", config.dry_run);
}

json env_as_overrides(const std::map<std::string, std::string>& env) {
    json overrides = json::object();
    if (auto it = env.find("COTSEL_ENDPOINT"); it != env.end())
        overrides["endpoint"] = it->second;
    if (auto it = env.find("COTSEL_API_KEY"); it != env.end())
        overrides["auth_token"] = it->second;
    if (auto it = env.find("COTSEL_PARALLELISM"); it != env.end()) {
        try {
            overrides["parallelism"] = std::stoi(it->second);
        } catch (...) {
            throw Error(ErrorCode::usage,
                        "COTSEL_PARALLELISM is not an integer: " + it->second);
        }
    }
    return overrides;
}

} // namespace

PipelineConfig resolve_config(const json& file_config,
                              const std::map<std::string, std::string>& env,
                              const json& flags) {
    PipelineConfig config;
    apply_overrides(config, file_config);
    apply_overrides(config, env_as_overrides(env));
    apply_overrides(config, flags);
    if (config.judge_model_id.empty()) config.judge_model_id = config.model_id;
    return config;
}

PipelineConfig load_config(const std::string& config_path, const json& flags) {
    json file_config = json::object();
    if (!config_path.empty()) {
        std::ifstream in(config_path);
        if (!in)
            throw Error(ErrorCode::storage_failure,
                        "cannot open config file " + config_path);
        try {
            in >> file_config;
        } catch (const json::exception& e) {
            throw Error(ErrorCode::parse_error,
                        "config file " + config_path + ": " + e.what());
        }
    }
    return resolve_config(file_config, config_env_snapshot(), flags);
}

json config_to_json(const PipelineConfig& config) {
    return json{{"corpus_path", config.corpus_path},
                {"task_kind", config.task_kind},
                {"caption_exempt", config.caption_exempt},
                {"fetch_captions", config.fetch_captions},
                {"backend", config.backend},
                {"endpoint", config.endpoint},
                {"auth_token", config.auth_token.empty() ? "" : "<redacted>"},
                {"model_id", config.model_id},
                {"k", config.k},
                {"temperature", config.temperature},
                {"m", config.m},
                {"strategy", config.strategy},
                {"variant", config.variant},
                {"seeds", config.seeds},
                {"scorer", config.scorer},
                {"judge_model_id", config.judge_model_id},
                {"cache_root", config.cache_root},
                {"out_dir", config.out_dir},
                {"parallelism", config.parallelism},
                {"probe_limit", config.probe_limit},
                {"max_tokens", config.max_tokens},
                {"votes", config.votes},
                {"verbose", config.verbose},
                {"dry_run", config.dry_run}};
}

} // namespace cotsel
