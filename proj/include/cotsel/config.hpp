#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"

namespace cotsel {

/// Pipeline-wide settings. Defaults follow the shipped experiment recipe
/// (k=5, temperature 0.5, 4 exemplars); resolution order is
/// flags > environment > config file > defaults.
struct PipelineConfig {
    std::string corpus_path;
    std::string task_kind = "multiple_choice";
    bool caption_exempt = false;
    bool fetch_captions = false;  // fill missing captions through the gateway

    std::string backend = "http";       // "http" or "mock:<spec-file>"
    std::string endpoint;
    std::string auth_token;
    std::string model_id = "default-model";

    int k = 5;
    double temperature = 0.5;
    int m = 4;
    std::string strategy = "cams_balanced";
    std::string variant = "A";
    std::vector<uint64_t> seeds = {1, 2, 3, 4, 5};
    std::string scorer = "heuristic";   // "heuristic" or "judge"
    std::string judge_model_id;         // defaults to model_id

    std::string cache_root = "cache";
    std::string out_dir = "out";
    int parallelism = 4;
    int probe_limit = 0;                // 0 = whole train split
    int max_tokens = 512;
    int votes = 1;
    bool verbose = false;
    bool dry_run = false;
};

/// Environment keys honored during resolution.
std::map<std::string, std::string> config_env_snapshot();

/// Merges the three override layers over built-in defaults. `file_config`
/// and `flags` carry only the keys they set (JSON objects keyed by the
/// field names above).
PipelineConfig resolve_config(const nlohmann::json& file_config,
                              const std::map<std::string, std::string>& env,
                              const nlohmann::json& flags);

PipelineConfig load_config(const std::string& config_path, const nlohmann::json& flags);

nlohmann::json config_to_json(const PipelineConfig& config);

} // namespace cotsel
