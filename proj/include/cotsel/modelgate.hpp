#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "cotsel/corpus.hpp"

namespace cotsel {

enum class BackendKind { http, mock };

struct GenerationRequest {
    std::string model_id;
    std::string prompt;
    std::optional<std::string> image;  // opaque locator / data URI, sent verbatim
    bool caption_substitute = false;   // image already folded into prompt text
    double temperature = 0.5;
    int max_tokens = 512;
    std::string request_tag;           // cache key; convention "<purpose>:<id>#<iter>"
};

struct Completion {
    std::string raw_text;
    int64_t latency_ms = 0;
    BackendKind backend = BackendKind::mock;
};

struct NormalizedAnswer {
    std::string canonical;
    std::optional<int> matched_option_index;
};

/// Deterministic, total answer canonicalization. For multiple choice it
/// recognizes bare option letters, "answer is X" patterns, and verbatim
/// option text; anything else falls back to the canonicalized raw string.
NormalizedAnswer normalize_answer(const std::string& raw, TaskKind kind,
                                  const std::vector<std::string>& options);

class ModelBackend {
public:
    virtual ~ModelBackend() = default;
    virtual Completion generate(const GenerationRequest& request) = 0;
    virtual BackendKind kind() const = 0;
};

struct RetryPolicy {
    int attempts = 3;
    std::chrono::milliseconds initial_backoff{500};
};

struct HttpBackendConfig {
    std::string endpoint;       // e.g. http://127.0.0.1:11434/v1/chat/completions
    std::string auth_token;     // optional bearer token
    int parallelism = 4;        // in-flight request bound
    bool verbose = false;       // log bodies to stderr, auth redacted
    RetryPolicy retry;
};

/// Reads COTSEL_ENDPOINT, COTSEL_API_KEY, COTSEL_PARALLELISM.
HttpBackendConfig http_config_from_env();

/// Chat-completions-style HTTP client: POST of a message list with optional
/// inline image content and a temperature field. Retries transient transport
/// failures with exponential backoff; never retries well-formed replies.
class HttpBackend : public ModelBackend {
public:
    explicit HttpBackend(HttpBackendConfig config);
    ~HttpBackend() override;

    Completion generate(const GenerationRequest& request) override;
    BackendKind kind() const override { return BackendKind::http; }

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

/// Deterministic test double of a generative model.
struct MockModelSpec {
    struct WeightedAnswer {
        std::string answer;
        double weight = 1.0;
    };
    struct Knowledge {
        std::string key;     // token the prompt must contain
        std::string answer;  // reply when the key is present
    };

    uint64_t seed = 0;
    std::map<std::string, std::vector<WeightedAnswer>> answers;
    std::map<std::string, std::string> captions;
    std::map<std::string, Knowledge> knowledge;
    std::map<std::string, std::string> replies;  // exact request_tag -> reply

    void validate() const;
};

MockModelSpec load_mock_spec(const std::filesystem::path& path);

/// Weighted draw keyed on (seed, sample_id, iteration); identical inputs give
/// byte-identical output on every platform and process.
Completion mock_generate(const MockModelSpec& spec, const std::string& sample_id,
                         int iteration);

/// Splits "purpose:sample_id#iteration" tags. Fields left empty/1 when absent.
struct RequestTag {
    std::string purpose;
    std::string sample_id;
    int iteration = 1;
};
RequestTag parse_request_tag(const std::string& tag);

class MockBackend : public ModelBackend {
public:
    explicit MockBackend(MockModelSpec spec);

    Completion generate(const GenerationRequest& request) override;
    BackendKind kind() const override { return BackendKind::mock; }

    const MockModelSpec& spec() const { return spec_; }

private:
    MockModelSpec spec_;
};

} // namespace cotsel
