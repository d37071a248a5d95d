#include "cotsel/modelgate.hpp"

#include <condition_variable>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <iostream>
#include <mutex>
#include <thread>

#include "cotsel/errors.hpp"
#include "cotsel/util.hpp"
#include "httplib.h"
#include "json.hpp"

namespace cotsel {

using nlohmann::json;

const char* error_code_name(ErrorCode code) {
    switch (code) {
        case ErrorCode::parse_error: return "parse-error";
        case ErrorCode::invariant_violation: return "invariant-violation";
        case ErrorCode::kind_mismatch: return "kind-mismatch";
        case ErrorCode::empty_corpus: return "empty-corpus";
        case ErrorCode::missing_caption: return "missing-caption";
        case ErrorCode::transport_exhausted: return "transport-exhausted";
        case ErrorCode::malformed_response: return "malformed-response";
        case ErrorCode::auth_failure: return "auth-failure";
        case ErrorCode::unknown_sample: return "unknown-sample";
        case ErrorCode::unparseable_reply: return "unparseable-reply";
        case ErrorCode::evolution_stalled: return "evolution-stalled";
        case ErrorCode::pool_exhausted: return "pool-exhausted";
        case ErrorCode::missing_complexity: return "missing-complexity";
        case ErrorCode::wrong_count: return "wrong-count";
        case ErrorCode::mixed_samples: return "mixed-samples";
        case ErrorCode::duplicate_sample: return "duplicate-sample";
        case ErrorCode::unordered_groups: return "unordered-groups";
        case ErrorCode::corruption: return "corruption";
        case ErrorCode::storage_failure: return "storage-failure";
        case ErrorCode::precondition: return "precondition";
        case ErrorCode::usage: return "usage";
    }
    return "unknown";
}

namespace {

// Strips enclosing (), [], {} pairs, then checks for a single a-z letter.
std::optional<int> option_letter_index(std::string text, size_t option_count) {
    text = trim(text);
    while (text.size() >= 2) {
        char open = text.front(), close = text.back();
        if ((open == '(' && close == ')') || (open == '[' && close == ']') ||
            (open == '{' && close == '}'))
            text = trim(text.substr(1, text.size() - 2));
        else
            break;
    }
    if (text.size() == 1 && text[0] >= 'a' && text[0] <= 'z') {
        int idx = text[0] - 'a';
        if (idx < static_cast<int>(option_count)) return idx;
    }
    return std::nullopt;
}

std::optional<int> option_text_index(const std::string& canon,
                                     const std::vector<std::string>& options) {
    for (size_t i = 0; i < options.size(); ++i)
        if (canonical_text(options[i]) == canon) return static_cast<int>(i);
    return std::nullopt;
}

std::string letter_for_index(int index) {
    return std::string(1, static_cast<char>('a' + index));
}

} // namespace

NormalizedAnswer normalize_answer(const std::string& raw, TaskKind kind,
                                  const std::vector<std::string>& options) {
    const std::string canon = canonical_text(raw);
    if (kind == TaskKind::open_ended || options.empty())
        return {canon, std::nullopt};

    if (auto idx = option_letter_index(canon, options.size()))
        return {letter_for_index(*idx), idx};

    // "the answer is X" / "answer: X" patterns; use the last occurrence so a
    // reasoning chain that restates the question does not confuse matching.
    for (const char* marker : {"answer is", "answer:"}) {
        size_t pos = canon.rfind(marker);
        if (pos == std::string::npos) continue;
        std::string tail = trim(canon.substr(pos + std::strlen(marker)));
        if (!tail.empty() && tail.front() == ':') tail = trim(tail.substr(1));
        if (auto idx = option_letter_index(tail, options.size()))
            return {letter_for_index(*idx), idx};
        if (auto idx = option_text_index(canonical_text(tail), options))
            return {letter_for_index(*idx), idx};
    }

    if (auto idx = option_text_index(canon, options))
        return {canon, idx};

    return {canon, std::nullopt};
}

// ---------------------------------------------------------------------------
// Mock backend
// ---------------------------------------------------------------------------

void MockModelSpec::validate() const {
    for (const auto& [id, dist] : answers) {
        if (dist.empty())
            throw Error(ErrorCode::invariant_violation,
                        "mock distribution for '" + id + "' is empty");
        for (const auto& wa : dist)
            if (wa.weight <= 0.0)
                throw Error(ErrorCode::invariant_violation,
                            "mock distribution for '" + id + "' has non-positive weight");
    }
}

MockModelSpec load_mock_spec(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in)
        throw Error(ErrorCode::storage_failure, "cannot open mock spec " + path.string());
    json j;
    try {
        in >> j;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::parse_error, "mock spec " + path.string() + ": " + e.what());
    }

    MockModelSpec spec;
    spec.seed = j.value("seed", 0ull);
    if (j.contains("answers"))
        for (const auto& [id, dist] : j.at("answers").items()) {
            std::vector<MockModelSpec::WeightedAnswer> list;
            for (const auto& entry : dist)
                list.push_back({entry.at(0).get<std::string>(), entry.at(1).get<double>()});
            spec.answers[id] = std::move(list);
        }
    if (j.contains("captions"))
        for (const auto& [id, cap] : j.at("captions").items())
            spec.captions[id] = cap.get<std::string>();
    if (j.contains("knowledge"))
        for (const auto& [id, entry] : j.at("knowledge").items())
            spec.knowledge[id] = {entry.at("key").get<std::string>(),
                                  entry.at("answer").get<std::string>()};
    if (j.contains("replies"))
        for (const auto& [tag, reply] : j.at("replies").items())
            spec.replies[tag] = reply.get<std::string>();
    spec.validate();
    return spec;
}

Completion mock_generate(const MockModelSpec& spec, const std::string& sample_id,
                         int iteration) {
    auto it = spec.answers.find(sample_id);
    if (it == spec.answers.end())
        throw Error(ErrorCode::unknown_sample,
                    "mock spec has no distribution for sample '" + sample_id + "'");
    const auto& dist = it->second;

    double total = 0.0;
    for (const auto& wa : dist) total += wa.weight;
    double x = keyed_unit_draw(spec.seed, sample_id, iteration) * total;

    for (const auto& wa : dist) {
        x -= wa.weight;
        if (x < 0.0) return {wa.answer, 0, BackendKind::mock};
    }
    return {dist.back().answer, 0, BackendKind::mock};
}

RequestTag parse_request_tag(const std::string& tag) {
    RequestTag out;
    size_t colon = tag.find(':');
    std::string rest = tag;
    if (colon != std::string::npos) {
        out.purpose = tag.substr(0, colon);
        rest = tag.substr(colon + 1);
    }
    size_t hash = rest.rfind('#');
    if (hash != std::string::npos) {
        out.sample_id = rest.substr(0, hash);
        try {
            out.iteration = std::stoi(rest.substr(hash + 1));
        } catch (...) {
            out.iteration = 1;
        }
    } else {
        out.sample_id = rest;
    }
    return out;
}

MockBackend::MockBackend(MockModelSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
}

Completion MockBackend::generate(const GenerationRequest& request) {
    auto exact = spec_.replies.find(request.request_tag);
    if (exact != spec_.replies.end()) return {exact->second, 0, BackendKind::mock};

    RequestTag tag = parse_request_tag(request.request_tag);
    if (tag.purpose == "caption") {
        auto cap = spec_.captions.find(tag.sample_id);
        if (cap == spec_.captions.end())
            throw Error(ErrorCode::unknown_sample,
                        "mock spec has no caption for sample '" + tag.sample_id + "'");
        return {cap->second, 0, BackendKind::mock};
    }

    auto known = spec_.knowledge.find(tag.sample_id);
    if (known != spec_.knowledge.end() &&
        request.prompt.find(known->second.key) != std::string::npos)
        return {known->second.answer, 0, BackendKind::mock};

    // judge prompts are tagged with a content hash, so there is nothing to
    // list in the spec file; derive a stable score from the prompt instead
    if (tag.purpose == "judge" && !spec_.answers.count(tag.sample_id)) {
        int score = 1 + static_cast<int>(fnv1a64(request.prompt) % 10);
        return {std::to_string(score), 0, BackendKind::mock};
    }

    return mock_generate(spec_, tag.sample_id, tag.iteration);
}

// ---------------------------------------------------------------------------
// HTTP backend
// ---------------------------------------------------------------------------

HttpBackendConfig http_config_from_env() {
    HttpBackendConfig config;
    if (const char* ep = std::getenv("COTSEL_ENDPOINT")) config.endpoint = ep;
    if (const char* key = std::getenv("COTSEL_API_KEY")) config.auth_token = key;
    if (const char* par = std::getenv("COTSEL_PARALLELISM")) {
        try {
            config.parallelism = std::max(1, std::stoi(par));
        } catch (...) {
        }
    }
    return config;
}

namespace {

// Bounds in-flight requests; a plain mutex/cv gate keeps the limit runtime
// configurable.
class ParallelismGate {
public:
    explicit ParallelismGate(int limit) : available_(limit < 1 ? 1 : limit) {}

    void acquire() {
        std::unique_lock<std::mutex> lock(mu_);
        cv_.wait(lock, [&] { return available_ > 0; });
        --available_;
    }

    void release() {
        {
            std::lock_guard<std::mutex> lock(mu_);
            ++available_;
        }
        cv_.notify_one();
    }

private:
    std::mutex mu_;
    std::condition_variable cv_;
    int available_;
};

struct ParsedEndpoint {
    std::string base;  // scheme://host:port
    std::string path;  // /v1/chat/completions
};

ParsedEndpoint parse_endpoint(const std::string& endpoint) {
    if (endpoint.empty())
        throw Error(ErrorCode::precondition,
                    "no endpoint configured (set COTSEL_ENDPOINT or --endpoint)");
    size_t scheme_end = endpoint.find("://");
    size_t path_start = endpoint.find(
        '/', scheme_end == std::string::npos ? 0 : scheme_end + 3);
    if (path_start == std::string::npos)
        return {endpoint, "/v1/chat/completions"};
    return {endpoint.substr(0, path_start), endpoint.substr(path_start)};
}

json build_body(const GenerationRequest& request) {
    json content = json::array();
    content.push_back({{"type", "text"}, {"text", request.prompt}});
    if (request.image && !request.caption_substitute)
        content.push_back({{"type", "image_url"}, {"image_url", {{"url", *request.image}}}});
    return json{{"model", request.model_id},
                {"messages", json::array({{{"role", "user"}, {"content", content}}})},
                {"temperature", request.temperature},
                {"max_tokens", request.max_tokens}};
}

} // namespace

struct HttpBackend::Impl {
    HttpBackendConfig config;
    ParsedEndpoint endpoint;
    ParallelismGate gate;

    Impl(HttpBackendConfig cfg)
        : config(std::move(cfg)), endpoint(parse_endpoint(config.endpoint)),
          gate(config.parallelism) {}
};

HttpBackend::HttpBackend(HttpBackendConfig config)
    : impl_(std::make_unique<Impl>(std::move(config))) {}

HttpBackend::~HttpBackend() = default;

Completion HttpBackend::generate(const GenerationRequest& request) {
    const auto& cfg = impl_->config;
    const std::string body = build_body(request).dump();

    if (cfg.verbose)
        std::cerr << "[gateway] POST " << impl_->endpoint.base << impl_->endpoint.path
                  << " tag=" << request.request_tag << " body=" << body << "\n";

    impl_->gate.acquire();
    struct GateRelease {
        ParallelismGate& g;
        ~GateRelease() { g.release(); }
    } release{impl_->gate};

    auto backoff = cfg.retry.initial_backoff;
    std::string last_transport_error;
    const auto start = std::chrono::steady_clock::now();

    for (int attempt = 1; attempt <= cfg.retry.attempts; ++attempt) {
        if (attempt > 1) {
            std::this_thread::sleep_for(backoff);
            backoff *= 2;
        }

        httplib::Client client(impl_->endpoint.base);
        client.set_connection_timeout(10, 0);
        client.set_read_timeout(300, 0);
        httplib::Headers headers;
        if (!cfg.auth_token.empty())
            headers.emplace("Authorization", "Bearer " + cfg.auth_token);

        auto res = client.Post(impl_->endpoint.path, headers, body, "application/json");
        if (!res) {
            last_transport_error = httplib::to_string(res.error());
            continue;
        }
        if (res->status == 401 || res->status == 403)
            throw Error(ErrorCode::auth_failure,
                        "endpoint rejected credentials (HTTP " +
                            std::to_string(res->status) + ")");
        if (res->status == 429 || res->status >= 500) {
            last_transport_error = "HTTP " + std::to_string(res->status);
            continue;
        }
        if (res->status != 200)
            throw Error(ErrorCode::malformed_response,
                        "unexpected HTTP status " + std::to_string(res->status));

        if (cfg.verbose)
            std::cerr << "[gateway] reply tag=" << request.request_tag
                      << " body=" << res->body << "\n";

        json reply;
        try {
            reply = json::parse(res->body);
        } catch (const json::exception& e) {
            throw Error(ErrorCode::malformed_response,
                        std::string("response is not JSON: ") + e.what());
        }
        try {
            std::string text =
                reply.at("choices").at(0).at("message").at("content").get<std::string>();
            auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(
                               std::chrono::steady_clock::now() - start)
                               .count();
            return {std::move(text), elapsed, BackendKind::http};
        } catch (const json::exception&) {
            throw Error(ErrorCode::malformed_response,
                        "response lacks choices[0].message.content");
        }
    }

    throw Error(ErrorCode::transport_exhausted,
                "gave up after " + std::to_string(cfg.retry.attempts) + " attempts (" +
                    last_transport_error + ")");
}

} // namespace cotsel
