#include <arpa/inet.h>
#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <thread>

#include "cotsel/errors.hpp"
#include "cotsel/modelgate.hpp"
#include "cotsel/util.hpp"
#include "doctest.h"
#include "httplib.h"
#include "json.hpp"
#include "support/testutil.hpp"

using namespace cotsel;

TEST_CASE("normalize_answer extracts option letters") {
    std::vector<std::string> options{"red", "blue", "green"};
    auto n = normalize_answer("The answer is (B).", TaskKind::multiple_choice, options);
    CHECK(n.canonical == "b");
    CHECK(n.matched_option_index == 1);

    CHECK(normalize_answer("C", TaskKind::multiple_choice, options)
              .matched_option_index == 2);
    CHECK(normalize_answer(" [a] ", TaskKind::multiple_choice, options)
              .matched_option_index == 0);
    // letter out of range is not a match
    CHECK(!normalize_answer("z", TaskKind::multiple_choice, options)
               .matched_option_index.has_value());
}

TEST_CASE("normalize_answer matches verbatim option text") {
    std::vector<std::string> options{"red", "blue", "green"};
    auto n = normalize_answer("BLUE", TaskKind::multiple_choice, options);
    CHECK(n.canonical == "blue");
    CHECK(n.matched_option_index == 1);

    auto tail = normalize_answer("Because the sky... the answer is green.",
                                 TaskKind::multiple_choice, options);
    CHECK(tail.matched_option_index == 2);
}

TEST_CASE("normalize_answer canonicalizes open-ended text") {
    auto n = normalize_answer("  a dog  ", TaskKind::open_ended, {});
    CHECK(n.canonical == "a dog");
    CHECK(!n.matched_option_index.has_value());

    CHECK(normalize_answer("It is a DOG!?", TaskKind::open_ended, {}).canonical ==
          "it is a dog");
}

TEST_CASE("normalize_answer unmatched MC reply keeps canonical text, no index") {
    std::vector<std::string> options{"red", "blue"};
    auto n = normalize_answer("probably purple", TaskKind::multiple_choice, options);
    CHECK(n.canonical == "probably purple");
    CHECK(!n.matched_option_index.has_value());
}

TEST_CASE("normalize_answer is idempotent") {
    std::vector<std::string> options{"red", "blue", "green"};
    std::vector<std::string> inputs{"The answer is (B).",
                                    "BLUE",
                                    "a dog",
                                    "Answer: green",
                                    "??",
                                    "",
                                    "B.",
                                    "The ANSWER is: red!"};
    // a few deterministic fuzz strings
    DetRng rng(7);
    for (int i = 0; i < 50; ++i) {
        std::string s;
        size_t len = rng.next_below(12);
        for (size_t c = 0; c < len; ++c)
            s += static_cast<char>('a' + static_cast<char>(rng.next_below(26)));
        inputs.push_back(s);
    }
    for (const auto& raw : inputs) {
        for (TaskKind kind : {TaskKind::multiple_choice, TaskKind::open_ended}) {
            auto once = normalize_answer(raw, kind, options);
            auto twice = normalize_answer(once.canonical, kind, options);
            CHECK(once.canonical == twice.canonical);
        }
    }
}

TEST_CASE("mock_generate draws deterministically from the distribution") {
    MockModelSpec spec;
    spec.seed = 11;
    spec.answers["q1"] = {{"A", 1.0}};
    spec.answers["q2"] = {{"A", 0.5}, {"B", 0.5}};

    // degenerate distribution always answers the same
    for (int iter = 1; iter <= 5; ++iter)
        CHECK(mock_generate(spec, "q1", iter).raw_text == "A");

    // identical (seed, id, iteration) -> byte-identical output
    MockModelSpec same = spec;
    std::vector<std::string> first, second;
    for (int iter = 1; iter <= 5; ++iter) {
        first.push_back(mock_generate(spec, "q2", iter).raw_text);
        second.push_back(mock_generate(same, "q2", iter).raw_text);
    }
    CHECK(first == second);

    // unknown id is an error
    CHECK_THROWS_AS((void)mock_generate(spec, "q3", 1), Error);
    try {
        (void)mock_generate(spec, "q3", 1);
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::unknown_sample);
    }
}

TEST_CASE("mock_generate empirical frequency over 10k draws stays near weights") {
    MockModelSpec spec;
    spec.seed = 42;
    spec.answers["q1"] = {{"A", 0.5}, {"B", 0.5}};
    int a_count = 0;
    const int draws = 10000;
    for (int iter = 1; iter <= draws; ++iter)
        if (mock_generate(spec, "q1", iter).raw_text == "A") ++a_count;
    double freq = static_cast<double>(a_count) / draws;
    CHECK(freq >= 0.47);
    CHECK(freq <= 0.53);
}

TEST_CASE("mock backend honors exact replies, captions, and knowledge keys") {
    MockModelSpec spec;
    spec.seed = 3;
    spec.answers["t1"] = {{"wrong", 1.0}};
    spec.captions["img1"] = "a red cube";
    spec.knowledge["t1"] = {"KEY42", "B"};
    spec.replies["evolve:abc#1"] = "custom reply";
    MockBackend backend(spec);

    GenerationRequest req;
    req.request_tag = "caption:img1#1";
    CHECK(backend.generate(req).raw_text == "a red cube");

    req.request_tag = "evolve:abc#1";
    CHECK(backend.generate(req).raw_text == "custom reply");

    req.request_tag = "eval:t1#1";
    req.prompt = "no key here";
    CHECK(backend.generate(req).raw_text == "wrong");
    req.prompt = "rationale mentions KEY42 somewhere";
    CHECK(backend.generate(req).raw_text == "B");
}

TEST_CASE("request tags parse into purpose/sample/iteration") {
    auto tag = parse_request_tag("probe:q1#3");
    CHECK(tag.purpose == "probe");
    CHECK(tag.sample_id == "q1");
    CHECK(tag.iteration == 3);

    auto bare = parse_request_tag("q7");
    CHECK(bare.purpose.empty());
    CHECK(bare.sample_id == "q7");
    CHECK(bare.iteration == 1);
}

namespace {

struct LocalServer {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    explicit LocalServer(const httplib::Server::Handler& handler) {
        server.Post("/v1/chat/completions", handler);
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~LocalServer() {
        server.stop();
        thread.join();
    }

    HttpBackendConfig config() const {
        HttpBackendConfig cfg;
        cfg.endpoint = "http://127.0.0.1:" + std::to_string(port);
        cfg.retry.attempts = 3;
        cfg.retry.initial_backoff = std::chrono::milliseconds(5);
        return cfg;
    }
};

GenerationRequest basic_request() {
    GenerationRequest req;
    req.model_id = "m1";
    req.prompt = "hello";
    req.temperature = 0.5;
    req.max_tokens = 16;
    req.request_tag = "eval:x#1";
    return req;
}

} // namespace

TEST_CASE("http backend round-trips a chat completion") {
    std::string seen_body;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        res.set_content(
            R"({"choices":[{"message":{"role":"assistant","content":"The answer is A."}}]})",
            "application/json");
    });
    HttpBackend backend(server.config());
    Completion completion = backend.generate(basic_request());
    CHECK(completion.raw_text == "The answer is A.");
    CHECK(completion.backend == BackendKind::http);

    auto body = nlohmann::json::parse(seen_body);
    CHECK(body.at("model") == "m1");
    CHECK(body.at("temperature") == 0.5);
    CHECK(body.at("messages").at(0).at("content").at(0).at("text") == "hello");
}

TEST_CASE("http backend sends inline image content") {
    std::string seen_body;
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        seen_body = req.body;
        res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})",
                        "application/json");
    });
    HttpBackend backend(server.config());
    auto req = basic_request();
    req.image = "data:image/png;base64,AAAA";
    backend.generate(req);
    auto body = nlohmann::json::parse(seen_body);
    REQUIRE(body.at("messages").at(0).at("content").size() == 2);
    CHECK(body.at("messages").at(0).at("content").at(1).at("image_url").at("url") ==
          "data:image/png;base64,AAAA");
}

TEST_CASE("http backend retries 5xx and then succeeds") {
    std::atomic<int> hits{0};
    LocalServer server([&](const httplib::Request&, httplib::Response& res) {
        if (hits.fetch_add(1) < 2) {
            res.status = 500;
            return;
        }
        res.set_content(R"({"choices":[{"message":{"content":"recovered"}}]})",
                        "application/json");
    });
    HttpBackend backend(server.config());
    CHECK(backend.generate(basic_request()).raw_text == "recovered");
    CHECK(hits.load() == 3);
}

TEST_CASE("http backend maps auth and malformed responses to distinct errors") {
    LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
        if (req.get_header_value("Authorization") != "Bearer sesame") {
            res.status = 401;
            return;
        }
        res.set_content("not json at all", "text/plain");
    });

    auto cfg = server.config();
    HttpBackend no_auth(cfg);
    try {
        no_auth.generate(basic_request());
        FAIL("expected auth failure");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::auth_failure);
    }

    cfg.auth_token = "sesame";
    HttpBackend with_auth(cfg);
    try {
        with_auth.generate(basic_request());
        FAIL("expected malformed response");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::malformed_response);
    }
}

TEST_CASE("http backend reports transport exhaustion for unreachable endpoints") {
    // bind-then-close a raw socket to get a port nothing listens on
    int dead_port = 0;
    {
        int sock = ::socket(AF_INET, SOCK_STREAM, 0);
        REQUIRE(sock >= 0);
        sockaddr_in addr{};
        addr.sin_family = AF_INET;
        addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
        addr.sin_port = 0;
        REQUIRE(::bind(sock, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) == 0);
        socklen_t len = sizeof(addr);
        REQUIRE(::getsockname(sock, reinterpret_cast<sockaddr*>(&addr), &len) == 0);
        dead_port = ntohs(addr.sin_port);
        ::close(sock);
    }
    HttpBackendConfig cfg;
    cfg.endpoint = "http://127.0.0.1:" + std::to_string(dead_port);
    cfg.retry.attempts = 2;
    cfg.retry.initial_backoff = std::chrono::milliseconds(1);
    HttpBackend backend(cfg);
    try {
        backend.generate(basic_request());
        FAIL("expected transport exhaustion");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::transport_exhausted);
        CHECK(std::string(e.what()).find("2 attempts") != std::string::npos);
    }
}
