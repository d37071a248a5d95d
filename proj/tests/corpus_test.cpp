#include <algorithm>
#include <sstream>

#include "cotsel/corpus.hpp"
#include "cotsel/errors.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support/testutil.hpp"

using namespace cotsel;
using cotsel::testing::FnBackend;
using cotsel::testing::TempDir;
using nlohmann::json;

namespace {

std::string mc_record(const std::string& id, const std::string& split,
                      const std::string& gold = "red") {
    json j{{"id", id},
           {"question", "What color is the cube?"},
           {"options", {"red", "blue", "green"}},
           {"gold_answer", gold},
           {"rationale", "The cube is painted red."},
           {"split", split}};
    return j.dump() + "\n";
}

} // namespace

TEST_CASE("load_corpus accepts valid multiple-choice records in order") {
    TempDir dir;
    auto path = dir.file("three.jsonl");
    cotsel::testing::write_file(path,
                                mc_record("q1", "train") + mc_record("q2", "train") +
                                    mc_record("q3", "test"));
    Corpus corpus = load_corpus(path, TaskKind::multiple_choice);
    CHECK(corpus.task_kind == TaskKind::multiple_choice);
    CHECK(corpus.samples.size() == 3);
    CHECK(corpus.samples[0].id == "q1");
    CHECK(corpus.samples[2].id == "q3");
    CHECK(corpus.name == "three");
}

TEST_CASE("load_corpus rejects a gold answer that matches no option") {
    TempDir dir;
    auto path = dir.file("bad.jsonl");
    cotsel::testing::write_file(path, mc_record("q1", "train") +
                                          mc_record("q7", "train", "purple"));
    try {
        load_corpus(path, TaskKind::multiple_choice);
        FAIL("expected invariant violation");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::invariant_violation);
        CHECK(std::string(e.what()).find("q7") != std::string::npos);
    }
}

TEST_CASE("load_corpus rejects an empty file") {
    TempDir dir;
    auto path = dir.file("empty.jsonl");
    cotsel::testing::write_file(path, "");
    try {
        load_corpus(path, TaskKind::multiple_choice);
        FAIL("expected empty corpus error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::empty_corpus);
    }
}

TEST_CASE("load_corpus reports parse errors with line numbers") {
    TempDir dir;
    auto path = dir.file("broken.jsonl");
    cotsel::testing::write_file(path, mc_record("q1", "train") + "{not json\n");
    try {
        load_corpus(path, TaskKind::multiple_choice);
        FAIL("expected parse error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::parse_error);
        CHECK(std::string(e.what()).find("line 2") != std::string::npos);
    }
}

TEST_CASE("load_corpus rejects duplicate ids, unknown keys, and kind mismatches") {
    TempDir dir;
    auto path = dir.file("cases.jsonl");

    cotsel::testing::write_file(path, mc_record("q1", "train") + mc_record("q1", "test"));
    CHECK_THROWS_WITH_AS(load_corpus(path, TaskKind::multiple_choice),
                         doctest::Contains("duplicate sample id 'q1'"), Error);

    cotsel::testing::write_file(
        path, R"({"id":"q1","question":"?","gold_answer":"x","split":"train","bogus":1})"
              "\n");
    CHECK_THROWS_WITH_AS(load_corpus(path, TaskKind::open_ended),
                         doctest::Contains("unknown field 'bogus'"), Error);

    // options present in an open-ended corpus
    cotsel::testing::write_file(path, mc_record("q1", "train"));
    try {
        load_corpus(path, TaskKind::open_ended);
        FAIL("expected kind mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kind_mismatch);
    }

    // no options in a multiple-choice corpus
    cotsel::testing::write_file(
        path, R"({"id":"q2","question":"?","gold_answer":"x","split":"train"})" "\n");
    try {
        load_corpus(path, TaskKind::multiple_choice);
        FAIL("expected kind mismatch");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::kind_mismatch);
    }
}

TEST_CASE("gold answers match options up to canonicalization") {
    TempDir dir;
    auto path = dir.file("canon.jsonl");
    cotsel::testing::write_file(path, mc_record("q1", "train", "  RED. "));
    Corpus corpus = load_corpus(path, TaskKind::multiple_choice);
    CHECK(gold_option_index(corpus.samples[0]) == 0);
}

TEST_CASE("split_view filters while preserving order") {
    Corpus corpus;
    corpus.task_kind = TaskKind::open_ended;
    for (int i = 0; i < 10; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        s.question = "q";
        s.gold_answer = "a";
        s.split = i < 6 ? Split::train : Split::test;
        corpus.samples.push_back(s);
    }

    Corpus train = split_view(corpus, Split::train);
    Corpus test = split_view(corpus, Split::test);
    CHECK(train.samples.size() == 6);
    CHECK(test.samples.size() == 4);
    CHECK(train.samples.front().id == "s0");
    CHECK(test.samples.front().id == "s6");

    // partition property
    CHECK(train.samples.size() + test.samples.size() == corpus.samples.size());

    // idempotence
    Corpus twice = split_view(train, Split::train);
    CHECK(twice.samples.size() == train.samples.size());

    // all-train corpus has an empty test view
    Corpus all_train = corpus;
    for (auto& s : all_train.samples) s.split = Split::train;
    CHECK(split_view(all_train, Split::test).samples.empty());
}

TEST_CASE("serialize/load round-trips to the canonical form") {
    // Input with shuffled keys and extra whitespace; canonical form fixes
    // key order and drops nothing that was present.
    std::string messy =
        R"({"split": "train", "question": "Q1?", "id": "a", "gold_answer": "x", "caption": "cap"})"
        "\n"
        "\n"
        R"({"gold_answer":"y","id":"b","question":"Q2?","split":"test","subdomain":["NAT"]})"
        "\n";
    Corpus corpus = parse_corpus(messy, TaskKind::open_ended, "round");
    std::string serialized = serialize_corpus(corpus);

    // canonicalize: parse each non-blank line and re-dump (keys sort)
    std::string canonical;
    std::istringstream in(messy);
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        canonical += json::parse(line).dump() + "\n";
    }
    CHECK(serialized == canonical);

    // loading the serialized form is a fixed point
    Corpus again = parse_corpus(serialized, TaskKind::open_ended, "round");
    CHECK(serialize_corpus(again) == serialized);
}

TEST_CASE("attach_captions fills only missing captions") {
    Corpus corpus;
    corpus.task_kind = TaskKind::open_ended;
    for (int i = 0; i < 3; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        s.question = "what is shown?";
        s.gold_answer = "cube";
        s.image_ref = "img://" + s.id;
        corpus.samples.push_back(s);
    }
    corpus.samples[1].caption = "already here";

    FnBackend captioner([](const GenerationRequest&) { return "a red cube"; });
    auto [captioned, report] = attach_captions(corpus, captioner, {"capmodel"});

    CHECK(report.already_captioned == 1);
    CHECK(report.newly_captioned == 2);
    CHECK(report.failures.empty());
    CHECK(captioner.calls() == 2);
    CHECK(*captioned.samples[0].caption == "a red cube");
    CHECK(*captioned.samples[1].caption == "already here");

    // never mutates anything but captions
    for (size_t i = 0; i < corpus.samples.size(); ++i) {
        CHECK(captioned.samples[i].question == corpus.samples[i].question);
        CHECK(captioned.samples[i].options == corpus.samples[i].options);
        CHECK(captioned.samples[i].gold_answer == corpus.samples[i].gold_answer);
        CHECK(captioned.samples[i].rationale == corpus.samples[i].rationale);
    }

    // idempotence: second pass issues no calls
    auto [again, report2] = attach_captions(captioned, captioner, {"capmodel"});
    CHECK(captioner.calls() == 2);
    CHECK(report2.newly_captioned == 0);
    CHECK(report2.already_captioned == 3);
}

TEST_CASE("attach_captions reports per-sample failures and continues") {
    Corpus corpus;
    corpus.task_kind = TaskKind::open_ended;
    for (int i = 0; i < 5; ++i) {
        Sample s;
        s.id = "s" + std::to_string(i);
        s.question = "?";
        s.gold_answer = "x";
        s.image_ref = "img://" + s.id;
        corpus.samples.push_back(s);
    }

    FnBackend captioner([](const GenerationRequest& req) -> std::string {
        if (req.request_tag == "caption:s2#1")
            throw Error(ErrorCode::transport_exhausted, "gateway down");
        return "a caption";
    });
    auto [captioned, report] = attach_captions(corpus, captioner, {"capmodel"});
    CHECK(report.newly_captioned == 4);
    REQUIRE(report.failures.size() == 1);
    CHECK(report.failures[0].first == "s2");
    CHECK(!captioned.samples[2].caption.has_value());
    CHECK(captioned.samples[3].has_caption());
}
