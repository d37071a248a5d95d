#include <fstream>

#include "cotsel/cache.hpp"
#include "cotsel/errors.hpp"
#include "doctest.h"
#include "support/testutil.hpp"

using namespace cotsel;
using cotsel::testing::TempDir;
using nlohmann::json;

namespace {

CacheKey demo_key() {
    return {CacheKind::sampling, "m1", "corpus1", json{{"k", 5}, {"temperature", 0.5}}};
}

} // namespace

TEST_CASE("append then read returns records in order") {
    TempDir dir;
    CacheStore store(dir.path());
    auto key = demo_key();

    CHECK(store.read_all(key).empty());  // missing store -> empty

    for (int i = 0; i < 15; ++i) store.append(key, json{{"n", i}});
    auto records = store.read_all(key);
    REQUIRE(records.size() == 15);
    for (int i = 0; i < 15; ++i) CHECK(records[static_cast<size_t>(i)].at("n") == i);
}

TEST_CASE("digest is stable and parameter-sensitive") {
    auto key = demo_key();
    CHECK(key.digest() == demo_key().digest());
    CHECK(key.digest().size() == 16);

    auto other = demo_key();
    other.params["k"] = 7;
    CHECK(other.digest() != key.digest());

    auto other_model = demo_key();
    other_model.model_id = "m2";
    CHECK(other_model.digest() != key.digest());
}

TEST_CASE("torn tail writes are invisible to readers") {
    TempDir dir;
    CacheStore store(dir.path());
    auto key = demo_key();
    store.append(key, json{{"n", 1}});
    store.append(key, json{{"n", 2}});

    // simulate a crash mid-append: half a line, no newline
    {
        std::ofstream out(store.record_path(key), std::ios::binary | std::ios::app);
        out << "deadbeef\t{\"n\":3";
    }
    auto records = store.read_all(key);
    REQUIRE(records.size() == 2);
    CHECK(records[1].at("n") == 2);

    // the next append heals the torn tail instead of merging into it
    store.append(key, json{{"n", 4}});
    records = store.read_all(key);
    REQUIRE(records.size() == 3);
    CHECK(records[2].at("n") == 4);
}

TEST_CASE("corrupted complete lines are reported with byte offset") {
    TempDir dir;
    CacheStore store(dir.path());
    auto key = demo_key();
    store.append(key, json{{"n", 1}});

    size_t offset = std::filesystem::file_size(store.record_path(key));
    {
        std::ofstream out(store.record_path(key), std::ios::binary | std::ios::app);
        out << "00000000\t{\"n\":2}\n";  // wrong checksum, complete line
    }
    try {
        store.read_all(key);
        FAIL("expected corruption error");
    } catch (const Error& e) {
        CHECK(e.code() == ErrorCode::corruption);
        CHECK(std::string(e.what()).find(std::to_string(offset)) != std::string::npos);
    }
}

TEST_CASE("compact removes exact-key duplicates keeping the first") {
    TempDir dir;
    CacheStore store(dir.path());
    auto key = demo_key();

    store.append(key, json{{"id", "a"}, {"v", 1}});
    store.append(key, json{{"id", "b"}, {"v", 2}});
    store.append(key, json{{"id", "a"}, {"v", 99}});
    store.append(key, json{{"id", "a"}, {"v", 100}});

    auto key_fn = [](const json& r) { return r.at("id").get<std::string>(); };

    auto stats = store.compact(key, key_fn);
    CHECK(stats.kept == 2);
    CHECK(stats.removed == 2);

    auto records = store.read_all(key);
    REQUIRE(records.size() == 2);
    CHECK(records[0].at("v") == 1);  // first occurrence kept
    CHECK(records[1].at("v") == 2);

    // idempotent
    auto stats2 = store.compact(key, key_fn);
    CHECK(stats2.removed == 0);
    CHECK(stats2.kept == 2);

    // no duplicates -> zero removed
    TempDir dir2;
    CacheStore clean(dir2.path());
    clean.append(key, json{{"id", "x"}});
    CHECK(clean.compact(key, key_fn).removed == 0);
}

TEST_CASE("manifest maps digests back to parameters") {
    TempDir dir;
    CacheStore store(dir.path());
    auto key = demo_key();
    store.append(key, json{{"n", 1}});
    store.append(key, json{{"n", 2}});  // second append must not duplicate manifest

    auto keys = store.known_keys();
    REQUIRE(keys.size() == 1);
    CHECK(keys[0].digest() == key.digest());
    CHECK(keys[0].model_id == "m1");
    CHECK(keys[0].params.at("k") == 5);

    CacheKey eval_key{CacheKind::evaluation, "m1", "corpus1", json{{"votes", 3}}};
    store.append(eval_key, json{{"tag", "t"}});
    CHECK(store.known_keys().size() == 2);
}
