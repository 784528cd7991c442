#include <doctest.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <thread>

#include "perturbex/cache.hpp"
#include "perturbex/util.hpp"
#include "testutil.hpp"

using namespace perturbex;
namespace fs = std::filesystem;

namespace {

std::vector<std::uint8_t> bytes_of(const std::string& s) {
    return std::vector<std::uint8_t>(s.begin(), s.end());
}

// get_or_compute takes an already-derived key (callers pass key_of(material))
// and stores the entry under that name verbatim.
fs::path entry_path(const ContentCache& cache, const std::string& key) {
    return fs::path(cache.dir()) / (key + ".bin");
}

}  // namespace

TEST_SUITE("cache") {

TEST_CASE("keys are sha-256 of the key material") {
    // sha256("abc"), a published test vector
    CHECK(ContentCache::key_of("abc") ==
          "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(ContentCache::key_of("abc") != ContentCache::key_of("abd"));
    CHECK(ContentCache::key_of("").size() == 64);
}

TEST_CASE("miss computes once, hit skips the producer") {
    testutil::TempDir tmp;
    ContentCache cache((tmp / "cache").string());
    int calls = 0;
    auto produce = [&] {
        ++calls;
        return bytes_of("payload-one");
    };
    auto got = cache.get_or_compute("key-a", produce);
    CHECK(got == bytes_of("payload-one"));
    CHECK(calls == 1);
    CHECK(cache.misses() == 1);
    CHECK(cache.hits() == 0);

    got = cache.get_or_compute("key-a", produce);
    CHECK(got == bytes_of("payload-one"));
    CHECK(calls == 1);
    CHECK(cache.hits() == 1);

    // a second cache over the same directory sees the entry
    ContentCache warm((tmp / "cache").string());
    CHECK(warm.get_or_compute("key-a", produce) == bytes_of("payload-one"));
    CHECK(calls == 1);
    CHECK(warm.hits() == 1);
}

TEST_CASE("entry format is a checksummed header plus payload") {
    testutil::TempDir tmp;
    ContentCache cache((tmp / "cache").string());
    cache.get_or_compute("key-b", [] { return bytes_of("hello"); });

    std::string raw = testutil::read_text(entry_path(cache, "key-b"));
    REQUIRE(raw.size() == 4 + 64 + 1 + 5);
    CHECK(raw.substr(0, 4) == "PXC1");
    CHECK(raw[68] == '\n');
    CHECK(raw.substr(4, 64) == sha256_hex(bytes_of("hello")));
    CHECK(raw.substr(69) == "hello");
}

TEST_CASE("corrupt entries are recomputed and repaired") {
    testutil::TempDir tmp;
    ContentCache cache((tmp / "cache").string());
    cache.get_or_compute("key-c", [] { return bytes_of("original"); });

    auto corrupt_with = [&](const std::string& content) {
        std::ofstream out(entry_path(cache, "key-c"),
                          std::ios::binary | std::ios::trunc);
        out << content;
    };

    SUBCASE("flipped payload byte") {
        std::string raw = testutil::read_text(entry_path(cache, "key-c"));
        raw[raw.size() - 1] ^= 0x40;
        corrupt_with(raw);
    }
    SUBCASE("truncated file") { corrupt_with("PXC1"); }
    SUBCASE("bad magic") { corrupt_with("WXYZ-not-a-cache-entry"); }

    int calls = 0;
    auto got = cache.get_or_compute("key-c", [&] {
        ++calls;
        return bytes_of("recomputed");
    });
    CHECK(got == bytes_of("recomputed"));
    CHECK(calls == 1);
    CHECK(cache.corruptions() == 1);

    // the repaired entry now hits
    got = cache.get_or_compute("key-c", [&] {
        ++calls;
        return bytes_of("never");
    });
    CHECK(got == bytes_of("recomputed"));
    CHECK(calls == 1);
}

TEST_CASE("32 concurrent callers agree on the value") {
    testutil::TempDir tmp;
    ContentCache cache((tmp / "cache").string());
    std::atomic<int> produced{0};
    std::vector<std::thread> threads;
    std::vector<std::vector<std::uint8_t>> results(32);
    for (int i = 0; i < 32; ++i) {
        threads.emplace_back([&, i] {
            results[i] = cache.get_or_compute("shared-key", [&] {
                ++produced;
                return bytes_of("the-one-value");
            });
        });
    }
    for (auto& t : threads) t.join();
    for (const auto& r : results) CHECK(r == bytes_of("the-one-value"));
    CHECK(produced.load() >= 1);  // racers may compute; all land on a valid entry
    CHECK(cache.hits() + cache.misses() == 32);

    // the file on disk is a well-formed entry
    std::string raw = testutil::read_text(entry_path(cache, "shared-key"));
    CHECK(raw.substr(0, 4) == "PXC1");
    CHECK(raw.substr(69) == "the-one-value");
}

TEST_CASE("distinct keys do not collide") {
    testutil::TempDir tmp;
    ContentCache cache((tmp / "cache").string());
    auto a = cache.get_or_compute("ka", [] { return bytes_of("va"); });
    auto b = cache.get_or_compute("kb", [] { return bytes_of("vb"); });
    CHECK(a == bytes_of("va"));
    CHECK(b == bytes_of("vb"));
    CHECK(cache.get_or_compute("ka", [] { return bytes_of("no"); }) == bytes_of("va"));
}

TEST_CASE("unwritable cache directory is an io error") {
    CHECK_THROWS_AS(ContentCache("/proc/definitely/not/writable"), IoError);
}

}  // TEST_SUITE("cache")
