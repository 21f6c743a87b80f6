#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <unistd.h>

#include "mtd/data.hpp"
#include "mtd/error.hpp"
#include "mtd/rng.hpp"

using namespace mtd;

namespace {

std::string temp_path(const char* stem) {
    static int counter = 0;
    auto dir = std::filesystem::temp_directory_path();
    return (dir / (std::string("mtd_data_") + stem + "_" + std::to_string(++counter) +
                   "_" + std::to_string(::getpid()) + ".txt"))
        .string();
}

std::string write_temp(const char* stem, const std::string& content) {
    std::string path = temp_path(stem);
    std::ofstream out(path);
    out << content;
    return path;
}

}  // namespace

TEST_CASE("load_corpus parses tokens in order") {
    std::string path = write_temp("basic", "5 3 5 9\n");
    RawSessions raw = load_corpus(path);
    REQUIRE(raw.size() == 1);
    CHECK(raw[0] == std::vector<Token>{5, 3, 5, 9});
    std::filesystem::remove(path);
}

TEST_CASE("load_corpus skips blank lines and keeps file order") {
    std::string path = write_temp("blank", "1 2\n\n3 4\n   \n5 6\n");
    RawSessions raw = load_corpus(path);
    REQUIRE(raw.size() == 3);
    CHECK(raw[0] == std::vector<Token>{1, 2});
    CHECK(raw[1] == std::vector<Token>{3, 4});
    CHECK(raw[2] == std::vector<Token>{5, 6});
    std::filesystem::remove(path);
}

TEST_CASE("load_corpus reports the line number on garbage") {
    std::string path = write_temp("garbage", "1 2\n3 oops 4\n");
    CHECK_THROWS_WITH_AS(load_corpus(path), doctest::Contains(":2"), ParseError);
    std::filesystem::remove(path);
}

TEST_CASE("load_corpus on a missing file is an IO error") {
    CHECK_THROWS_AS(load_corpus("/nonexistent/definitely_missing.txt"), IoError);
}

TEST_CASE("build_vocab drops infrequent items") {
    // Item 99 appears 4 times; threshold 5 removes it everywhere.
    RawSessions raw = {{99, 1, 2}, {99, 1, 2}, {99, 1, 2}, {99, 1, 2}, {1, 2}};
    SessionCorpus corpus = build_vocab(raw, 5, 2);
    CHECK(corpus.vocab.encode(99) == -1);
    CHECK(corpus.item_count() == 2);
    for (const auto& s : corpus.sessions) CHECK(s.size() == 2);
}

TEST_CASE("build_vocab drops sessions that shrink below min length") {
    RawSessions raw = {{7, 1}, {7, 1}, {7, 1}, {7, 1}, {7, 1}, {7, 2}};
    // Item 2 appears once -> removed; its session becomes [7], too short.
    SessionCorpus corpus = build_vocab(raw, 5, 2);
    CHECK(corpus.sessions.size() == 5);
    CHECK(corpus.vocab.encode(2) == -1);
}

TEST_CASE("build_vocab remaps in first-appearance order") {
    RawSessions raw = {{7, 8}, {8, 9}};
    SessionCorpus corpus = build_vocab(raw, 1, 2);
    CHECK(corpus.item_count() == 3);
    CHECK(corpus.vocab.encode(7) == 0);
    CHECK(corpus.vocab.encode(8) == 1);
    CHECK(corpus.vocab.encode(9) == 2);
    CHECK(corpus.sessions[0] == std::vector<int>{0, 1});
    CHECK(corpus.sessions[1] == std::vector<int>{1, 2});
}

TEST_CASE("build_vocab fails when nothing survives") {
    RawSessions raw = {{1, 2}, {3, 4}};
    CHECK_THROWS_AS(build_vocab(raw, 5, 2), DataError);
}

TEST_CASE("build_vocab filters to a fixpoint") {
    // Dropping the short session [5, 6] removes an occurrence of 5, pushing
    // it under the threshold; a single pass would leave a stale item.
    RawSessions raw = {{5, 6}, {5, 1, 2}, {1, 2}, {1, 2}};
    SessionCorpus corpus = build_vocab(raw, 2, 2);
    CHECK(corpus.vocab.encode(6) == -1);
    CHECK(corpus.vocab.encode(5) == -1);
    CHECK(corpus.item_count() == 2);
}

TEST_CASE("build_vocab is idempotent on its own output") {
    Rng rng(123);
    for (int trial = 0; trial < 10; ++trial) {
        RawSessions raw;
        const int sessions = 3 + static_cast<int>(rng.index(10));
        for (int s = 0; s < sessions; ++s) {
            std::vector<Token> sess;
            const int len = 2 + static_cast<int>(rng.index(6));
            for (int i = 0; i < len; ++i) {
                sess.push_back(static_cast<Token>(rng.index(8)));
            }
            raw.push_back(sess);
        }
        SessionCorpus first;
        try {
            first = build_vocab(raw, 3, 2);
        } catch (const DataError&) {
            continue;  // everything filtered; nothing to re-run
        }
        RawSessions as_tokens;
        for (const auto& s : first.sessions) {
            as_tokens.emplace_back(s.begin(), s.end());
        }
        SessionCorpus second = build_vocab(as_tokens, 3, 2);
        CHECK(second.sessions == first.sessions);
        CHECK(second.item_count() == first.item_count());
        for (int id = 0; id < second.item_count(); ++id) {
            CHECK(second.vocab.decode(id) == id);  // identity remap
        }
    }
}

TEST_CASE("vocabulary round-trips every surviving token") {
    RawSessions raw = {{42, 17}, {17, 99}, {99, 42}};
    SessionCorpus corpus = build_vocab(raw, 1, 2);
    for (int id = 0; id < corpus.item_count(); ++id) {
        const Token t = corpus.vocab.decode(id);
        CHECK(corpus.vocab.encode(t) == id);
    }
}

TEST_CASE("make_instances expands prefixes in order") {
    SessionCorpus corpus;
    corpus.vocab.add(10);
    corpus.vocab.add(11);
    corpus.vocab.add(12);
    corpus.sessions = {{0, 1, 2}};
    std::vector<Instance> inst = make_instances(corpus);
    REQUIRE(inst.size() == 2);
    CHECK(inst[0].prefix == std::vector<int>{0});
    CHECK(inst[0].target == 1);
    CHECK(inst[1].prefix == std::vector<int>{0, 1});
    CHECK(inst[1].target == 2);
}

TEST_CASE("instance count is sum of len-1") {
    SessionCorpus corpus;
    for (Token t = 0; t < 4; ++t) corpus.vocab.add(t);
    corpus.sessions = {{0, 1}, {1, 2, 3}, {0, 1, 2, 3}};
    CHECK(instance_count(corpus) == 6);
    CHECK(make_instances(corpus).size() == 6);
}

TEST_CASE("apply_vocab drops unseen items, then short sessions") {
    Vocab vocab;
    vocab.add(100);  // -> 0
    vocab.add(101);  // -> 1

    RawSessions test1 = {{999, 100, 101}};
    std::vector<Instance> inst = apply_vocab(test1, vocab);
    REQUIRE(inst.size() == 1);
    CHECK(inst[0].prefix == std::vector<int>{0});
    CHECK(inst[0].target == 1);

    RawSessions test2 = {{999, 998}};
    CHECK(apply_vocab(test2, vocab).empty());
}

TEST_CASE("apply_vocab equals make_instances when all items are known") {
    RawSessions raw = {{5, 6, 7}, {6, 7}};
    SessionCorpus corpus = build_vocab(raw, 1, 2);
    std::vector<Instance> direct = make_instances(corpus);
    std::vector<Instance> applied = apply_vocab(raw, corpus.vocab);
    REQUIRE(direct.size() == applied.size());
    for (std::size_t i = 0; i < direct.size(); ++i) {
        CHECK(direct[i].prefix == applied[i].prefix);
        CHECK(direct[i].target == applied[i].target);
    }
}

TEST_CASE("vocab dump round-trips") {
    Vocab vocab;
    vocab.add(214536500);
    vocab.add(17);
    vocab.add(-3);
    std::string path = temp_path("vocab");
    save_vocab(path, vocab);
    Vocab loaded = load_vocab(path);
    REQUIRE(loaded.size() == 3);
    for (int id = 0; id < 3; ++id) CHECK(loaded.decode(id) == vocab.decode(id));
    std::filesystem::remove(path);
}
