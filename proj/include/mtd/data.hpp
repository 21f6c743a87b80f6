#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

namespace mtd {

using Token = std::int64_t;

// Bijection between external item tokens and contiguous internal IDs.
struct Vocab {
    std::unordered_map<Token, int> to_internal;
    std::vector<Token> to_external;

    int size() const { return static_cast<int>(to_external.size()); }
    int encode(Token t) const;           // -1 if unknown
    Token decode(int id) const { return to_external[static_cast<std::size_t>(id)]; }
    void add(Token t);
};

// Sessions as raw external token sequences, straight off a corpus file.
using RawSessions = std::vector<std::vector<Token>>;

// Filtered, remapped training corpus. Every session has length >= 2 and
// every item ID is < vocab.size().
struct SessionCorpus {
    std::vector<std::vector<int>> sessions;
    Vocab vocab;

    int item_count() const { return vocab.size(); }
};

// One supervised pair: a nonempty prefix and the item that followed it.
struct Instance {
    std::vector<int> prefix;
    int target = 0;
};

// Reads a corpus file: one session per line, whitespace-separated integer
// tokens in chronological order. Blank lines are skipped. Parse failures
// report the 1-based line number.
RawSessions load_corpus(const std::string& path);

// Drops items with corpus frequency < min_freq, then sessions shorter than
// min_len; the two filters repeat until stable (dropping a session can push
// an item back under the frequency threshold). Survivors are remapped to
// 0..M-1 in first-appearance order, which makes the whole operation
// idempotent. Throws DataError if nothing survives.
SessionCorpus build_vocab(const RawSessions& raw, int min_freq = 5, int min_len = 2);

// Prefix expansion: a session [v1..vI] yields I-1 instances
// ([v1..vi], v_{i+1}) in order.
std::vector<Instance> make_instances(const SessionCorpus& corpus);

// Maps held-out sessions through a training vocabulary: unknown items are
// removed, sessions shrinking below 2 items are dropped, the rest are
// prefix-expanded.
std::vector<Instance> apply_vocab(const RawSessions& raw, const Vocab& vocab);

// Total instance count a corpus will expand to: sum of (len - 1).
std::size_t instance_count(const SessionCorpus& corpus);

// File output, all atomic (write to temp, rename into place).
void save_sessions(const std::string& path, const std::vector<std::vector<int>>& sessions);
void save_vocab(const std::string& path, const Vocab& vocab);           // "external<TAB>internal" lines
Vocab load_vocab(const std::string& path);

// Shared atomic text-file writer.
void write_file_atomic(const std::string& path, const std::string& content);

}  // namespace mtd
