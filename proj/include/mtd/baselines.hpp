#pragma once

#include <span>
#include <vector>

#include "mtd/data.hpp"

namespace mtd {

// Frequency and neighborhood rankers used as sanity references. All three
// train in a single corpus pass, are deterministic, and are read-only after
// construction. Each produces a full score vector so ranking and metrics go
// through the same path as the model.

// Global popularity; the prefix is ignored.
struct PopModel {
    std::vector<long> freq;

    static PopModel fit(const SessionCorpus& corpus);
    std::vector<double> scores(std::span<const int> prefix) const;
};

// Within-session popularity with global counts as tie-break, so unseen slots
// backfill by global popularity.
struct SPopModel {
    std::vector<long> freq;
    long max_freq = 0;

    static SPopModel fit(const SessionCorpus& corpus);
    std::vector<double> scores(std::span<const int> prefix) const;
};

// Cosine similarity between binary item-by-session incidence vectors,
// scored against the last prefix item. `neighbors` truncates scoring to the
// k most similar candidates (0 = no cutoff). Falls back to global popularity
// when the last item never occurs in the training sessions.
struct ItemKnnModel {
    std::vector<std::vector<int>> item_sessions;  // sorted session indices per item
    PopModel pop;

    static ItemKnnModel fit(const SessionCorpus& corpus);
    std::vector<double> scores(std::span<const int> prefix, int neighbors = 0) const;
};

}  // namespace mtd
