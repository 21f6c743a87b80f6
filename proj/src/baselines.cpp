#include "mtd/baselines.hpp"

#include <algorithm>
#include <cmath>

#include "mtd/error.hpp"

namespace mtd {

PopModel PopModel::fit(const SessionCorpus& corpus) {
    PopModel m;
    m.freq.assign(static_cast<std::size_t>(corpus.item_count()), 0);
    for (const auto& s : corpus.sessions) {
        for (int id : s) ++m.freq[static_cast<std::size_t>(id)];
    }
    return m;
}

std::vector<double> PopModel::scores(std::span<const int>) const {
    std::vector<double> z(freq.size());
    for (std::size_t i = 0; i < freq.size(); ++i) z[i] = static_cast<double>(freq[i]);
    return z;
}

SPopModel SPopModel::fit(const SessionCorpus& corpus) {
    SPopModel m;
    m.freq = PopModel::fit(corpus).freq;
    for (long f : m.freq) m.max_freq = std::max(m.max_freq, f);
    return m;
}

std::vector<double> SPopModel::scores(std::span<const int> prefix) const {
    if (prefix.empty()) throw DataError("spop: empty prefix");
    // Lexicographic (session count, global count) packed into one exact
    // double: counts are small integers, so scale * session_count dominates.
    const double scale = static_cast<double>(max_freq + 1);
    std::vector<double> z(freq.size());
    std::vector<long> session_count(freq.size(), 0);
    for (int id : prefix) {
        if (id >= 0 && id < static_cast<int>(freq.size())) {
            ++session_count[static_cast<std::size_t>(id)];
        }
    }
    for (std::size_t i = 0; i < freq.size(); ++i) {
        z[i] = static_cast<double>(session_count[i]) * scale + static_cast<double>(freq[i]);
    }
    return z;
}

ItemKnnModel ItemKnnModel::fit(const SessionCorpus& corpus) {
    ItemKnnModel m;
    m.pop = PopModel::fit(corpus);
    m.item_sessions.assign(static_cast<std::size_t>(corpus.item_count()), {});
    for (std::size_t sess = 0; sess < corpus.sessions.size(); ++sess) {
        for (int id : corpus.sessions[sess]) {
            auto& list = m.item_sessions[static_cast<std::size_t>(id)];
            if (list.empty() || list.back() != static_cast<int>(sess)) {
                list.push_back(static_cast<int>(sess));
            }
        }
    }
    return m;
}

std::vector<double> ItemKnnModel::scores(std::span<const int> prefix, int neighbors) const {
    if (prefix.empty()) throw DataError("itemknn: empty prefix");
    const int last = prefix.back();
    const auto& anchor = item_sessions[static_cast<std::size_t>(last)];
    if (anchor.empty()) return pop.scores(prefix);

    const double anchor_norm = std::sqrt(static_cast<double>(anchor.size()));
    std::vector<double> z(item_sessions.size(), 0.0);
    for (std::size_t c = 0; c < item_sessions.size(); ++c) {
        const auto& cand = item_sessions[c];
        if (cand.empty()) continue;
        std::size_t shared = 0;
        std::size_t i = 0, j = 0;
        while (i < anchor.size() && j < cand.size()) {
            if (anchor[i] == cand[j]) {
                ++shared;
                ++i;
                ++j;
            } else if (anchor[i] < cand[j]) {
                ++i;
            } else {
                ++j;
            }
        }
        if (shared > 0) {
            z[c] = static_cast<double>(shared) /
                   (anchor_norm * std::sqrt(static_cast<double>(cand.size())));
        }
    }

    if (neighbors > 0 && neighbors < static_cast<int>(z.size())) {
        // Keep the k most similar candidates, zero the rest.
        std::vector<int> ids(z.size());
        for (std::size_t i = 0; i < ids.size(); ++i) ids[i] = static_cast<int>(i);
        std::nth_element(ids.begin(), ids.begin() + neighbors, ids.end(), [&z](int a, int b) {
            const double za = z[static_cast<std::size_t>(a)];
            const double zb = z[static_cast<std::size_t>(b)];
            return za > zb || (za == zb && a < b);
        });
        std::vector<double> truncated(z.size(), 0.0);
        for (int i = 0; i < neighbors; ++i) {
            const int id = ids[static_cast<std::size_t>(i)];
            truncated[static_cast<std::size_t>(id)] = z[static_cast<std::size_t>(id)];
        }
        z = std::move(truncated);
    }
    return z;
}

}  // namespace mtd
