#include "mtd/data.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "mtd/error.hpp"

namespace mtd {

int Vocab::encode(Token t) const {
    auto it = to_internal.find(t);
    return it == to_internal.end() ? -1 : it->second;
}

void Vocab::add(Token t) {
    if (to_internal.contains(t)) return;
    to_internal.emplace(t, size());
    to_external.push_back(t);
}

RawSessions load_corpus(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open corpus file: " + path);

    RawSessions sessions;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        std::vector<Token> session;
        const char* p = line.data();
        const char* end = p + line.size();
        while (p < end) {
            while (p < end && (*p == ' ' || *p == '\t' || *p == '\r')) ++p;
            if (p >= end) break;
            Token value = 0;
            auto [next, ec] = std::from_chars(p, end, value);
            if (ec != std::errc{} ||
                (next < end && *next != ' ' && *next != '\t' && *next != '\r')) {
                throw ParseError("corpus parse error at " + path + ":" + std::to_string(line_no) +
                                 ": expected integer token");
            }
            session.push_back(value);
            p = next;
        }
        if (!session.empty()) sessions.push_back(std::move(session));
    }
    if (in.bad()) throw IoError("read failure on corpus file: " + path);
    return sessions;
}

SessionCorpus build_vocab(const RawSessions& raw, int min_freq, int min_len) {
    if (raw.empty()) throw DataError("build_vocab: empty corpus");

    RawSessions kept = raw;
    // Frequency filter then length filter, repeated until stable: dropping a
    // short session can push an item's count back under min_freq.
    bool changed = true;
    while (changed) {
        changed = false;
        std::unordered_map<Token, long> freq;
        for (const auto& s : kept) {
            for (Token t : s) ++freq[t];
        }
        RawSessions next;
        next.reserve(kept.size());
        for (const auto& s : kept) {
            std::vector<Token> filtered;
            filtered.reserve(s.size());
            for (Token t : s) {
                if (freq[t] >= min_freq) filtered.push_back(t);
            }
            if (static_cast<int>(filtered.size()) < min_len) continue;
            if (filtered.size() != s.size()) changed = true;
            next.push_back(std::move(filtered));
        }
        if (next.size() != kept.size()) changed = true;
        kept = std::move(next);
        if (kept.empty()) throw DataError("build_vocab: no sessions survive filtering");
    }

    SessionCorpus corpus;
    for (const auto& s : kept) {
        for (Token t : s) corpus.vocab.add(t);
    }
    corpus.sessions.reserve(kept.size());
    for (const auto& s : kept) {
        std::vector<int> ids;
        ids.reserve(s.size());
        for (Token t : s) ids.push_back(corpus.vocab.encode(t));
        corpus.sessions.push_back(std::move(ids));
    }
    return corpus;
}

std::vector<Instance> make_instances(const SessionCorpus& corpus) {
    std::vector<Instance> out;
    out.reserve(instance_count(corpus));
    for (const auto& s : corpus.sessions) {
        for (std::size_t i = 1; i < s.size(); ++i) {
            Instance inst;
            inst.prefix.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(i));
            inst.target = s[i];
            out.push_back(std::move(inst));
        }
    }
    return out;
}

std::vector<Instance> apply_vocab(const RawSessions& raw, const Vocab& vocab) {
    std::vector<Instance> out;
    for (const auto& s : raw) {
        std::vector<int> ids;
        ids.reserve(s.size());
        for (Token t : s) {
            const int id = vocab.encode(t);
            if (id >= 0) ids.push_back(id);
        }
        if (ids.size() < 2) continue;
        for (std::size_t i = 1; i < ids.size(); ++i) {
            Instance inst;
            inst.prefix.assign(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(i));
            inst.target = ids[i];
            out.push_back(std::move(inst));
        }
    }
    return out;
}

std::size_t instance_count(const SessionCorpus& corpus) {
    std::size_t n = 0;
    for (const auto& s : corpus.sessions) n += s.size() - 1;
    return n;
}

void write_file_atomic(const std::string& path, const std::string& content) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open for writing: " + tmp);
        out.write(content.data(), static_cast<std::streamsize>(content.size()));
        if (!out) throw IoError("write failure: " + tmp);
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot rename " + tmp + " to " + path + ": " + ec.message());
    }
}

void save_sessions(const std::string& path, const std::vector<std::vector<int>>& sessions) {
    std::ostringstream out;
    for (const auto& s : sessions) {
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (i) out << ' ';
            out << s[i];
        }
        out << '\n';
    }
    write_file_atomic(path, out.str());
}

void save_vocab(const std::string& path, const Vocab& vocab) {
    std::ostringstream out;
    for (int id = 0; id < vocab.size(); ++id) {
        out << vocab.decode(id) << '\t' << id << '\n';
    }
    write_file_atomic(path, out.str());
}

Vocab load_vocab(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open vocabulary file: " + path);
    Vocab vocab;
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        std::istringstream ls(line);
        Token external = 0;
        int internal = -1;
        if (!(ls >> external >> internal)) {
            throw ParseError("vocabulary parse error at " + path + ":" + std::to_string(line_no));
        }
        if (internal != vocab.size()) {
            throw ParseError("vocabulary IDs must be contiguous from 0; got " +
                             std::to_string(internal) + " at " + path + ":" + std::to_string(line_no));
        }
        vocab.add(external);
    }
    if (vocab.size() == 0) throw DataError("vocabulary file is empty: " + path);
    return vocab;
}

}  // namespace mtd
