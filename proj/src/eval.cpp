#include "mtd/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <numeric>
#include <sstream>

#include "mtd/error.hpp"

namespace mtd {

RankingResult rank_instance(std::span<const double> scores, int target, int k,
                            int instance_index) {
    const int m = static_cast<int>(scores.size());
    if (k < 1 || k > m) throw DataError("rank_instance: K must be in 1..M");
    if (target < 0 || target >= m) throw DataError("rank_instance: target out of range");

    RankingResult res;
    res.instance_index = instance_index;
    res.target = target;

    // rank = 1 + strictly better + equal-score items with smaller ID.
    const double ts = scores[static_cast<std::size_t>(target)];
    int rank = 1;
    for (int i = 0; i < m; ++i) {
        const double s = scores[static_cast<std::size_t>(i)];
        if (s > ts || (s == ts && i < target)) ++rank;
    }
    res.rank = rank;

    std::vector<int> ids(static_cast<std::size_t>(m));
    std::iota(ids.begin(), ids.end(), 0);
    auto better = [&scores](int a, int b) {
        const double sa = scores[static_cast<std::size_t>(a)];
        const double sb = scores[static_cast<std::size_t>(b)];
        return sa > sb || (sa == sb && a < b);
    };
    std::partial_sort(ids.begin(), ids.begin() + k, ids.end(), better);
    res.topk.assign(ids.begin(), ids.begin() + k);
    return res;
}

double precision_at_k(std::span<const RankingResult> results, int k) {
    if (results.empty()) throw DataError("precision_at_k: empty result set");
    std::size_t hits = 0;
    for (const auto& r : results) {
        if (r.rank <= k) ++hits;
    }
    return static_cast<double>(hits) / static_cast<double>(results.size());
}

double mrr_at_k(std::span<const RankingResult> results, int k) {
    if (results.empty()) throw DataError("mrr_at_k: empty result set");
    double sum = 0.0;
    for (const auto& r : results) {
        if (r.rank <= k) sum += 1.0 / static_cast<double>(r.rank);
    }
    return sum / static_cast<double>(results.size());
}

MetricReport compute_metrics(std::span<const RankingResult> results, std::span<const int> ks) {
    MetricReport report;
    for (int k : ks) {
        report.ks.push_back(k);
        report.precision.push_back(precision_at_k(results, k));
        report.mrr.push_back(mrr_at_k(results, k));
    }
    return report;
}

std::string format_metric_table(const MetricReport& report) {
    std::ostringstream out;
    out << "metric      K       value\n";
    char buf[64];
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "pre   %7d    %8.4f\n", report.ks[i], report.precision[i]);
        out << buf;
    }
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "mrr   %7d    %8.4f\n", report.ks[i], report.mrr[i]);
        out << buf;
    }
    return out.str();
}

std::string format_metric_lines(const MetricReport& report) {
    std::ostringstream out;
    char buf[64];
    for (std::size_t i = 0; i < report.ks.size(); ++i) {
        std::snprintf(buf, sizeof(buf), "pre@%d=%.4f\n", report.ks[i], report.precision[i]);
        out << buf;
        std::snprintf(buf, sizeof(buf), "mrr@%d=%.4f\n", report.ks[i], report.mrr[i]);
        out << buf;
    }
    return out.str();
}

std::string format_rank_csv(std::span<const RankingResult> results) {
    std::ostringstream out;
    out << "instance_id,target,rank\n";
    for (const auto& r : results) {
        out << r.instance_index << ',' << r.target << ',' << r.rank << '\n';
    }
    return out.str();
}

}  // namespace mtd
