#pragma once

#include <span>
#include <string>
#include <vector>

namespace mtd {

// Ranking outcome for one test instance. Rank is the 1-based position of the
// target under descending score with ties broken by ascending item ID.
struct RankingResult {
    int instance_index = 0;
    int target = 0;
    int rank = 0;
    std::vector<int> topk;
};

RankingResult rank_instance(std::span<const double> scores, int target, int k,
                            int instance_index = 0);

// Hit ratio: fraction of instances whose target rank is <= k.
double precision_at_k(std::span<const RankingResult> results, int k);

// Mean of 1/rank for ranks <= k, zero otherwise.
double mrr_at_k(std::span<const RankingResult> results, int k);

struct MetricReport {
    std::vector<int> ks;
    std::vector<double> precision;
    std::vector<double> mrr;
};

MetricReport compute_metrics(std::span<const RankingResult> results, std::span<const int> ks);

// Human-readable table.
std::string format_metric_table(const MetricReport& report);

// One "pre@K=value" / "mrr@K=value" line per metric, four decimals.
std::string format_metric_lines(const MetricReport& report);

// "instance_id,target,rank" CSV with header.
std::string format_rank_csv(std::span<const RankingResult> results);

}  // namespace mtd
