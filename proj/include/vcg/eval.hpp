#pragma once

#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcg/embedding.hpp"
#include "vcg/index.hpp"
#include "vcg/profiler.hpp"
#include "vcg/rankers.hpp"
#include "vcg/simulator.hpp"
#include "vcg/stats.hpp"

namespace vcg {

struct TimeSplit {
    ImpressionLog train;
    ImpressionLog test;
    int64_t boundary_ts = 0;  // test = impressions with ts >= boundary_ts
};

// Last holdout_days of the log become the test partition. Errors when the
// holdout would leave the training partition empty.
TimeSplit time_split(const ImpressionLog& log, int holdout_days);

struct LabeledItem {
    uint64_t video_id = 0;
    int label = 0;           // watch fraction >= 0.5
    int position = 0;        // 1-based, contiguous in vector order
    double propensity = 1.0; // examination probability in (0, 1]
};

struct LabeledFeed {
    uint64_t feed_id = 0;
    std::vector<LabeledItem> items;

    void validate() const;
};

// DCG with gain label * min(1/propensity, cap) when use_ips (plain label
// otherwise), normalized by the ideal ordering of the same gain multiset.
// Gains are scaled by the maximum gain first, so uniform propensities cancel
// exactly. Requires at least one positive and one negative item.
double ndcg(const LabeledFeed& feed, bool use_ips, double propensity_cap = 10.0);

// Returns the feed reordered by (score desc, video id asc), positions
// renumbered from 1; labels and propensities travel with their items.
LabeledFeed reorder_by_score(const LabeledFeed& feed, const std::vector<double>& scores);

struct ThresholdMetrics {
    double accuracy = 0.0;
    double precision = 0.0;  // 0 when nothing is predicted positive
    double recall = 0.0;     // 0 when there are no positives
};

ThresholdMetrics threshold_metrics(const std::vector<double>& scores,
                                   const std::vector<int>& labels, double threshold);

// Mann-Whitney statistic with ties counted 0.5 (average-rank form). Errors
// unless both classes are present.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

struct BinaryMetrics {
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double auc = 0.0;
};

BinaryMetrics binary_metrics(const std::vector<double>& scores, const std::vector<int>& labels,
                             double threshold);

// Half-open impression-time filter [begin, end).
struct TimeWindow {
    int64_t begin = std::numeric_limits<int64_t>::min();
    int64_t end = std::numeric_limits<int64_t>::max();
};

// Examined-impression count per video.
std::unordered_map<uint64_t, uint64_t> popularity_counts(const ImpressionLog& log,
                                                         const TimeWindow& window = {});

// Count per unordered pair of distinct videos examined within the same feed.
std::map<std::pair<uint64_t, uint64_t>, uint64_t> cooccurrence_counts(
    const ImpressionLog& log, const TimeWindow& window = {});

// dot(mean of user content embeddings, mean of video product content embeddings).
double visual_coherence(const std::vector<Embedding>& user_content_embs,
                        const std::vector<Embedding>& video_product_embs);

// Least-squares fit of gamma in rate(p) = p^(-gamma) from position-wise
// examination rates (positions >= 2 with nonzero rates).
double fit_gamma(const ImpressionLog& log);

struct EvalReport {
    std::string policy;
    std::optional<double> ndcg;      // absent when no feed is eligible
    std::optional<double> ndcg_ips;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    std::optional<double> auc;       // absent when the test labels are one-class
    std::optional<double> skew_popularity;  // exposure counts over the whole catalog
    std::optional<double> skew_watch_time;  // absent without simulated watch data
    std::optional<double> skew_duration;
    double mean_recommended_duration_ms = 0.0;
    double catalog_mean_duration_ms = 0.0;
    double coherence_mean = 0.0;
    double coherence_std = 0.0;
    size_t n_test_feeds = 0;
    size_t n_eligible_feeds = 0;
    size_t n_test_impressions = 0;
    size_t n_users = 0;
    size_t n_recommended = 0;
    size_t n_coherence_users = 0;
    int64_t split_ts = 0;
};

struct PolicyEvalInput {
    std::string policy_name;
    // Per-user recommendation lists, at least coherence_k items when available.
    std::vector<RankedFeed> recommendations;
    // Simulated watch times aligned with recommendations (may be empty).
    std::vector<std::vector<uint32_t>> rec_watch_ms;
    // Test feeds in logged order plus the policy's score for every item.
    std::vector<LabeledFeed> test_feeds;
    std::vector<std::vector<double>> test_scores;
    double propensity_cap = 10.0;
    double threshold = 0.5;
    size_t exposure_k = 10;    // prefix used for exposure and duration metrics
    size_t coherence_k = 100;  // prefix used for coherence
    int64_t split_ts = 0;
};

// Aggregates ranking, point-wise, exposure and coherence metrics for one
// policy. Feed-wise metrics cover only feeds with both label classes.
EvalReport evaluate_policy(const PolicyEvalInput& input, const VideoIndex& catalog,
                           const EmbeddingProvider& product_content,
                           const std::vector<UserHistory>& histories);

nlohmann::json eval_report_to_json(const EvalReport& report);
EvalReport eval_report_from_json(const nlohmann::json& j);

// Aligned metrics-by-policy text table for terminal display.
std::string eval_comparison_table(const std::vector<EvalReport>& reports);

}  // namespace vcg
