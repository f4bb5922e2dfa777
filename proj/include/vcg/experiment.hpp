#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcg/config.hpp"
#include "vcg/eval.hpp"
#include "vcg/simulator.hpp"

namespace vcg {

// Feed-id range for impressions simulated on freshly served recommendation
// lists. Logging feeds count from 1 and loop feeds from 1 << 32, so the
// per-feed random streams of the three phases never collide.
inline constexpr uint64_t kServeFeedIdBase = 1ull << 33;

struct PolicyRun {
    Policy policy = Policy::recency;
    std::vector<RankedFeed> feeds;                // one per user, ascending user id
    std::vector<std::vector<uint32_t>> watch_ms;  // simulated watch on those feeds
    EvalReport report;
};

struct ExperimentOutput {
    int64_t split_ts = 0;
    size_t n_train = 0;
    size_t n_test = 0;
    double propensity_gamma = 0.0;  // exponent behind the test propensities
    std::vector<PolicyRun> runs;
    std::string table;
    std::vector<double> conventional_loss_curve;  // empty unless the baseline trained
};

// Full offline protocol: recency logging phase, time split, conventional
// training on the train window, per-policy serving at each user's last
// session time (catalog restricted to videos already uploaded), simulated
// watch on the served lists, and metric evaluation on the examined test
// impressions. Failures carry the policy/stage that raised them.
ExperimentOutput run_experiment(const SimWorld& world, const RunConfig& cfg,
                                const std::vector<Policy>& policies);

// Writes report_<policy>.json, feeds_<policy>.json and metrics.json under
// cfg.out_dir; every file embeds the resolved config and seed. Returns the
// metrics document.
nlohmann::json write_experiment_outputs(const ExperimentOutput& out, const RunConfig& cfg);

std::vector<Policy> parse_policy_list(const std::string& csv);

}  // namespace vcg
