#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcg/embedding.hpp"
#include "vcg/index.hpp"
#include "vcg/profiler.hpp"
#include "vcg/rankers.hpp"

namespace vcg {

// All world timestamps live in [t0, t0 + window); t0 is fixed so that worlds
// are comparable across configs.
inline constexpr int64_t kWorldEpochMs = 1'700'000'000'000;
inline constexpr int64_t kDayMs = 86'400'000;

struct WorldConfig {
    uint64_t seed = 1;
    int n_users = 2000;
    int n_videos = 10000;
    int n_products = 1000;
    int d = 64;
    int taste_clusters = 8;
    uint32_t duration_min_ms = 10'000;
    uint32_t duration_max_ms = 120'000;
    double attention_budget_mean_ms = 45'000.0;
    double attention_budget_spread_ms = 15'000.0;
    double gamma = 0.8;        // position-decay exponent of examination
    double noise_sigma = 0.1;  // every gaussian perturbation in the world
    // Extra noise on the fixed user embeddings handed to the trainable
    // baseline, modeling embeddings reused from a different task.
    double catalog_noise_sigma = 0.05;
    int frames_per_video = 8;
    int min_products_per_video = 1;
    int max_products_per_video = 5;
    int hashtags_per_cluster = 12;
    int min_hashtags_per_video = 1;
    int max_hashtags_per_video = 3;
    int min_history_events = 5;
    int max_history_events = 30;
    int window_days = 30;
    int sessions_per_user = 3;
    double explore_prob = 0.1;  // history events drawn outside the user's cluster

    void validate() const;
};

WorldConfig world_config_from_json(const nlohmann::json& j);
nlohmann::json world_config_to_json(const WorldConfig& cfg);

// Deterministic function of WorldConfig: cluster-structured latents for
// products, videos and users, plus the derived embedding tables the policies
// consume. Entity ids are 1-based per kind.
struct SimWorld {
    WorldConfig cfg;
    int64_t t0 = 0;
    int64_t t_end = 0;

    std::vector<int> product_cluster;  // by product_id - 1
    std::vector<int> video_cluster;    // by video_id - 1
    std::vector<int> user_cluster;     // by user_id - 1
    std::vector<double> attention_budget_ms;  // by user_id - 1
    std::vector<UserHistory> histories;       // by user_id - 1

    TableProvider product_latents;  // retrieval space, dim d
    TableProvider product_content;  // content-attribute space, dim taste_clusters
    TableProvider hashtag_latents;  // retrieval space, keyed by hashtag_key()
    TableProvider user_latents;     // true tastes driving the watch model
    TableProvider user_catalog;     // noisy variants for the trainable baseline
    Embedding fallback;             // cold-start profile from popular products
    VideoIndex index;

    explicit SimWorld(const WorldConfig& c);

    const Embedding& user_latent(uint64_t user_id) const { return user_latents.get(user_id); }
    double budget_of(uint64_t user_id) const;
    const UserHistory& history_of(uint64_t user_id) const;
};

SimWorld generate_world(const WorldConfig& cfg);

// Directory snapshot: world.json plus the embedding, index and history files.
void save_world(const SimWorld& world, const std::string& dir);
SimWorld load_world(const std::string& dir);

struct Impression {
    uint64_t feed_id = 0;
    uint64_t user_id = 0;
    uint64_t video_id = 0;
    int position = 0;  // 1-based
    bool examined = false;
    uint32_t watch_ms = 0;
    uint32_t duration_ms = 0;
    int64_t ts = 0;
};

using ImpressionLog = std::vector<Impression>;

std::vector<std::string> impressions_to_jsonl(const ImpressionLog& log);
ImpressionLog impressions_from_jsonl(const std::vector<std::string>& lines);

// True examination probability at a 1-based position.
double examination_probability(int position, double gamma);

// One user consuming one served feed. Position p is examined with probability
// p^(-gamma); an examined video is watched for min(duration, round(B_u * r *
// (1 + eps))) ms where r = max(0, cosine(user latent, video embedding)) and
// eps ~ N(0, noise_sigma). Randomness is keyed by (world seed, feed_id) only.
ImpressionLog simulate_feed(const SimWorld& world, const RankedFeed& feed, uint64_t feed_id,
                            int64_t ts);

// Latest-first sessions at random times in the second half of the window;
// the availability cutoff at each session time is what varies the feeds.
ImpressionLog simulate_logging_phase(const SimWorld& world, int k, int sessions_per_user);

// label = watch fraction >= 0.5, kept for every impression (examined or not);
// user embeddings come from the supplied table.
std::vector<TrainingExample> training_examples_from_log(const ImpressionLog& log,
                                                        const EmbeddingProvider& user_embs);

struct LoopConfig {
    Policy policy = Policy::conventional;
    int rounds = 5;
    int k = 10;
    int retrain_every = 1;  // for the conventional policy
    TrainHyper hyper;
    ProfileConfig profile;  // for the multimodal policy
};

struct LoopRound {
    int round = 0;  // 1-based
    double mean_recommended_duration_ms = 0.0;
    double skew_popularity = 0.0;   // over per-video exposure counts, zeros included
    double top_decile_share = 0.0;  // exposure share of the 10% most-exposed videos
    size_t impressions = 0;
    size_t cumulative_log = 0;
};

struct LoopReport {
    Policy policy = Policy::recency;
    std::vector<LoopRound> rounds;
    ImpressionLog log;  // cumulative across rounds
};

// Serves every user each round, simulates the impressions, appends them to
// the cumulative log, and (for the conventional policy) retrains from that
// log every retrain_every rounds. The conventional loop seeds its cumulative
// log with a recency logging phase so round 1 already serves a trained model.
LoopReport run_feedback_loop(const SimWorld& world, const LoopConfig& cfg);

nlohmann::json loop_report_to_json(const LoopReport& report);

}  // namespace vcg
