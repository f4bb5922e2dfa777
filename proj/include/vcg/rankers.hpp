#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vcg/index.hpp"
#include "vcg/profiler.hpp"

namespace vcg {

enum class Policy { recency, multimodal, conventional };

const char* to_string(Policy p);
Policy policy_from_string(const std::string& s);

struct RankedItem {
    uint64_t video_id = 0;
    double score = 0.0;
    int position = 0;  // 1-based
};

struct RankedFeed {
    uint64_t user_id = 0;
    std::vector<RankedItem> items;
    Policy policy = Policy::recency;
};

// Latest-first baseline; ties broken by ascending video id. Score is the
// upload timestamp. `as_of` restricts to videos uploaded at or before it.
RankedFeed rank_recency(const VideoIndex& index, size_t k,
                        std::optional<int64_t> as_of = std::nullopt);

// Profile-then-retrieve; exactly user_profile composed with top_k.
RankedFeed rank_multimodal(const VideoIndex& index, const UserHistory& history,
                           const EmbeddingProvider& provider, int64_t t_now,
                           const ProfileConfig& cfg, size_t k,
                           const std::unordered_set<uint64_t>& exclude = {});

// Video-tower input layout: one-hot duration bucket | one-hot hashed creator |
// mean-pooled product embeddings | mean-pooled hashtag embeddings.
struct VideoFeatureSpec {
    int duration_buckets = 8;
    std::vector<uint32_t> duration_edges;  // ascending; size duration_buckets - 1
    int creator_buckets = 64;
    int product_dim = 0;
    int hashtag_dim = 0;

    int feature_dim() const {
        return duration_buckets + creator_buckets + product_dim + hashtag_dim;
    }
    int duration_bucket(uint32_t duration_ms) const;
    int creator_bucket(uint64_t creator_id) const;

    // Equal-count quantile bucket edges from the training catalog.
    static std::vector<uint32_t> quantile_edges(std::vector<uint32_t> durations, int buckets);
};

// Stable key for hashtag embedding lookups.
uint64_t hashtag_key(const std::string& tag);

std::vector<double> featurize_video(const VideoRecord& record,
                                    const EmbeddingProvider& provider_products,
                                    const EmbeddingProvider& provider_hashtags,
                                    const VideoFeatureSpec& spec);

std::unordered_map<uint64_t, std::vector<double>> featurize_catalog(
    const VideoIndex& index, const EmbeddingProvider& provider_products,
    const EmbeddingProvider& provider_hashtags, const VideoFeatureSpec& spec);

struct TrainingExample {
    Embedding user_embedding;  // fixed, from the catalog model
    uint64_t video_id = 0;
    bool label = false;  // watch fraction >= 0.5 in the source impression
};

struct TrainHyper {
    int epochs = 20;
    double learning_rate = 0.05;
    uint64_t seed = 1;
    int batch_size = 64;
    // "bce" is implemented; "contrastive" is a declared option without an
    // implementation yet and is rejected at train time.
    std::string objective = "bce";
    // "logged" uses the impressions as given; no sampling scheme is implemented.
    std::string negatives_policy = "logged";
    bool hidden_layer = false;  // optional tanh layer of width d
};

struct TrainingMeta {
    int epochs = 0;
    double learning_rate = 0.0;
    uint64_t seed = 0;
    int batch_size = 0;
    std::vector<double> loss_curve;  // mean training BCE after each epoch
};

// Trainable video tower scored against fixed user embeddings:
// score(u, v) = sigmoid(e_u . tower(features_v)).
class ConventionalModel {
public:
    ConventionalModel() = default;
    ConventionalModel(VideoFeatureSpec spec, int embedding_dim, bool hidden, uint64_t init_seed);

    const VideoFeatureSpec& spec() const { return spec_; }
    int embedding_dim() const { return dim_; }
    bool has_hidden_layer() const { return hidden_; }
    const TrainingMeta& meta() const { return meta_; }

    // Tower output in the shared embedding space.
    Embedding video_embedding(const std::vector<double>& features) const;
    double logit(const Embedding& user_embedding, const std::vector<double>& features) const;
    double score(const Embedding& user_embedding, const std::vector<double>& features) const;

    std::vector<uint8_t> save() const;
    static ConventionalModel load(const std::vector<uint8_t>& bytes);
    void save_file(const std::string& path) const;
    static ConventionalModel load_file(const std::string& path);

    // Flat view over all parameters, used by training and the gradient checks.
    std::vector<double>& params() { return params_; }
    const std::vector<double>& params() const { return params_; }

    // Mean BCE over the examples and, optionally, its gradient w.r.t. params.
    double loss_and_grad(const std::vector<TrainingExample>& examples,
                         const std::unordered_map<uint64_t, std::vector<double>>& features,
                         std::vector<double>* grad) const;

    friend ConventionalModel train_conventional(
        const std::vector<TrainingExample>&,
        const std::unordered_map<uint64_t, std::vector<double>>&, const VideoFeatureSpec&,
        int, const TrainHyper&);

private:
    // Parameter layout: W (d x F), b (d). With the hidden layer, W is d x d
    // applied to h = tanh(W1 f + b1) and is followed by b (d), W1 (d x F), b1 (d).
    VideoFeatureSpec spec_;
    int dim_ = 0;
    bool hidden_ = false;
    TrainingMeta meta_;
    std::vector<double> params_;
};

// Mini-batch SGD on mean BCE; deterministic for a given seed.
ConventionalModel train_conventional(
    const std::vector<TrainingExample>& examples,
    const std::unordered_map<uint64_t, std::vector<double>>& video_features,
    const VideoFeatureSpec& spec, int embedding_dim, const TrainHyper& hyper);

// Top-k by sigmoid(e_u . tower(features_v)); the sigmoid is monotone, so the
// ordering equals the logit ordering.
RankedFeed rank_conventional(const ConventionalModel& model, const VideoIndex& index,
                             const std::unordered_map<uint64_t, std::vector<double>>& features,
                             const Embedding& user_embedding, size_t k,
                             const std::unordered_set<uint64_t>& exclude = {});

// The catalog re-indexed under tower outputs so user-side scoring is a plain
// dot product. feed_from_tower over it returns feeds identical to
// rank_conventional with the same model and features.
VideoIndex build_tower_index(const ConventionalModel& model, const VideoIndex& catalog,
                             const std::unordered_map<uint64_t, std::vector<double>>& features);
RankedFeed feed_from_tower(const VideoIndex& tower, const Embedding& user_embedding, size_t k,
                           const std::unordered_set<uint64_t>& exclude = {});

double sigmoid(double x);

// Line-delimited JSON, one example per line.
std::vector<std::string> training_examples_to_jsonl(const std::vector<TrainingExample>& examples);
std::vector<TrainingExample> training_examples_from_jsonl(const std::vector<std::string>& lines);

}  // namespace vcg
