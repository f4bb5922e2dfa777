#include "vcg/rankers.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "vcg/binio.hpp"
#include "vcg/errors.hpp"
#include "vcg/rng.hpp"

namespace vcg {

const char* to_string(Policy p) {
    switch (p) {
        case Policy::recency: return "recency";
        case Policy::multimodal: return "multimodal";
        case Policy::conventional: return "conventional";
    }
    throw std::invalid_argument("unknown policy value");
}

Policy policy_from_string(const std::string& s) {
    if (s == "recency") return Policy::recency;
    if (s == "multimodal") return Policy::multimodal;
    if (s == "conventional") return Policy::conventional;
    throw std::invalid_argument("unknown policy '" + s + "'");
}

double sigmoid(double x) {
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

namespace {

// (score desc, id asc) over a full candidate list, truncated to k.
std::vector<ScoredVideo> select_topk(std::vector<ScoredVideo> scored, size_t k) {
    std::sort(scored.begin(), scored.end(), [](const ScoredVideo& a, const ScoredVideo& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.video_id < b.video_id;
    });
    if (scored.size() > k) scored.resize(k);
    return scored;
}

RankedFeed feed_from_scored(std::vector<ScoredVideo> scored, Policy policy) {
    RankedFeed feed;
    feed.policy = policy;
    feed.items.reserve(scored.size());
    int pos = 1;
    for (const ScoredVideo& s : scored) feed.items.push_back({s.video_id, s.score, pos++});
    return feed;
}

}  // namespace

RankedFeed rank_recency(const VideoIndex& index, size_t k, std::optional<int64_t> as_of) {
    if (k == 0) throw std::invalid_argument("rank_recency: k must be >= 1");
    std::vector<ScoredVideo> scored;
    scored.reserve(index.size());
    for (const VideoRecord& r : index.records()) {
        if (as_of && (*as_of < 0 || r.upload_ts > static_cast<uint64_t>(*as_of))) continue;
        scored.push_back({r.video_id, static_cast<double>(r.upload_ts)});
    }
    return feed_from_scored(select_topk(std::move(scored), k), Policy::recency);
}

RankedFeed rank_multimodal(const VideoIndex& index, const UserHistory& history,
                           const EmbeddingProvider& provider, int64_t t_now,
                           const ProfileConfig& cfg, size_t k,
                           const std::unordered_set<uint64_t>& exclude) {
    Embedding profile = user_profile(history, provider, t_now, cfg);
    RankedFeed feed = feed_from_scored(index.top_k(profile, k, exclude), Policy::multimodal);
    feed.user_id = history.user_id;
    return feed;
}

int VideoFeatureSpec::duration_bucket(uint32_t duration_ms) const {
    if (duration_buckets < 1) throw std::invalid_argument("duration_buckets must be >= 1");
    if (duration_edges.size() != static_cast<size_t>(duration_buckets - 1))
        throw std::invalid_argument("duration_edges must have duration_buckets - 1 entries");
    return static_cast<int>(
        std::upper_bound(duration_edges.begin(), duration_edges.end(), duration_ms) -
        duration_edges.begin());
}

int VideoFeatureSpec::creator_bucket(uint64_t creator_id) const {
    if (creator_buckets < 1 || (creator_buckets & (creator_buckets - 1)) != 0)
        throw std::invalid_argument("creator_buckets must be a power of two");
    if (creator_buckets == 1) return 0;
    int shift = 64 - std::countr_zero(static_cast<uint32_t>(creator_buckets));
    return static_cast<int>((creator_id * 0x9E3779B97F4A7C15ull) >> shift);
}

std::vector<uint32_t> VideoFeatureSpec::quantile_edges(std::vector<uint32_t> durations,
                                                       int buckets) {
    if (buckets < 1) throw std::invalid_argument("buckets must be >= 1");
    if (durations.empty()) throw std::invalid_argument("cannot fit duration buckets: no durations");
    std::sort(durations.begin(), durations.end());
    std::vector<uint32_t> edges;
    edges.reserve(static_cast<size_t>(buckets - 1));
    for (int b = 1; b < buckets; ++b)
        edges.push_back(durations[durations.size() * static_cast<size_t>(b) /
                                  static_cast<size_t>(buckets)]);
    return edges;
}

uint64_t hashtag_key(const std::string& tag) { return fnv1a64(tag); }

namespace {

void validate_spec(const VideoFeatureSpec& spec) {
    if (spec.duration_buckets < 1) throw std::invalid_argument("duration_buckets must be >= 1");
    if (spec.duration_edges.size() != static_cast<size_t>(spec.duration_buckets - 1))
        throw std::invalid_argument("duration_edges must have duration_buckets - 1 entries");
    if (!std::is_sorted(spec.duration_edges.begin(), spec.duration_edges.end()))
        throw std::invalid_argument("duration_edges must be ascending");
    if (spec.creator_buckets < 1 || (spec.creator_buckets & (spec.creator_buckets - 1)) != 0)
        throw std::invalid_argument("creator_buckets must be a power of two");
    if (spec.product_dim < 0 || spec.hashtag_dim < 0)
        throw std::invalid_argument("pooled embedding dims must be >= 0");
}

// Mean-pools known ids from `provider` into f[off, off+dim); unknown ids are
// skipped, and a block with no known ids stays zero.
template <typename IdRange, typename Key>
void pool_block(const IdRange& ids, Key key, const EmbeddingProvider& provider, int dim,
                const char* what, std::vector<double>& f, size_t off) {
    if (dim == 0) return;
    size_t n = 0;
    for (const auto& raw : ids) {
        uint64_t id = key(raw);
        if (!provider.contains(id)) continue;
        const Embedding& e = provider.get(id);
        if (e.size() != static_cast<size_t>(dim))
            throw DataError(std::string(what) + " embedding width " + std::to_string(e.size()) +
                            " does not match feature spec " + std::to_string(dim));
        for (int j = 0; j < dim; ++j) f[off + static_cast<size_t>(j)] += e[static_cast<size_t>(j)];
        ++n;
    }
    if (n > 0)
        for (int j = 0; j < dim; ++j) f[off + static_cast<size_t>(j)] /= static_cast<double>(n);
}

}  // namespace

std::vector<double> featurize_video(const VideoRecord& record,
                                    const EmbeddingProvider& provider_products,
                                    const EmbeddingProvider& provider_hashtags,
                                    const VideoFeatureSpec& spec) {
    validate_spec(spec);
    std::vector<double> f(static_cast<size_t>(spec.feature_dim()), 0.0);
    f[static_cast<size_t>(spec.duration_bucket(record.duration_ms))] = 1.0;
    f[static_cast<size_t>(spec.duration_buckets) +
      static_cast<size_t>(spec.creator_bucket(record.creator_id))] = 1.0;

    size_t off = static_cast<size_t>(spec.duration_buckets) +
                 static_cast<size_t>(spec.creator_buckets);
    pool_block(record.product_ids, [](uint64_t id) { return id; }, provider_products,
               spec.product_dim, "product", f, off);
    off += static_cast<size_t>(spec.product_dim);
    pool_block(record.hashtags, [](const std::string& t) { return hashtag_key(t); },
               provider_hashtags, spec.hashtag_dim, "hashtag", f, off);
    return f;
}

std::unordered_map<uint64_t, std::vector<double>> featurize_catalog(
    const VideoIndex& index, const EmbeddingProvider& provider_products,
    const EmbeddingProvider& provider_hashtags, const VideoFeatureSpec& spec) {
    std::unordered_map<uint64_t, std::vector<double>> features;
    features.reserve(index.size());
    for (const VideoRecord& r : index.records())
        features.emplace(r.video_id, featurize_video(r, provider_products, provider_hashtags, spec));
    return features;
}

namespace {

struct Dims {
    int d = 0;
    int F = 0;
    bool hidden = false;
};

size_t param_count(const Dims& dm) {
    size_t d = static_cast<size_t>(dm.d), F = static_cast<size_t>(dm.F);
    return dm.hidden ? d * d + d + d * F + d : d * F + d;
}

// Tower output t = W x + b, where x = tanh(W1 f + b1) with the hidden layer
// or x = f without it. h receives the hidden activations when present.
void tower_out(const double* p, const Dims& dm, const double* f, std::vector<double>& h,
               std::vector<double>& t) {
    size_t d = static_cast<size_t>(dm.d), F = static_cast<size_t>(dm.F);
    const double* x = f;
    size_t xdim = F;
    if (dm.hidden) {
        const double* W1 = p + d * d + d;
        const double* b1 = W1 + d * F;
        h.assign(d, 0.0);
        for (size_t i = 0; i < d; ++i) {
            double acc = b1[i];
            const double* row = W1 + i * F;
            for (size_t j = 0; j < F; ++j) acc += row[j] * f[j];
            h[i] = std::tanh(acc);
        }
        x = h.data();
        xdim = d;
    }
    const double* W = p;
    const double* b = p + d * xdim;
    t.assign(d, 0.0);
    for (size_t i = 0; i < d; ++i) {
        double acc = b[i];
        const double* row = W + i * xdim;
        for (size_t j = 0; j < xdim; ++j) acc += row[j] * x[j];
        t[i] = acc;
    }
}

double softplus(double x) { return std::max(x, 0.0) + std::log1p(std::exp(-std::abs(x))); }

// One example's BCE; when g is non-null, adds the (unscaled) gradient into g.
double example_loss_grad(const double* p, const Dims& dm, const Embedding& u,
                         const std::vector<double>& f, bool label, double* g,
                         std::vector<double>& h, std::vector<double>& t) {
    size_t d = static_cast<size_t>(dm.d), F = static_cast<size_t>(dm.F);
    tower_out(p, dm, f.data(), h, t);
    double z = 0.0;
    for (size_t i = 0; i < d; ++i) z += u[i] * t[i];
    double y = label ? 1.0 : 0.0;
    double loss = softplus(z) - y * z;
    if (g == nullptr) return loss;

    double dz = sigmoid(z) - y;
    if (dm.hidden) {
        double* gW = g;
        double* gb = g + d * d;
        double* gW1 = gb + d;
        double* gb1 = gW1 + d * F;
        const double* W = p;
        for (size_t i = 0; i < d; ++i) {
            double du = dz * u[i];
            double* row = gW + i * d;
            for (size_t j = 0; j < d; ++j) row[j] += du * h[j];
            gb[i] += du;
        }
        for (size_t j = 0; j < d; ++j) {
            double back = 0.0;
            for (size_t i = 0; i < d; ++i) back += u[i] * W[i * d + j];
            double dpre = dz * back * (1.0 - h[j] * h[j]);
            double* row = gW1 + j * F;
            for (size_t k = 0; k < F; ++k) row[k] += dpre * f[k];
            gb1[j] += dpre;
        }
    } else {
        double* gW = g;
        double* gb = g + d * F;
        for (size_t i = 0; i < d; ++i) {
            double du = dz * u[i];
            double* row = gW + i * F;
            for (size_t j = 0; j < F; ++j) row[j] += du * f[j];
            gb[i] += du;
        }
    }
    return loss;
}

}  // namespace

ConventionalModel::ConventionalModel(VideoFeatureSpec spec, int embedding_dim, bool hidden,
                                     uint64_t init_seed)
    : spec_(std::move(spec)), dim_(embedding_dim), hidden_(hidden) {
    validate_spec(spec_);
    if (dim_ <= 0) throw std::invalid_argument("embedding dimension must be positive");
    int F = spec_.feature_dim();
    Dims dm{dim_, F, hidden_};
    params_.assign(param_count(dm), 0.0);

    // Biases start at zero; weights are N(0, 1/sqrt(fan_in)), drawn in layout
    // order from one named stream so initialization is part of the seed contract.
    Rng rng = named_stream(init_seed, "conv-init");
    size_t d = static_cast<size_t>(dim_);
    if (hidden_) {
        double sw = 1.0 / std::sqrt(static_cast<double>(dim_));
        for (size_t i = 0; i < d * d; ++i) params_[i] = rng.normal(0.0, sw);
        double s1 = 1.0 / std::sqrt(static_cast<double>(F));
        size_t w1 = d * d + d;
        for (size_t i = 0; i < d * static_cast<size_t>(F); ++i)
            params_[w1 + i] = rng.normal(0.0, s1);
    } else {
        double sw = 1.0 / std::sqrt(static_cast<double>(F));
        for (size_t i = 0; i < d * static_cast<size_t>(F); ++i) params_[i] = rng.normal(0.0, sw);
    }
    meta_.seed = init_seed;
}

Embedding ConventionalModel::video_embedding(const std::vector<double>& features) const {
    if (features.size() != static_cast<size_t>(spec_.feature_dim()))
        throw DataError("feature width " + std::to_string(features.size()) +
                        " does not match model spec " + std::to_string(spec_.feature_dim()));
    std::vector<double> h, t;
    tower_out(params_.data(), Dims{dim_, spec_.feature_dim(), hidden_}, features.data(), h, t);
    return t;
}

double ConventionalModel::logit(const Embedding& user_embedding,
                                const std::vector<double>& features) const {
    validate_embedding(user_embedding, static_cast<size_t>(dim_));
    return dot_score(user_embedding, video_embedding(features));
}

double ConventionalModel::score(const Embedding& user_embedding,
                                const std::vector<double>& features) const {
    return sigmoid(logit(user_embedding, features));
}

double ConventionalModel::loss_and_grad(
    const std::vector<TrainingExample>& examples,
    const std::unordered_map<uint64_t, std::vector<double>>& features,
    std::vector<double>* grad) const {
    if (examples.empty()) throw std::invalid_argument("loss over an empty example set");
    Dims dm{dim_, spec_.feature_dim(), hidden_};
    if (grad != nullptr) grad->assign(params_.size(), 0.0);
    std::vector<double> h, t;
    double total = 0.0;
    for (const TrainingExample& ex : examples) {
        auto it = features.find(ex.video_id);
        if (it == features.end())
            throw DataError("no features for video " + std::to_string(ex.video_id));
        if (it->second.size() != static_cast<size_t>(dm.F))
            throw DataError("feature width mismatch for video " + std::to_string(ex.video_id));
        if (ex.user_embedding.size() != static_cast<size_t>(dm.d))
            throw DataError("user embedding dimension mismatch for video " +
                            std::to_string(ex.video_id));
        total += example_loss_grad(params_.data(), dm, ex.user_embedding, it->second, ex.label,
                                   grad != nullptr ? grad->data() : nullptr, h, t);
    }
    double inv = 1.0 / static_cast<double>(examples.size());
    if (grad != nullptr)
        for (double& g : *grad) g *= inv;
    return total * inv;
}

std::vector<uint8_t> ConventionalModel::save() const {
    BinWriter w;
    w.magic("VCG1");
    w.u32(1);
    w.u32(static_cast<uint32_t>(dim_));
    w.u16(hidden_ ? 1 : 0);
    w.u32(static_cast<uint32_t>(spec_.duration_buckets));
    w.u32(static_cast<uint32_t>(spec_.duration_edges.size()));
    for (uint32_t e : spec_.duration_edges) w.u32(e);
    w.u32(static_cast<uint32_t>(spec_.creator_buckets));
    w.u32(static_cast<uint32_t>(spec_.product_dim));
    w.u32(static_cast<uint32_t>(spec_.hashtag_dim));
    w.u32(static_cast<uint32_t>(meta_.epochs));
    w.f64(meta_.learning_rate);
    w.u64(meta_.seed);
    w.u32(static_cast<uint32_t>(meta_.batch_size));
    w.u64(meta_.loss_curve.size());
    for (double v : meta_.loss_curve) w.f64(v);
    w.u64(params_.size());
    for (double v : params_) w.f32(static_cast<float>(v));
    return w.take();
}

ConventionalModel ConventionalModel::load(const std::vector<uint8_t>& bytes) {
    BinReader r(bytes);
    r.expect_magic("VCG1");
    uint32_t version = r.u32();
    if (version != 1) throw DataError("unsupported model version " + std::to_string(version));
    ConventionalModel m;
    m.dim_ = static_cast<int>(r.u32());
    m.hidden_ = r.u16() != 0;
    m.spec_.duration_buckets = static_cast<int>(r.u32());
    uint32_t n_edges = r.u32();
    m.spec_.duration_edges.reserve(n_edges);
    for (uint32_t i = 0; i < n_edges; ++i) m.spec_.duration_edges.push_back(r.u32());
    m.spec_.creator_buckets = static_cast<int>(r.u32());
    m.spec_.product_dim = static_cast<int>(r.u32());
    m.spec_.hashtag_dim = static_cast<int>(r.u32());
    m.meta_.epochs = static_cast<int>(r.u32());
    m.meta_.learning_rate = r.f64();
    m.meta_.seed = r.u64();
    m.meta_.batch_size = static_cast<int>(r.u32());
    uint64_t n_curve = r.u64();
    if (n_curve > r.remaining()) throw DataError("truncated model file: loss curve");
    m.meta_.loss_curve.reserve(n_curve);
    for (uint64_t i = 0; i < n_curve; ++i) m.meta_.loss_curve.push_back(r.f64());
    validate_spec(m.spec_);
    if (m.dim_ <= 0) throw DataError("model embedding dimension must be positive");
    uint64_t n_params = r.u64();
    Dims dm{m.dim_, m.spec_.feature_dim(), m.hidden_};
    if (n_params != param_count(dm))
        throw DataError("model parameter count " + std::to_string(n_params) +
                        " does not match spec shape " + std::to_string(param_count(dm)));
    m.params_.reserve(n_params);
    for (uint64_t i = 0; i < n_params; ++i) {
        double v = static_cast<double>(r.f32());
        if (!std::isfinite(v)) throw DataError("non-finite model parameter");
        m.params_.push_back(v);
    }
    if (!r.at_end()) throw DataError("trailing bytes after model payload");
    return m;
}

void ConventionalModel::save_file(const std::string& path) const {
    write_file_bytes(path, save());
}

ConventionalModel ConventionalModel::load_file(const std::string& path) {
    return load(read_file_bytes(path));
}

ConventionalModel train_conventional(
    const std::vector<TrainingExample>& examples,
    const std::unordered_map<uint64_t, std::vector<double>>& video_features,
    const VideoFeatureSpec& spec, int embedding_dim, const TrainHyper& hyper) {
    if (hyper.objective == "contrastive")
        throw std::invalid_argument(
            "objective 'contrastive' is a declared option without an implementation; use 'bce'");
    if (hyper.objective != "bce")
        throw std::invalid_argument("unknown objective '" + hyper.objective + "'");
    if (hyper.negatives_policy != "logged")
        throw std::invalid_argument("unknown negatives policy '" + hyper.negatives_policy +
                                    "'; only 'logged' is implemented");
    if (hyper.epochs < 0) throw std::invalid_argument("epochs must be >= 0");
    if (!(hyper.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be positive");
    if (hyper.batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
    if (examples.empty()) throw std::invalid_argument("no training examples");
    size_t positives = 0;
    for (const TrainingExample& ex : examples) positives += ex.label ? 1 : 0;
    if (positives == 0 || positives == examples.size())
        throw std::invalid_argument("training requires at least one positive and one negative label");

    ConventionalModel model(spec, embedding_dim, hyper.hidden_layer, hyper.seed);
    model.meta_.learning_rate = hyper.learning_rate;
    model.meta_.batch_size = hyper.batch_size;

    Dims dm{embedding_dim, spec.feature_dim(), hyper.hidden_layer};
    const size_t n = examples.size();

    // Resolve features once; this also front-loads the shape errors.
    std::vector<const std::vector<double>*> feats(n, nullptr);
    for (size_t i = 0; i < n; ++i) {
        auto it = video_features.find(examples[i].video_id);
        if (it == video_features.end())
            throw DataError("no features for video " + std::to_string(examples[i].video_id));
        if (it->second.size() != static_cast<size_t>(dm.F))
            throw DataError("feature width mismatch for video " +
                            std::to_string(examples[i].video_id));
        if (examples[i].user_embedding.size() != static_cast<size_t>(dm.d))
            throw DataError("user embedding dimension mismatch for video " +
                            std::to_string(examples[i].video_id));
        feats[i] = &it->second;
    }

    std::vector<size_t> order(n);
    for (size_t i = 0; i < n; ++i) order[i] = i;
    std::vector<double> grad(model.params_.size(), 0.0);
    std::vector<double> h, t;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng shuffle_rng = named_stream(hyper.seed, "conv-shuffle", static_cast<uint64_t>(epoch));
        shuffle_rng.shuffle(order);
        for (size_t start = 0; start < n; start += static_cast<size_t>(hyper.batch_size)) {
            size_t end = std::min(n, start + static_cast<size_t>(hyper.batch_size));
            std::fill(grad.begin(), grad.end(), 0.0);
            for (size_t s = start; s < end; ++s) {
                size_t i = order[s];
                example_loss_grad(model.params_.data(), dm, examples[i].user_embedding, *feats[i],
                                  examples[i].label, grad.data(), h, t);
            }
            double step = hyper.learning_rate / static_cast<double>(end - start);
            for (size_t p = 0; p < model.params_.size(); ++p) model.params_[p] -= step * grad[p];
        }
        double loss = 0.0;
        for (size_t i = 0; i < n; ++i)
            loss += example_loss_grad(model.params_.data(), dm, examples[i].user_embedding,
                                      *feats[i], examples[i].label, nullptr, h, t);
        loss /= static_cast<double>(n);
        if (!std::isfinite(loss))
            throw DataError("training diverged: non-finite loss at epoch " +
                            std::to_string(epoch + 1));
        model.meta_.loss_curve.push_back(loss);
        model.meta_.epochs = epoch + 1;
    }
    return model;
}

RankedFeed rank_conventional(const ConventionalModel& model, const VideoIndex& index,
                             const std::unordered_map<uint64_t, std::vector<double>>& features,
                             const Embedding& user_embedding, size_t k,
                             const std::unordered_set<uint64_t>& exclude) {
    if (k == 0) throw std::invalid_argument("rank_conventional: k must be >= 1");
    validate_embedding(user_embedding, static_cast<size_t>(model.embedding_dim()));
    std::vector<ScoredVideo> scored;
    scored.reserve(index.size());
    for (const VideoRecord& r : index.records()) {
        if (exclude.count(r.video_id) > 0) continue;
        auto it = features.find(r.video_id);
        if (it == features.end())
            throw DataError("no features for video " + std::to_string(r.video_id));
        scored.push_back({r.video_id, model.logit(user_embedding, it->second)});
    }
    // Ranked by logit; reported scores apply the (monotone) sigmoid.
    std::vector<ScoredVideo> top = select_topk(std::move(scored), k);
    for (ScoredVideo& s : top) s.score = sigmoid(s.score);
    return feed_from_scored(std::move(top), Policy::conventional);
}

VideoIndex build_tower_index(const ConventionalModel& model, const VideoIndex& catalog,
                             const std::unordered_map<uint64_t, std::vector<double>>& features) {
    std::vector<VideoRecord> records = catalog.records();
    for (VideoRecord& r : records) {
        auto it = features.find(r.video_id);
        if (it == features.end())
            throw DataError("no features for video " + std::to_string(r.video_id));
        r.embedding = model.video_embedding(it->second);
    }
    return VideoIndex::build(std::move(records), catalog.build_ts());
}

RankedFeed feed_from_tower(const VideoIndex& tower, const Embedding& user_embedding, size_t k,
                           const std::unordered_set<uint64_t>& exclude) {
    std::vector<ScoredVideo> top = tower.top_k(user_embedding, k, exclude);
    for (ScoredVideo& s : top) s.score = sigmoid(s.score);
    return feed_from_scored(std::move(top), Policy::conventional);
}

std::vector<std::string> training_examples_to_jsonl(const std::vector<TrainingExample>& examples) {
    std::vector<std::string> lines;
    lines.reserve(examples.size());
    for (const TrainingExample& ex : examples) {
        nlohmann::json j;
        j["user_embedding"] = ex.user_embedding;
        j["video_id"] = ex.video_id;
        j["label"] = ex.label ? 1 : 0;
        lines.push_back(j.dump());
    }
    return lines;
}

std::vector<TrainingExample> training_examples_from_jsonl(const std::vector<std::string>& lines) {
    std::vector<TrainingExample> examples;
    examples.reserve(lines.size());
    for (size_t i = 0; i < lines.size(); ++i) {
        nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw DataError("bad training example on line " + std::to_string(i + 1));
        try {
            TrainingExample ex;
            ex.user_embedding = j.at("user_embedding").get<Embedding>();
            ex.video_id = j.at("video_id").get<uint64_t>();
            int label = j.at("label").get<int>();
            if (label != 0 && label != 1)
                throw DataError("label must be 0 or 1");
            ex.label = label == 1;
            validate_embedding(ex.user_embedding);
            examples.push_back(std::move(ex));
        } catch (const nlohmann::json::exception& e) {
            throw DataError("bad training example on line " + std::to_string(i + 1) + ": " +
                            e.what());
        }
    }
    return examples;
}

}  // namespace vcg
