#include "vcg/simulator.hpp"

#include <algorithm>
#include <cmath>
#include <optional>
#include <stdexcept>
#include <unordered_map>

#include "vcg/binio.hpp"
#include "vcg/errors.hpp"
#include "vcg/rng.hpp"
#include "vcg/stats.hpp"

namespace vcg {

void WorldConfig::validate() const {
    if (n_users < 1 || n_videos < 1 || n_products < 1)
        throw std::invalid_argument("entity counts must be positive");
    if (d < 1) throw std::invalid_argument("embedding dimension must be positive");
    if (taste_clusters < 1) throw std::invalid_argument("taste_clusters must be positive");
    if (n_products < taste_clusters)
        throw std::invalid_argument("need at least one product per taste cluster");
    if (duration_min_ms == 0 || duration_max_ms < duration_min_ms)
        throw std::invalid_argument("bad duration range");
    if (!(attention_budget_mean_ms > 0.0) || attention_budget_spread_ms < 0.0)
        throw std::invalid_argument("bad attention budget");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    if (noise_sigma < 0.0 || catalog_noise_sigma < 0.0)
        throw std::invalid_argument("noise sigmas must be >= 0");
    if (frames_per_video < 1) throw std::invalid_argument("frames_per_video must be positive");
    if (min_products_per_video < 1 || max_products_per_video < min_products_per_video)
        throw std::invalid_argument("bad products-per-video range");
    if (hashtags_per_cluster < 1) throw std::invalid_argument("hashtags_per_cluster must be positive");
    if (min_hashtags_per_video < 0 || max_hashtags_per_video < min_hashtags_per_video ||
        max_hashtags_per_video > hashtags_per_cluster)
        throw std::invalid_argument("bad hashtags-per-video range");
    if (min_history_events < 0 || max_history_events < min_history_events)
        throw std::invalid_argument("bad history-events range");
    if (window_days < 1) throw std::invalid_argument("window_days must be positive");
    if (sessions_per_user < 1) throw std::invalid_argument("sessions_per_user must be positive");
    if (explore_prob < 0.0 || explore_prob > 1.0)
        throw std::invalid_argument("explore_prob must be in [0, 1]");
}

WorldConfig world_config_from_json(const nlohmann::json& j) {
    WorldConfig cfg;
    auto get = [&](const char* key, auto& field) {
        if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
    };
    get("seed", cfg.seed);
    get("n_users", cfg.n_users);
    get("n_videos", cfg.n_videos);
    get("n_products", cfg.n_products);
    get("d", cfg.d);
    get("taste_clusters", cfg.taste_clusters);
    get("duration_min_ms", cfg.duration_min_ms);
    get("duration_max_ms", cfg.duration_max_ms);
    get("attention_budget_mean_ms", cfg.attention_budget_mean_ms);
    get("attention_budget_spread_ms", cfg.attention_budget_spread_ms);
    get("gamma", cfg.gamma);
    get("noise_sigma", cfg.noise_sigma);
    get("catalog_noise_sigma", cfg.catalog_noise_sigma);
    get("frames_per_video", cfg.frames_per_video);
    get("min_products_per_video", cfg.min_products_per_video);
    get("max_products_per_video", cfg.max_products_per_video);
    get("hashtags_per_cluster", cfg.hashtags_per_cluster);
    get("min_hashtags_per_video", cfg.min_hashtags_per_video);
    get("max_hashtags_per_video", cfg.max_hashtags_per_video);
    get("min_history_events", cfg.min_history_events);
    get("max_history_events", cfg.max_history_events);
    get("window_days", cfg.window_days);
    get("sessions_per_user", cfg.sessions_per_user);
    get("explore_prob", cfg.explore_prob);
    cfg.validate();
    return cfg;
}

nlohmann::json world_config_to_json(const WorldConfig& cfg) {
    nlohmann::json j;
    j["seed"] = cfg.seed;
    j["n_users"] = cfg.n_users;
    j["n_videos"] = cfg.n_videos;
    j["n_products"] = cfg.n_products;
    j["d"] = cfg.d;
    j["taste_clusters"] = cfg.taste_clusters;
    j["duration_min_ms"] = cfg.duration_min_ms;
    j["duration_max_ms"] = cfg.duration_max_ms;
    j["attention_budget_mean_ms"] = cfg.attention_budget_mean_ms;
    j["attention_budget_spread_ms"] = cfg.attention_budget_spread_ms;
    j["gamma"] = cfg.gamma;
    j["noise_sigma"] = cfg.noise_sigma;
    j["catalog_noise_sigma"] = cfg.catalog_noise_sigma;
    j["frames_per_video"] = cfg.frames_per_video;
    j["min_products_per_video"] = cfg.min_products_per_video;
    j["max_products_per_video"] = cfg.max_products_per_video;
    j["hashtags_per_cluster"] = cfg.hashtags_per_cluster;
    j["min_hashtags_per_video"] = cfg.min_hashtags_per_video;
    j["max_hashtags_per_video"] = cfg.max_hashtags_per_video;
    j["min_history_events"] = cfg.min_history_events;
    j["max_history_events"] = cfg.max_history_events;
    j["window_days"] = cfg.window_days;
    j["sessions_per_user"] = cfg.sessions_per_user;
    j["explore_prob"] = cfg.explore_prob;
    return j;
}

SimWorld::SimWorld(const WorldConfig& c)
    : cfg(c),
      product_latents("product_latents", static_cast<size_t>(c.d)),
      product_content("product_content", static_cast<size_t>(c.taste_clusters)),
      hashtag_latents("hashtag_latents", static_cast<size_t>(c.d)),
      user_latents("user_latents", static_cast<size_t>(c.d)),
      user_catalog("user_catalog", static_cast<size_t>(c.d)) {
    cfg.validate();
}

double SimWorld::budget_of(uint64_t user_id) const {
    if (user_id < 1 || user_id > attention_budget_ms.size())
        throw DataError("unknown user " + std::to_string(user_id));
    return attention_budget_ms[user_id - 1];
}

const UserHistory& SimWorld::history_of(uint64_t user_id) const {
    if (user_id < 1 || user_id > histories.size())
        throw DataError("unknown user " + std::to_string(user_id));
    return histories[user_id - 1];
}

namespace {

// Adds sigma-scaled gaussian noise per component; draws are consumed even
// when sigma is 0 so the stream layout is independent of the noise setting.
Embedding noisy(const Embedding& base, double sigma, Rng& rng) {
    Embedding e = base;
    for (double& v : e) v += sigma * rng.normal();
    return e;
}

// Draws `count` entries from the pool with replacement, then dedupes.
template <typename T>
std::vector<T> draw_distinct(const std::vector<T>& pool, int count, Rng& rng) {
    std::vector<T> out;
    out.reserve(static_cast<size_t>(count));
    for (int i = 0; i < count; ++i) out.push_back(pool[rng.uniform_index(pool.size())]);
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

}  // namespace

SimWorld generate_world(const WorldConfig& cfg) {
    cfg.validate();
    SimWorld w(cfg);
    w.t0 = kWorldEpochMs;
    w.t_end = kWorldEpochMs + static_cast<int64_t>(cfg.window_days) * kDayMs;
    const uint64_t window = static_cast<uint64_t>(w.t_end - w.t0);
    const size_t d = static_cast<size_t>(cfg.d);
    const int n_c = cfg.taste_clusters;

    Rng center_rng = named_stream(cfg.seed, "centers");
    std::vector<Embedding> centers(static_cast<size_t>(n_c), Embedding(d, 0.0));
    for (Embedding& c : centers) {
        for (double& v : c) v = center_rng.normal();
        double norm = l2_norm(c);
        if (norm == 0.0) c[0] = 1.0;
        else
            for (double& v : c) v /= norm;
    }

    // Products. The first taste_clusters products cover every cluster so no
    // cluster pool is empty; the rest are assigned uniformly.
    Rng prod_rng = named_stream(cfg.seed, "products");
    w.product_cluster.resize(static_cast<size_t>(cfg.n_products));
    std::vector<std::vector<uint64_t>> cluster_products(static_cast<size_t>(n_c));
    for (int i = 0; i < cfg.n_products; ++i) {
        int c = i < n_c ? i : static_cast<int>(prod_rng.uniform_index(static_cast<uint64_t>(n_c)));
        w.product_cluster[static_cast<size_t>(i)] = c;
        uint64_t pid = static_cast<uint64_t>(i) + 1;
        cluster_products[static_cast<size_t>(c)].push_back(pid);
        w.product_latents.put(pid, quantize_f32(noisy(centers[static_cast<size_t>(c)],
                                                      cfg.noise_sigma, prod_rng)));
        Embedding attr(static_cast<size_t>(n_c), 0.0);
        attr[static_cast<size_t>(c)] = 1.0;
        w.product_content.put(pid, quantize_f32(noisy(attr, cfg.noise_sigma, prod_rng)));
    }

    // Hashtag pools, one per cluster.
    Rng tag_rng = named_stream(cfg.seed, "hashtags");
    std::vector<std::vector<std::string>> cluster_tags(static_cast<size_t>(n_c));
    for (int c = 0; c < n_c; ++c) {
        for (int t = 0; t < cfg.hashtags_per_cluster; ++t) {
            std::string name = "c" + std::to_string(c) + "_tag" + std::to_string(t);
            w.hashtag_latents.put(hashtag_key(name),
                                  quantize_f32(noisy(centers[static_cast<size_t>(c)],
                                                     cfg.noise_sigma, tag_rng)));
            cluster_tags[static_cast<size_t>(c)].push_back(std::move(name));
        }
    }

    // Videos: cluster point plus per-frame noise, mean-pooled.
    Rng video_rng = named_stream(cfg.seed, "videos");
    const uint64_t n_creators = static_cast<uint64_t>(std::max(1, cfg.n_videos / 10));
    w.video_cluster.resize(static_cast<size_t>(cfg.n_videos));
    std::vector<VideoRecord> records;
    records.reserve(static_cast<size_t>(cfg.n_videos));
    for (int i = 0; i < cfg.n_videos; ++i) {
        int c = i < n_c ? i : static_cast<int>(video_rng.uniform_index(static_cast<uint64_t>(n_c)));
        w.video_cluster[static_cast<size_t>(i)] = c;
        VideoRecord rec;
        rec.video_id = static_cast<uint64_t>(i) + 1;
        rec.duration_ms = static_cast<uint32_t>(
            video_rng.uniform_int(cfg.duration_min_ms, cfg.duration_max_ms));
        rec.upload_ts = static_cast<uint64_t>(w.t0) + video_rng.uniform_index(window);
        rec.creator_id = 1 + video_rng.uniform_index(n_creators);
        int n_prod = static_cast<int>(
            video_rng.uniform_int(cfg.min_products_per_video, cfg.max_products_per_video));
        rec.product_ids = draw_distinct(cluster_products[static_cast<size_t>(c)], n_prod, video_rng);
        int n_tags = static_cast<int>(
            video_rng.uniform_int(cfg.min_hashtags_per_video, cfg.max_hashtags_per_video));
        if (n_tags > 0)
            rec.hashtags = draw_distinct(cluster_tags[static_cast<size_t>(c)], n_tags, video_rng);
        Embedding point = noisy(centers[static_cast<size_t>(c)], cfg.noise_sigma, video_rng);
        FrameSet frames;
        frames.video_id = rec.video_id;
        frames.frames.reserve(static_cast<size_t>(cfg.frames_per_video));
        for (int f = 0; f < cfg.frames_per_video; ++f)
            frames.frames.push_back(noisy(point, cfg.noise_sigma, video_rng));
        rec.embedding = quantize_f32(mean_pool(frames));
        records.push_back(std::move(rec));
    }
    w.index = VideoIndex::build(std::move(records), w.t_end);

    // Users: true latent, attention budget, then the noisy catalog-model copy.
    Rng user_rng = named_stream(cfg.seed, "users");
    w.user_cluster.resize(static_cast<size_t>(cfg.n_users));
    w.attention_budget_ms.reserve(static_cast<size_t>(cfg.n_users));
    for (int i = 0; i < cfg.n_users; ++i) {
        int c = i < n_c ? i : static_cast<int>(user_rng.uniform_index(static_cast<uint64_t>(n_c)));
        w.user_cluster[static_cast<size_t>(i)] = c;
        uint64_t uid = static_cast<uint64_t>(i) + 1;
        w.user_latents.put(uid, quantize_f32(noisy(centers[static_cast<size_t>(c)],
                                                   cfg.noise_sigma, user_rng)));
        w.attention_budget_ms.push_back(std::max(
            5000.0, user_rng.normal(cfg.attention_budget_mean_ms, cfg.attention_budget_spread_ms)));
    }
    Rng catalog_rng = named_stream(cfg.seed, "catalog-model");
    for (int i = 0; i < cfg.n_users; ++i) {
        uint64_t uid = static_cast<uint64_t>(i) + 1;
        w.user_catalog.put(uid, quantize_f32(noisy(w.user_latents.get(uid),
                                                   cfg.catalog_noise_sigma, catalog_rng)));
    }

    // Histories: mostly in-cluster product interactions spread over the window.
    Rng hist_rng = named_stream(cfg.seed, "histories");
    w.histories.reserve(static_cast<size_t>(cfg.n_users));
    for (int i = 0; i < cfg.n_users; ++i) {
        UserHistory h;
        h.user_id = static_cast<uint64_t>(i) + 1;
        int n_ev = static_cast<int>(
            hist_rng.uniform_int(cfg.min_history_events, cfg.max_history_events));
        h.events.reserve(static_cast<size_t>(n_ev));
        const auto& own = cluster_products[static_cast<size_t>(w.user_cluster[static_cast<size_t>(i)])];
        for (int e = 0; e < n_ev; ++e) {
            InteractionEvent ev;
            bool explore = hist_rng.uniform() < cfg.explore_prob;
            ev.product_id = explore
                                ? 1 + hist_rng.uniform_index(static_cast<uint64_t>(cfg.n_products))
                                : own[hist_rng.uniform_index(own.size())];
            ev.ts = w.t0 + static_cast<int64_t>(hist_rng.uniform_index(window));
            ev.kind = static_cast<InteractionKind>(hist_rng.uniform_index(4));
            h.events.push_back(ev);
        }
        std::stable_sort(h.events.begin(), h.events.end(),
                         [](const InteractionEvent& a, const InteractionEvent& b) {
                             return a.ts < b.ts;
                         });
        h.validate();
        w.histories.push_back(std::move(h));
    }

    // Cold-start fallback: weighted mean of the 50 most-interacted products.
    std::unordered_map<uint64_t, double> freq;
    for (const UserHistory& h : w.histories)
        for (const InteractionEvent& ev : h.events) freq[ev.product_id] += 1.0;
    std::vector<std::pair<uint64_t, double>> popular(freq.begin(), freq.end());
    std::sort(popular.begin(), popular.end(), [](const auto& a, const auto& b) {
        if (a.second != b.second) return a.second > b.second;
        return a.first < b.first;
    });
    if (popular.size() > 50) popular.resize(50);
    if (popular.empty()) {
        // No history events anywhere; fall back to the first product.
        popular.emplace_back(1, 1.0);
    }
    w.fallback = quantize_f32(global_fallback(popular, w.product_latents));
    return w;
}

void save_world(const SimWorld& world, const std::string& dir) {
    nlohmann::json j;
    j["config"] = world_config_to_json(world.cfg);
    j["t0"] = world.t0;
    j["t_end"] = world.t_end;
    j["product_cluster"] = world.product_cluster;
    j["video_cluster"] = world.video_cluster;
    j["user_cluster"] = world.user_cluster;
    j["attention_budget_ms"] = world.attention_budget_ms;
    j["fallback"] = world.fallback;
    write_lines(dir + "/world.json", {j.dump(2)});
    world.index.save_file(dir + "/index.vix");
    world.product_latents.save_file(dir + "/product_latents.emb");
    world.product_content.save_file(dir + "/product_content.emb");
    world.hashtag_latents.save_file(dir + "/hashtag_latents.emb");
    world.user_latents.save_file(dir + "/user_latents.emb");
    world.user_catalog.save_file(dir + "/user_catalog.emb");
    write_lines(dir + "/histories.jsonl", histories_to_jsonl(world.histories));
}

SimWorld load_world(const std::string& dir) {
    std::vector<std::string> lines = read_lines(dir + "/world.json");
    std::string text;
    for (const std::string& l : lines) text += l + "\n";
    nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw DataError("bad world.json in " + dir);
    SimWorld w(world_config_from_json(j.at("config")));
    try {
        w.t0 = j.at("t0").get<int64_t>();
        w.t_end = j.at("t_end").get<int64_t>();
        w.product_cluster = j.at("product_cluster").get<std::vector<int>>();
        w.video_cluster = j.at("video_cluster").get<std::vector<int>>();
        w.user_cluster = j.at("user_cluster").get<std::vector<int>>();
        w.attention_budget_ms = j.at("attention_budget_ms").get<std::vector<double>>();
        w.fallback = j.at("fallback").get<Embedding>();
    } catch (const nlohmann::json::exception& e) {
        throw DataError("bad world.json in " + dir + ": " + e.what());
    }
    w.index = VideoIndex::load_file(dir + "/index.vix");
    w.product_latents = TableProvider::load_file(dir + "/product_latents.emb", "product_latents");
    w.product_content = TableProvider::load_file(dir + "/product_content.emb", "product_content");
    w.hashtag_latents = TableProvider::load_file(dir + "/hashtag_latents.emb", "hashtag_latents");
    w.user_latents = TableProvider::load_file(dir + "/user_latents.emb", "user_latents");
    w.user_catalog = TableProvider::load_file(dir + "/user_catalog.emb", "user_catalog");
    w.histories = histories_from_jsonl(read_lines(dir + "/histories.jsonl"));
    if (w.histories.size() != static_cast<size_t>(w.cfg.n_users))
        throw DataError("history count does not match config in " + dir);
    if (w.attention_budget_ms.size() != static_cast<size_t>(w.cfg.n_users) ||
        w.user_cluster.size() != static_cast<size_t>(w.cfg.n_users) ||
        w.video_cluster.size() != static_cast<size_t>(w.cfg.n_videos) ||
        w.product_cluster.size() != static_cast<size_t>(w.cfg.n_products))
        throw DataError("world arrays do not match config in " + dir);
    validate_embedding(w.fallback, static_cast<size_t>(w.cfg.d));
    return w;
}

std::vector<std::string> impressions_to_jsonl(const ImpressionLog& log) {
    std::vector<std::string> lines;
    lines.reserve(log.size());
    for (const Impression& im : log) {
        nlohmann::json j;
        j["feed_id"] = im.feed_id;
        j["user_id"] = im.user_id;
        j["video_id"] = im.video_id;
        j["position"] = im.position;
        j["examined"] = im.examined;
        j["watch_ms"] = im.watch_ms;
        j["duration_ms"] = im.duration_ms;
        j["ts"] = im.ts;
        lines.push_back(j.dump());
    }
    return lines;
}

ImpressionLog impressions_from_jsonl(const std::vector<std::string>& lines) {
    ImpressionLog log;
    log.reserve(lines.size());
    for (size_t i = 0; i < lines.size(); ++i) {
        nlohmann::json j = nlohmann::json::parse(lines[i], nullptr, false);
        if (j.is_discarded() || !j.is_object())
            throw DataError("bad impression on line " + std::to_string(i + 1));
        try {
            Impression im;
            im.feed_id = j.at("feed_id").get<uint64_t>();
            im.user_id = j.at("user_id").get<uint64_t>();
            im.video_id = j.at("video_id").get<uint64_t>();
            im.position = j.at("position").get<int>();
            im.examined = j.at("examined").get<bool>();
            im.watch_ms = j.at("watch_ms").get<uint32_t>();
            im.duration_ms = j.at("duration_ms").get<uint32_t>();
            im.ts = j.at("ts").get<int64_t>();
            if (im.position < 1) throw DataError("position must be >= 1");
            if (im.watch_ms > im.duration_ms) throw DataError("watch_ms exceeds duration_ms");
            if (!im.examined && im.watch_ms != 0) throw DataError("unexamined row with watch time");
            log.push_back(im);
        } catch (const nlohmann::json::exception& e) {
            throw DataError("bad impression on line " + std::to_string(i + 1) + ": " + e.what());
        }
    }
    return log;
}

double examination_probability(int position, double gamma) {
    if (position < 1) throw std::invalid_argument("position must be >= 1");
    if (gamma < 0.0) throw std::invalid_argument("gamma must be >= 0");
    return std::pow(static_cast<double>(position), -gamma);
}

ImpressionLog simulate_feed(const SimWorld& world, const RankedFeed& feed, uint64_t feed_id,
                            int64_t ts) {
    const Embedding& latent = world.user_latent(feed.user_id);
    const double budget = world.budget_of(feed.user_id);
    Rng exam_rng = named_stream(world.cfg.seed, "examination", feed_id);
    Rng watch_rng = named_stream(world.cfg.seed, "watch", feed_id);
    ImpressionLog out;
    out.reserve(feed.items.size());
    for (const RankedItem& item : feed.items) {
        const VideoRecord& rec = world.index.get(item.video_id);
        bool examined =
            exam_rng.uniform() < examination_probability(item.position, world.cfg.gamma);
        uint32_t watch_ms = 0;
        if (examined) {
            double r = std::max(0.0, cosine(latent, rec.embedding));
            double eps = watch_rng.normal(0.0, world.cfg.noise_sigma);
            long long rounded = std::llround(budget * r * (1.0 + eps));
            if (rounded < 0) rounded = 0;
            watch_ms = static_cast<uint32_t>(
                std::min<long long>(rounded, static_cast<long long>(rec.duration_ms)));
        }
        out.push_back({feed_id, feed.user_id, item.video_id, item.position, examined, watch_ms,
                       rec.duration_ms, ts});
    }
    return out;
}

ImpressionLog simulate_logging_phase(const SimWorld& world, int k, int sessions_per_user) {
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (sessions_per_user < 1) throw std::invalid_argument("sessions_per_user must be >= 1");
    ImpressionLog log;
    log.reserve(static_cast<size_t>(world.cfg.n_users) * static_cast<size_t>(sessions_per_user) *
                static_cast<size_t>(k));
    const int64_t half = world.t0 + (world.t_end - world.t0) / 2;
    const uint64_t span = static_cast<uint64_t>(world.t_end - half);
    uint64_t feed_id = 0;
    for (int i = 0; i < world.cfg.n_users; ++i) {
        uint64_t uid = static_cast<uint64_t>(i) + 1;
        Rng session_rng = named_stream(world.cfg.seed, "sessions", uid);
        std::vector<int64_t> times(static_cast<size_t>(sessions_per_user));
        for (int64_t& t : times) t = half + static_cast<int64_t>(session_rng.uniform_index(span));
        std::sort(times.begin(), times.end());
        for (int64_t ts : times) {
            RankedFeed feed = rank_recency(world.index, static_cast<size_t>(k), ts);
            feed.user_id = uid;
            ImpressionLog imps = simulate_feed(world, feed, ++feed_id, ts);
            log.insert(log.end(), imps.begin(), imps.end());
        }
    }
    return log;
}

std::vector<TrainingExample> training_examples_from_log(const ImpressionLog& log,
                                                        const EmbeddingProvider& user_embs) {
    std::vector<TrainingExample> examples;
    examples.reserve(log.size());
    for (const Impression& im : log) {
        TrainingExample ex;
        ex.user_embedding = user_embs.get(im.user_id);
        ex.video_id = im.video_id;
        ex.label = static_cast<uint64_t>(im.watch_ms) * 2 >= im.duration_ms;
        examples.push_back(std::move(ex));
    }
    return examples;
}

namespace {

double skew_or_zero(const std::vector<double>& xs) {
    if (xs.size() < 3) return 0.0;
    if (population_variance(xs) == 0.0) return 0.0;
    return skewness(xs);
}

}  // namespace

LoopReport run_feedback_loop(const SimWorld& world, const LoopConfig& cfg) {
    if (cfg.rounds < 1) throw std::invalid_argument("rounds must be >= 1");
    if (cfg.k < 1) throw std::invalid_argument("k must be >= 1");
    if (cfg.retrain_every < 1) throw std::invalid_argument("retrain_every must be >= 1");

    LoopReport report;
    report.policy = cfg.policy;
    const int64_t t_serve = world.t_end - 1;

    ProfileConfig profile_cfg = cfg.profile;
    if (profile_cfg.fallback.empty()) profile_cfg.fallback = world.fallback;

    VideoFeatureSpec spec;
    std::unordered_map<uint64_t, std::vector<double>> features;
    std::optional<VideoIndex> tower;  // conventional scoring index, rebuilt on retrain
    if (cfg.policy == Policy::conventional) {
        std::vector<uint32_t> durations;
        durations.reserve(world.index.size());
        for (const VideoRecord& r : world.index.records()) durations.push_back(r.duration_ms);
        spec.duration_edges = VideoFeatureSpec::quantile_edges(durations, spec.duration_buckets);
        spec.product_dim = world.cfg.d;
        spec.hashtag_dim = world.cfg.d;
        features = featurize_catalog(world.index, world.product_latents, world.hashtag_latents, spec);
        // Seed the training corpus with a neutral logging phase so round 1
        // already serves the trained policy; drift is then measured between
        // models, not against an arbitrary bootstrap list.
        report.log = simulate_logging_phase(world, cfg.k, world.cfg.sessions_per_user);
    }

    // Loop feeds use their own id range so their random streams never collide
    // with the logging phase above (feed ids from 1 on the same world).
    uint64_t feed_id = 1ull << 32;

    for (int round = 1; round <= cfg.rounds; ++round) {
        if (cfg.policy == Policy::conventional && (round - 1) % cfg.retrain_every == 0) {
            try {
                std::vector<TrainingExample> examples =
                    training_examples_from_log(report.log, world.user_catalog);
                ConventionalModel model =
                    train_conventional(examples, features, spec, world.cfg.d, cfg.hyper);
                tower = build_tower_index(model, world.index, features);
            } catch (const std::exception& e) {
                throw DataError("round " + std::to_string(round) + ": " + e.what());
            }
        }

        std::vector<double> exposure(world.index.size(), 0.0);
        double duration_sum = 0.0;
        size_t item_count = 0;
        size_t round_impressions = 0;
        for (int i = 0; i < world.cfg.n_users; ++i) {
            uint64_t uid = static_cast<uint64_t>(i) + 1;
            RankedFeed feed;
            switch (cfg.policy) {
                case Policy::recency:
                    feed = rank_recency(world.index, static_cast<size_t>(cfg.k));
                    feed.user_id = uid;
                    break;
                case Policy::multimodal:
                    feed = rank_multimodal(world.index, world.history_of(uid),
                                           world.product_latents, t_serve, profile_cfg,
                                           static_cast<size_t>(cfg.k));
                    break;
                case Policy::conventional:
                    feed = feed_from_tower(*tower, world.user_catalog.get(uid),
                                           static_cast<size_t>(cfg.k));
                    feed.user_id = uid;
                    break;
            }
            for (const RankedItem& item : feed.items) {
                exposure[static_cast<size_t>(item.video_id - 1)] += 1.0;
                duration_sum += world.index.get(item.video_id).duration_ms;
                ++item_count;
            }
            ImpressionLog imps = simulate_feed(world, feed, feed_id++, t_serve);
            round_impressions += imps.size();
            report.log.insert(report.log.end(), imps.begin(), imps.end());
        }

        LoopRound r;
        r.round = round;
        r.mean_recommended_duration_ms =
            item_count == 0 ? 0.0 : duration_sum / static_cast<double>(item_count);
        r.skew_popularity = skew_or_zero(exposure);
        r.top_decile_share = top_share(exposure, 0.10);
        r.impressions = round_impressions;
        r.cumulative_log = report.log.size();
        report.rounds.push_back(r);
    }
    return report;
}

nlohmann::json loop_report_to_json(const LoopReport& report) {
    nlohmann::json j;
    j["policy"] = to_string(report.policy);
    j["rounds"] = report.rounds.size();
    nlohmann::json arr = nlohmann::json::object();
    std::vector<double> durations, skews, shares;
    std::vector<size_t> imps, cum;
    for (const LoopRound& r : report.rounds) {
        durations.push_back(r.mean_recommended_duration_ms);
        skews.push_back(r.skew_popularity);
        shares.push_back(r.top_decile_share);
        imps.push_back(r.impressions);
        cum.push_back(r.cumulative_log);
    }
    arr["mean_recommended_duration_ms"] = durations;
    arr["skew_popularity"] = skews;
    arr["top_decile_share"] = shares;
    arr["impressions"] = imps;
    arr["cumulative_log"] = cum;
    j["per_round"] = arr;
    return j;
}

}  // namespace vcg
