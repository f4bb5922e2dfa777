#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>
#include <unordered_set>

#include <doctest.h>

#include "vcg/embedding.hpp"
#include "vcg/errors.hpp"
#include "vcg/simulator.hpp"

using namespace vcg;

namespace {

WorldConfig tiny_config(uint64_t seed = 1) {
    WorldConfig cfg;
    cfg.seed = seed;
    cfg.n_users = 30;
    cfg.n_videos = 120;
    cfg.n_products = 40;
    cfg.d = 8;
    cfg.taste_clusters = 4;
    cfg.sessions_per_user = 2;
    return cfg;
}

}  // namespace

TEST_CASE("examination probability is the positional power law") {
    CHECK(examination_probability(1, 0.8) == 1.0);
    CHECK(examination_probability(2, 0.8) == doctest::Approx(std::pow(2.0, -0.8)));
    CHECK(examination_probability(5, 0.5) == doctest::Approx(1.0 / std::sqrt(5.0)));
    CHECK(examination_probability(9, 0.0) == 1.0);
    CHECK_THROWS_AS(examination_probability(0, 0.8), std::invalid_argument);
    CHECK_THROWS_AS(examination_probability(1, -0.1), std::invalid_argument);
}

TEST_CASE("config validation rejects inconsistent ranges") {
    WorldConfig cfg = tiny_config();
    cfg.duration_min_ms = 50'000;
    cfg.duration_max_ms = 10'000;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.taste_clusters = 0;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.n_products = 2;  // fewer products than clusters
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = tiny_config();
    cfg.explore_prob = 1.5;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    CHECK_NOTHROW(tiny_config().validate());
}

TEST_CASE("world config json round-trip") {
    WorldConfig cfg = tiny_config(17);
    cfg.gamma = 0.65;
    cfg.explore_prob = 0.2;
    WorldConfig back = world_config_from_json(world_config_to_json(cfg));
    CHECK(world_config_to_json(back) == world_config_to_json(cfg));
}

TEST_CASE("generated worlds are deterministic functions of the config") {
    SimWorld a = generate_world(tiny_config(5));
    SimWorld b = generate_world(tiny_config(5));
    CHECK(a.t0 == b.t0);
    CHECK(a.t_end == b.t_end);
    CHECK(a.user_cluster == b.user_cluster);
    CHECK(a.attention_budget_ms == b.attention_budget_ms);
    for (uint64_t pid = 1; pid <= 40; ++pid)
        CHECK(a.product_latents.get(pid) == b.product_latents.get(pid));
    for (uint64_t uid = 1; uid <= 30; ++uid) {
        CHECK(a.user_latents.get(uid) == b.user_latents.get(uid));
        REQUIRE(a.histories[uid - 1].events.size() == b.histories[uid - 1].events.size());
        for (size_t e = 0; e < a.histories[uid - 1].events.size(); ++e) {
            CHECK(a.histories[uid - 1].events[e].product_id ==
                  b.histories[uid - 1].events[e].product_id);
            CHECK(a.histories[uid - 1].events[e].ts == b.histories[uid - 1].events[e].ts);
        }
    }
    for (const VideoRecord& r : a.index.records()) {
        const VideoRecord& s = b.index.get(r.video_id);
        CHECK(r.embedding == s.embedding);
        CHECK(r.duration_ms == s.duration_ms);
        CHECK(r.upload_ts == s.upload_ts);
    }
}

TEST_CASE("world entities have the advertised shapes") {
    WorldConfig cfg = tiny_config(7);
    SimWorld w = generate_world(cfg);
    CHECK(w.index.size() == 120);
    CHECK(w.index.dimension() == 8);
    CHECK(w.product_latents.size() == 40);
    CHECK(w.product_content.dimension() == 4);
    CHECK(w.user_latents.size() == 30);
    CHECK(w.user_catalog.size() == 30);
    CHECK(w.histories.size() == 30);
    CHECK(w.attention_budget_ms.size() == 30);
    CHECK(w.t_end - w.t0 == 30ll * kDayMs);
    CHECK(w.t0 == kWorldEpochMs);

    for (const VideoRecord& r : w.index.records()) {
        CHECK(r.duration_ms >= cfg.duration_min_ms);
        CHECK(r.duration_ms <= cfg.duration_max_ms);
        CHECK(static_cast<int64_t>(r.upload_ts) >= w.t0);
        CHECK(static_cast<int64_t>(r.upload_ts) < w.t_end);
        CHECK(r.product_ids.size() >= 1);
        CHECK(r.product_ids.size() <= 5);
        CHECK(!r.hashtags.empty());
        for (uint64_t pid : r.product_ids) CHECK(w.product_latents.contains(pid));
        for (const std::string& tag : r.hashtags)
            CHECK(w.hashtag_latents.contains(hashtag_key(tag)));
    }
    for (int c : w.video_cluster) {
        CHECK(c >= 0);
        CHECK(c < 4);
    }
    for (double b : w.attention_budget_ms) CHECK(b > 0.0);
    for (size_t i = 0; i < w.histories.size(); ++i) {
        const UserHistory& h = w.histories[i];
        CHECK(h.user_id == i + 1);
        CHECK(h.events.size() >= static_cast<size_t>(cfg.min_history_events));
        CHECK(h.events.size() <= static_cast<size_t>(cfg.max_history_events));
        CHECK_NOTHROW(h.validate());
        for (const InteractionEvent& e : h.events) {
            CHECK(e.ts >= w.t0);
            CHECK(e.ts < w.t_end);
            CHECK(w.product_latents.contains(e.product_id));
        }
    }
}

TEST_CASE("world snapshot round-trips through a directory") {
    SimWorld w = generate_world(tiny_config(9));
    auto dir = std::filesystem::temp_directory_path() / "vcg_world_rt";
    std::filesystem::create_directories(dir);
    save_world(w, dir.string());
    SimWorld back = load_world(dir.string());

    CHECK(world_config_to_json(back.cfg) == world_config_to_json(w.cfg));
    CHECK(back.t0 == w.t0);
    CHECK(back.t_end == w.t_end);
    CHECK(back.user_cluster == w.user_cluster);
    CHECK(back.video_cluster == w.video_cluster);
    CHECK(back.product_cluster == w.product_cluster);
    CHECK(back.attention_budget_ms == w.attention_budget_ms);
    CHECK(back.fallback == w.fallback);
    CHECK(back.index.size() == w.index.size());
    CHECK(back.index.build_ts() == w.index.build_ts());
    // Generated embeddings are already f32-quantized, so the round-trip is exact.
    for (uint64_t pid = 1; pid <= 40; ++pid)
        CHECK(back.product_latents.get(pid) == w.product_latents.get(pid));
    for (uint64_t uid = 1; uid <= 30; ++uid)
        CHECK(back.user_catalog.get(uid) == w.user_catalog.get(uid));
    for (const VideoRecord& r : w.index.records())
        CHECK(back.index.get(r.video_id).embedding == r.embedding);
    REQUIRE(back.histories.size() == w.histories.size());
    for (size_t i = 0; i < w.histories.size(); ++i)
        CHECK(back.histories[i].events.size() == w.histories[i].events.size());
    std::filesystem::remove_all(dir);
}

TEST_CASE("simulated feeds are deterministic in the feed id") {
    SimWorld w = generate_world(tiny_config(11));
    RankedFeed feed = rank_recency(w.index, 10);
    feed.user_id = 3;
    ImpressionLog a = simulate_feed(w, feed, 555, w.t_end);
    ImpressionLog b = simulate_feed(w, feed, 555, w.t_end);
    REQUIRE(a.size() == b.size());
    for (size_t i = 0; i < a.size(); ++i) {
        CHECK(a[i].examined == b[i].examined);
        CHECK(a[i].watch_ms == b[i].watch_ms);
    }

    ImpressionLog c = simulate_feed(w, feed, 556, w.t_end);
    bool any_diff = false;
    for (size_t i = 0; i < a.size(); ++i)
        if (a[i].examined != c[i].examined || a[i].watch_ms != c[i].watch_ms) any_diff = true;
    CHECK(any_diff);
}

TEST_CASE("impressions carry feed metadata and never watch unexamined") {
    SimWorld w = generate_world(tiny_config(13));
    RankedFeed feed = rank_recency(w.index, 8);
    feed.user_id = 5;
    ImpressionLog log = simulate_feed(w, feed, 42, w.t0 + 1000);
    REQUIRE(log.size() == 8);
    for (size_t i = 0; i < log.size(); ++i) {
        const Impression& im = log[i];
        CHECK(im.feed_id == 42);
        CHECK(im.user_id == 5);
        CHECK(im.position == static_cast<int>(i) + 1);
        CHECK(im.video_id == feed.items[i].video_id);
        CHECK(im.duration_ms == w.index.get(im.video_id).duration_ms);
        CHECK(im.ts == w.t0 + 1000);
        CHECK(im.watch_ms <= im.duration_ms);
        if (!im.examined) CHECK(im.watch_ms == 0);
    }
    CHECK(log[0].examined);  // position 1 is always examined
}

TEST_CASE("watch time is the clamped budget-attention product") {
    WorldConfig cfg = tiny_config(15);
    cfg.noise_sigma = 0.0;  // makes the watch formula exact
    SimWorld w = generate_world(cfg);
    for (uint64_t uid = 1; uid <= 10; ++uid) {
        RankedFeed feed = rank_recency(w.index, 10);
        feed.user_id = uid;
        ImpressionLog log = simulate_feed(w, feed, 1000 + uid, w.t_end);
        for (const Impression& im : log) {
            if (!im.examined) continue;
            double r = std::max(0.0, cosine(w.user_latent(uid), w.index.get(im.video_id).embedding));
            auto want = static_cast<uint32_t>(std::min<long long>(
                std::llround(w.budget_of(uid) * r), static_cast<long long>(im.duration_ms)));
            CHECK(im.watch_ms == want);
        }
    }
}

TEST_CASE("examination rates follow the position power law") {
    WorldConfig cfg = tiny_config(19);
    SimWorld w = generate_world(cfg);
    RankedFeed feed = rank_recency(w.index, 5);
    feed.user_id = 1;
    const int trials = 10'000;
    std::vector<int> examined(5, 0);
    for (int t = 0; t < trials; ++t) {
        ImpressionLog log = simulate_feed(w, feed, 10'000 + static_cast<uint64_t>(t), w.t_end);
        for (size_t p = 0; p < 5; ++p)
            if (log[p].examined) ++examined[p];
    }
    for (int p = 1; p <= 5; ++p) {
        double rate = static_cast<double>(examined[p - 1]) / trials;
        CHECK(std::abs(rate - examination_probability(p, cfg.gamma)) < 0.02);
    }
}

TEST_CASE("logging phase covers every user session with recency feeds") {
    WorldConfig cfg = tiny_config(21);
    SimWorld w = generate_world(cfg);
    ImpressionLog log = simulate_logging_phase(w, 6, 2);
    CHECK(log.size() == 30u * 2u * 6u);

    const int64_t half = w.t0 + (w.t_end - w.t0) / 2;
    std::set<uint64_t> feed_ids;
    std::set<uint64_t> users;
    for (const Impression& im : log) {
        CHECK(im.ts >= half);
        CHECK(im.ts < w.t_end);
        CHECK(im.position >= 1);
        CHECK(im.position <= 6);
        // Served availability: nothing uploaded after the session time.
        CHECK(static_cast<int64_t>(w.index.get(im.video_id).upload_ts) <= im.ts);
        feed_ids.insert(im.feed_id);
        users.insert(im.user_id);
    }
    CHECK(feed_ids.size() == 60);
    CHECK(users.size() == 30);
}

TEST_CASE("training examples carry the watch-fraction label") {
    SimWorld w = generate_world(tiny_config(23));
    ImpressionLog log = simulate_logging_phase(w, 5, 1);
    auto examples = training_examples_from_log(log, w.user_catalog);
    REQUIRE(examples.size() == log.size());
    for (size_t i = 0; i < log.size(); ++i) {
        CHECK(examples[i].video_id == log[i].video_id);
        CHECK(examples[i].label ==
              (static_cast<uint64_t>(log[i].watch_ms) * 2 >= log[i].duration_ms));
        CHECK(examples[i].user_embedding == w.user_catalog.get(log[i].user_id));
    }
}

TEST_CASE("impression jsonl round-trip and validation") {
    SimWorld w = generate_world(tiny_config(27));
    ImpressionLog log = simulate_logging_phase(w, 4, 1);
    ImpressionLog back = impressions_from_jsonl(impressions_to_jsonl(log));
    REQUIRE(back.size() == log.size());
    for (size_t i = 0; i < log.size(); ++i) {
        CHECK(back[i].feed_id == log[i].feed_id);
        CHECK(back[i].user_id == log[i].user_id);
        CHECK(back[i].video_id == log[i].video_id);
        CHECK(back[i].position == log[i].position);
        CHECK(back[i].examined == log[i].examined);
        CHECK(back[i].watch_ms == log[i].watch_ms);
        CHECK(back[i].duration_ms == log[i].duration_ms);
        CHECK(back[i].ts == log[i].ts);
    }
    CHECK_THROWS_AS(impressions_from_jsonl({"{"}), DataError);
    CHECK_THROWS_AS(impressions_from_jsonl(
                        {R"({"feed_id":1,"user_id":1,"video_id":1,"position":1,)"
                         R"("examined":false,"watch_ms":5,"duration_ms":10,"ts":0})"}),
                    DataError);
}

TEST_CASE("a one-round recency loop logs exactly n_users * k impressions") {
    SimWorld w = generate_world(tiny_config(29));
    LoopConfig lc;
    lc.policy = Policy::recency;
    lc.rounds = 1;
    lc.k = 7;
    LoopReport report = run_feedback_loop(w, lc);
    REQUIRE(report.rounds.size() == 1);
    CHECK(report.rounds[0].impressions == 30u * 7u);
    CHECK(report.rounds[0].cumulative_log == 30u * 7u);
    CHECK(report.log.size() == 30u * 7u);
    CHECK(report.rounds[0].round == 1);
}

TEST_CASE("recency loop metrics are constant across rounds") {
    SimWorld w = generate_world(tiny_config(31));
    LoopConfig lc;
    lc.policy = Policy::recency;
    lc.rounds = 4;
    lc.k = 10;
    LoopReport report = run_feedback_loop(w, lc);
    REQUIRE(report.rounds.size() == 4);
    for (size_t r = 1; r < 4; ++r) {
        CHECK(report.rounds[r].mean_recommended_duration_ms ==
              report.rounds[0].mean_recommended_duration_ms);
        CHECK(report.rounds[r].skew_popularity == report.rounds[0].skew_popularity);
        CHECK(report.rounds[r].top_decile_share == report.rounds[0].top_decile_share);
        CHECK(report.rounds[r].impressions == report.rounds[0].impressions);
    }
    CHECK(report.log.size() == 4u * 30u * 10u);
}

TEST_CASE("conventional loop seeds a bootstrap log and accumulates rounds") {
    WorldConfig cfg = tiny_config(33);
    SimWorld w = generate_world(cfg);
    LoopConfig lc;
    lc.policy = Policy::conventional;
    lc.rounds = 2;
    lc.k = 5;
    lc.retrain_every = 1;
    lc.hyper.epochs = 3;
    LoopReport report = run_feedback_loop(w, lc);
    REQUIRE(report.rounds.size() == 2);
    size_t bootstrap = 30u * 2u * 5u;  // users * sessions_per_user * k
    CHECK(report.rounds[0].impressions == 30u * 5u);
    CHECK(report.rounds[0].cumulative_log == bootstrap + 30u * 5u);
    CHECK(report.rounds[1].cumulative_log == bootstrap + 2u * 30u * 5u);
    CHECK(report.log.size() == report.rounds[1].cumulative_log);
    CHECK(report.policy == Policy::conventional);
}

TEST_CASE("loop report serializes every round") {
    SimWorld w = generate_world(tiny_config(37));
    LoopConfig lc;
    lc.policy = Policy::recency;
    lc.rounds = 2;
    lc.k = 3;
    LoopReport report = run_feedback_loop(w, lc);
    nlohmann::json j = loop_report_to_json(report);
    CHECK(j.at("policy") == "recency");
    CHECK(j.at("rounds") == 2);
    const nlohmann::json& per_round = j.at("per_round");
    REQUIRE(per_round.at("impressions").size() == 2);
    CHECK(per_round.at("impressions")[0] == 90);
    CHECK(per_round.at("mean_recommended_duration_ms").size() == 2);
    CHECK(per_round.at("skew_popularity").size() == 2);
    CHECK(per_round.at("top_decile_share").size() == 2);
    CHECK(per_round.at("cumulative_log")[1] == 180);
}

TEST_CASE("loop rejects bad round counts") {
    SimWorld w = generate_world(tiny_config(39));
    LoopConfig lc;
    lc.rounds = 0;
    CHECK_THROWS_AS(run_feedback_loop(w, lc), std::invalid_argument);
}
