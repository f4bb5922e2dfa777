#include <algorithm>
#include <cmath>
#include <filesystem>
#include <unordered_map>
#include <vector>

#include <doctest.h>

#include "vcg/embedding.hpp"
#include "vcg/errors.hpp"
#include "vcg/index.hpp"
#include "vcg/rankers.hpp"
#include "vcg/rng.hpp"

using namespace vcg;

namespace {

std::vector<VideoRecord> clustered_videos(size_t n, size_t d, uint64_t seed) {
    Rng rng(seed);
    std::vector<VideoRecord> records(n);
    for (size_t i = 0; i < n; ++i) {
        records[i].video_id = i + 1;
        records[i].embedding.resize(d);
        for (double& x : records[i].embedding) x = rng.normal();
        records[i].duration_ms = 10'000 + static_cast<uint32_t>(rng.uniform_index(90'000));
        records[i].upload_ts = 1'700'000'000'000ull + rng.uniform_index(7ull * 86'400'000);
        records[i].creator_id = 1 + rng.uniform_index(20);
        records[i].product_ids = {1 + rng.uniform_index(10)};
        records[i].hashtags = {"t" + std::to_string(rng.uniform_index(6))};
    }
    return records;
}

// Pairwise Mann-Whitney oracle, quadratic and obviously correct.
double auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
    double wins = 0.0;
    size_t np = 0, nn = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!labels[i]) continue;
        ++np;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (labels[j]) continue;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    nn = scores.size() - np;
    return wins / (static_cast<double>(np) * static_cast<double>(nn));
}

struct GradFixture {
    VideoFeatureSpec spec;
    std::unordered_map<uint64_t, std::vector<double>> features;
    std::vector<TrainingExample> examples;
};

GradFixture small_fixture(uint64_t seed) {
    GradFixture fx;
    fx.spec.duration_buckets = 2;
    fx.spec.duration_edges = {30'000};
    fx.spec.creator_buckets = 2;
    fx.spec.product_dim = 2;
    fx.spec.hashtag_dim = 0;

    TableProvider products("products", 2);
    Rng rng(seed);
    for (uint64_t pid = 1; pid <= 5; ++pid) products.put(pid, {rng.normal(), rng.normal()});
    // hashtag_dim 0 removes the block entirely; the provider just needs to exist.
    TableProvider hashtags("hashtags", 1);

    for (uint64_t vid = 1; vid <= 5; ++vid) {
        VideoRecord r;
        r.video_id = vid;
        r.duration_ms = 10'000 + static_cast<uint32_t>(rng.uniform_index(80'000));
        r.creator_id = vid;
        r.product_ids = {vid};
        fx.features[vid] = featurize_video(r, products, hashtags, fx.spec);
    }
    for (int i = 0; i < 10; ++i) {
        TrainingExample ex;
        ex.user_embedding = {rng.normal(), rng.normal(), rng.normal()};
        ex.video_id = 1 + rng.uniform_index(5);
        ex.label = rng.uniform() < 0.5;
        fx.examples.push_back(ex);
    }
    return fx;
}

// Central-difference gradient on the full parameter vector.
void check_gradients(ConventionalModel& model, const GradFixture& fx) {
    std::vector<double> grad;
    model.loss_and_grad(fx.examples, fx.features, &grad);
    REQUIRE(grad.size() == model.params().size());
    const double h = 1e-6;
    for (size_t i = 0; i < model.params().size(); ++i) {
        double saved = model.params()[i];
        model.params()[i] = saved + h;
        double up = model.loss_and_grad(fx.examples, fx.features, nullptr);
        model.params()[i] = saved - h;
        double down = model.loss_and_grad(fx.examples, fx.features, nullptr);
        model.params()[i] = saved;
        double fd = (up - down) / (2.0 * h);
        double denom = std::max({std::abs(grad[i]), std::abs(fd), 1e-8});
        CHECK(std::abs(grad[i] - fd) / denom < 1e-5);
    }
}

}  // namespace

TEST_CASE("recency ranks by upload time with id tie-breaks") {
    std::vector<VideoRecord> records(4);
    uint64_t ts[4] = {100, 300, 300, 200};
    for (size_t i = 0; i < 4; ++i) {
        records[i].video_id = i + 1;
        records[i].embedding = {1.0};
        records[i].duration_ms = 1000;
        records[i].upload_ts = ts[i];
    }
    VideoIndex index = VideoIndex::build(records);
    RankedFeed feed = rank_recency(index, 4);
    REQUIRE(feed.items.size() == 4);
    CHECK(feed.items[0].video_id == 2);  // ts 300, lower id wins the tie
    CHECK(feed.items[1].video_id == 3);
    CHECK(feed.items[2].video_id == 4);
    CHECK(feed.items[3].video_id == 1);
    CHECK(feed.items[0].position == 1);
    CHECK(feed.items[3].position == 4);
    CHECK(feed.items[0].score == 300.0);
    CHECK(feed.policy == Policy::recency);
}

TEST_CASE("recency as_of hides later uploads") {
    auto records = clustered_videos(30, 4, 2);
    VideoIndex index = VideoIndex::build(records);
    int64_t cutoff = static_cast<int64_t>(records[10].upload_ts);
    RankedFeed feed = rank_recency(index, 30, cutoff);
    for (const RankedItem& it : feed.items)
        CHECK(index.get(it.video_id).upload_ts <= static_cast<uint64_t>(cutoff));
    RankedFeed all = rank_recency(index, 30);
    CHECK(all.items.size() == 30);
    CHECK(feed.items.size() < all.items.size());
}

TEST_CASE("multimodal feed is exactly profile composed with top_k") {
    auto records = clustered_videos(50, 3, 5);
    VideoIndex index = VideoIndex::build(records);
    TableProvider products("products", 3);
    Rng rng(8);
    for (uint64_t pid = 1; pid <= 10; ++pid)
        products.put(pid, {rng.normal(), rng.normal(), rng.normal()});

    UserHistory h;
    h.user_id = 77;
    h.events = {{3, 1'700'000'000'000, InteractionKind::click},
                {7, 1'700'000'100'000, InteractionKind::purchase}};
    ProfileConfig cfg;
    int64_t t_now = 1'700'000'200'000;
    std::unordered_set<uint64_t> exclude{1, 2, 3};

    RankedFeed feed = rank_multimodal(index, h, products, t_now, cfg, 10, exclude);
    Embedding profile = user_profile(h, products, t_now, cfg);
    auto want = index.top_k(profile, 10, exclude);

    CHECK(feed.user_id == 77);
    CHECK(feed.policy == Policy::multimodal);
    REQUIRE(feed.items.size() == want.size());
    for (size_t i = 0; i < want.size(); ++i) {
        CHECK(feed.items[i].video_id == want[i].video_id);
        CHECK(feed.items[i].score == want[i].score);
        CHECK(feed.items[i].position == static_cast<int>(i) + 1);
    }
}

TEST_CASE("empty history with a fallback profile still retrieves") {
    auto records = clustered_videos(20, 2, 6);
    VideoIndex index = VideoIndex::build(records);
    TableProvider products("products", 2);
    ProfileConfig cfg;
    cfg.fallback = {0.5, -0.25};
    UserHistory empty;
    RankedFeed feed = rank_multimodal(index, empty, products, 0, cfg, 5);
    REQUIRE(feed.items.size() == 5);
    auto want = index.top_k(cfg.fallback, 5);
    for (size_t i = 0; i < 5; ++i) CHECK(feed.items[i].video_id == want[i].video_id);
}

TEST_CASE("quantile edges split the catalog into equal-count buckets") {
    std::vector<uint32_t> durations;
    for (uint32_t v = 1; v <= 100; ++v) durations.push_back(v * 1000);
    auto edges = VideoFeatureSpec::quantile_edges(durations, 4);
    REQUIRE(edges.size() == 3);
    CHECK(edges[0] == 26'000);
    CHECK(edges[1] == 51'000);
    CHECK(edges[2] == 76'000);

    VideoFeatureSpec spec;
    spec.duration_buckets = 4;
    spec.duration_edges = edges;
    CHECK(spec.duration_bucket(10'000) == 0);
    CHECK(spec.duration_bucket(25'999) == 0);
    CHECK(spec.duration_bucket(26'000) == 1);  // an edge value opens the next bucket
    CHECK(spec.duration_bucket(99'000) == 3);
    CHECK_THROWS_AS(VideoFeatureSpec::quantile_edges({}, 4), std::invalid_argument);
}

TEST_CASE("feature vector layout is one-hot blocks then pooled embeddings") {
    VideoFeatureSpec spec;
    spec.duration_buckets = 2;
    spec.duration_edges = {30'000};
    spec.creator_buckets = 4;
    spec.product_dim = 2;
    spec.hashtag_dim = 2;
    CHECK(spec.feature_dim() == 2 + 4 + 2 + 2);

    TableProvider products("products", 2);
    products.put(1, {1.0, 2.0});
    products.put(2, {3.0, 4.0});
    TableProvider hashtags("hashtags", 2);
    hashtags.put(hashtag_key("alpha"), {-1.0, 0.5});

    VideoRecord r;
    r.video_id = 9;
    r.duration_ms = 45'000;
    r.creator_id = 13;
    r.product_ids = {1, 2, 999};  // 999 is unknown and must be skipped
    r.hashtags = {"alpha", "missing"};

    auto f = featurize_video(r, products, hashtags, spec);
    REQUIRE(f.size() == 10);
    CHECK(f[0] == 0.0);
    CHECK(f[1] == 1.0);  // 45s falls in the upper duration bucket
    int cb = spec.creator_bucket(13);
    for (int i = 0; i < 4; ++i) CHECK(f[2 + i] == (i == cb ? 1.0 : 0.0));
    CHECK(f[6] == doctest::Approx(2.0));  // mean of 1 and 3
    CHECK(f[7] == doctest::Approx(3.0));  // mean of 2 and 4
    CHECK(f[8] == doctest::Approx(-1.0));
    CHECK(f[9] == doctest::Approx(0.5));
}

TEST_CASE("hashtag keys are stable and distinct") {
    CHECK(hashtag_key("c1_tag3") == hashtag_key("c1_tag3"));
    CHECK(hashtag_key("c1_tag3") != hashtag_key("c1_tag4"));
}

TEST_CASE("analytic gradients match central differences") {
    GradFixture fx = small_fixture(41);
    ConventionalModel plain(fx.spec, 3, false, 7);
    check_gradients(plain, fx);
}

TEST_CASE("analytic gradients match central differences with the hidden layer") {
    GradFixture fx = small_fixture(43);
    ConventionalModel hidden(fx.spec, 3, true, 11);
    check_gradients(hidden, fx);
}

TEST_CASE("loss_and_grad computes the stable binary cross-entropy") {
    GradFixture fx = small_fixture(47);
    ConventionalModel model(fx.spec, 3, false, 13);
    double loss = model.loss_and_grad(fx.examples, fx.features, nullptr);
    double want = 0.0;
    for (const TrainingExample& ex : fx.examples) {
        double z = model.logit(ex.user_embedding, fx.features.at(ex.video_id));
        // log(1 + e^z) - y*z, computed the naive way; inputs are small enough.
        want += std::log1p(std::exp(z)) - (ex.label ? z : 0.0);
    }
    want /= static_cast<double>(fx.examples.size());
    CHECK(loss == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("training is bit-for-bit deterministic in the seed") {
    GradFixture fx = small_fixture(53);
    TrainHyper hyper;
    hyper.epochs = 5;
    hyper.seed = 99;
    ConventionalModel a = train_conventional(fx.examples, fx.features, fx.spec, 3, hyper);
    ConventionalModel b = train_conventional(fx.examples, fx.features, fx.spec, 3, hyper);
    CHECK(a.params() == b.params());
    CHECK(a.meta().loss_curve == b.meta().loss_curve);

    hyper.seed = 100;
    ConventionalModel c = train_conventional(fx.examples, fx.features, fx.spec, 3, hyper);
    CHECK(a.params() != c.params());
}

TEST_CASE("training loss is non-increasing within tolerance") {
    GradFixture fx = small_fixture(59);
    TrainHyper hyper;
    hyper.epochs = 15;
    hyper.learning_rate = 0.1;
    ConventionalModel m = train_conventional(fx.examples, fx.features, fx.spec, 3, hyper);
    const auto& curve = m.meta().loss_curve;
    REQUIRE(curve.size() == 15);
    for (size_t i = 1; i < curve.size(); ++i) CHECK(curve[i] <= curve[i - 1] + 1e-3);
}

TEST_CASE("training rejects unimplemented objectives and sampling schemes") {
    GradFixture fx = small_fixture(61);
    TrainHyper hyper;
    hyper.objective = "contrastive";
    CHECK_THROWS_AS(train_conventional(fx.examples, fx.features, fx.spec, 3, hyper),
                    std::invalid_argument);
    hyper.objective = "bce";
    hyper.negatives_policy = "uniform";
    CHECK_THROWS_AS(train_conventional(fx.examples, fx.features, fx.spec, 3, hyper),
                    std::invalid_argument);
}

TEST_CASE("a separable taste problem trains to high AUC") {
    // Videos point in cardinal directions through their single product; users
    // are the same directions plus noise. Label: aligned direction.
    VideoFeatureSpec spec;
    spec.duration_buckets = 1;
    spec.creator_buckets = 1;
    spec.product_dim = 2;
    spec.hashtag_dim = 0;

    TableProvider products("products", 2);
    Rng rng(71);
    std::unordered_map<uint64_t, std::vector<double>> features;
    std::vector<Embedding> dirs = {{1, 0}, {0, 1}, {-1, 0}, {0, -1}};
    TableProvider hashtags("hashtags", 1);
    for (uint64_t vid = 1; vid <= 40; ++vid) {
        Embedding dir = dirs[vid % 4];
        products.put(vid, {dir[0] + 0.1 * rng.normal(), dir[1] + 0.1 * rng.normal()});
        VideoRecord r;
        r.video_id = vid;
        r.duration_ms = 20'000;
        r.creator_id = 1;
        r.product_ids = {vid};
        features[vid] = featurize_video(r, products, hashtags, spec);
    }

    std::vector<TrainingExample> examples;
    for (int u = 0; u < 30; ++u) {
        Embedding e_u = dirs[u % 4];
        e_u[0] += 0.1 * rng.normal();
        e_u[1] += 0.1 * rng.normal();
        for (uint64_t vid = 1; vid <= 40; ++vid) {
            TrainingExample ex;
            ex.user_embedding = e_u;
            ex.video_id = vid;
            ex.label = dot_score(e_u, products.get(vid)) > 0.3;
            examples.push_back(ex);
        }
    }

    TrainHyper hyper;
    hyper.epochs = 40;
    hyper.learning_rate = 0.5;
    ConventionalModel m = train_conventional(examples, features, spec, 2, hyper);

    std::vector<double> scores;
    std::vector<int> labels;
    for (const TrainingExample& ex : examples) {
        scores.push_back(m.score(ex.user_embedding, features.at(ex.video_id)));
        labels.push_back(ex.label ? 1 : 0);
    }
    CHECK(auc_oracle(scores, labels) > 0.95);
}

TEST_CASE("sigmoid is stable and order-preserving") {
    CHECK(sigmoid(0.0) == 0.5);
    CHECK(sigmoid(800.0) == doctest::Approx(1.0));
    CHECK(sigmoid(-800.0) == doctest::Approx(0.0));
    CHECK(sigmoid(-800.0) >= 0.0);
    CHECK(sigmoid(2.0) > sigmoid(1.0));
    CHECK(sigmoid(-1.0) == doctest::Approx(1.0 - sigmoid(1.0)));
}

TEST_CASE("conventional ranking equals the tower-index fast path") {
    GradFixture fx = small_fixture(83);
    std::vector<VideoRecord> records;
    for (const auto& [vid, f] : fx.features) {
        VideoRecord r;
        r.video_id = vid;
        r.embedding = {1.0, 0.0, 0.0};
        r.duration_ms = 15'000;
        records.push_back(r);
    }
    VideoIndex catalog = VideoIndex::build(records);

    TrainHyper hyper;
    hyper.epochs = 3;
    ConventionalModel m = train_conventional(fx.examples, fx.features, fx.spec, 3, hyper);
    VideoIndex tower = build_tower_index(m, catalog, fx.features);
    CHECK(tower.size() == catalog.size());

    Embedding e_u{0.3, -0.7, 1.1};
    std::unordered_set<uint64_t> exclude{2};
    RankedFeed direct = rank_conventional(m, catalog, fx.features, e_u, 3, exclude);
    RankedFeed fast = feed_from_tower(tower, e_u, 3, exclude);
    REQUIRE(direct.items.size() == fast.items.size());
    for (size_t i = 0; i < direct.items.size(); ++i) {
        CHECK(direct.items[i].video_id == fast.items[i].video_id);
        CHECK(direct.items[i].score == fast.items[i].score);
        CHECK(direct.items[i].position == fast.items[i].position);
    }
    CHECK(direct.policy == Policy::conventional);
    CHECK(fast.policy == Policy::conventional);
}

TEST_CASE("conventional scores are sigmoids of the logits, same ordering") {
    GradFixture fx = small_fixture(89);
    TrainHyper hyper;
    hyper.epochs = 3;
    ConventionalModel m = train_conventional(fx.examples, fx.features, fx.spec, 3, hyper);
    Embedding e_u{1.0, 0.5, -0.5};
    RankedFeed feed = rank_conventional(m, VideoIndex::build([&] {
        std::vector<VideoRecord> rs;
        for (const auto& [vid, f] : fx.features) {
            VideoRecord r;
            r.video_id = vid;
            r.embedding = {0.0, 0.0, 1.0};
            r.duration_ms = 10'000;
            rs.push_back(r);
        }
        return rs;
    }()), fx.features, e_u, 5);
    REQUIRE(feed.items.size() == 5);
    for (const RankedItem& it : feed.items) {
        double z = m.logit(e_u, fx.features.at(it.video_id));
        CHECK(it.score == sigmoid(z));
        CHECK(it.score > 0.0);
        CHECK(it.score < 1.0);
    }
    for (size_t i = 1; i < feed.items.size(); ++i)
        CHECK(feed.items[i - 1].score >= feed.items[i].score);
}

TEST_CASE("model snapshot round-trips at f32 parameter precision") {
    GradFixture fx = small_fixture(97);
    TrainHyper hyper;
    hyper.epochs = 4;
    ConventionalModel m = train_conventional(fx.examples, fx.features, fx.spec, 3, hyper);

    auto dir = std::filesystem::temp_directory_path() / "vcg_ranker_tests";
    std::filesystem::create_directories(dir);
    auto path = (dir / "model.bin").string();
    m.save_file(path);
    ConventionalModel back = ConventionalModel::load_file(path);

    CHECK(back.embedding_dim() == 3);
    CHECK(back.has_hidden_layer() == false);
    CHECK(back.spec().duration_edges == fx.spec.duration_edges);
    CHECK(back.meta().loss_curve == m.meta().loss_curve);
    REQUIRE(back.params().size() == m.params().size());
    for (size_t i = 0; i < m.params().size(); ++i)
        CHECK(back.params()[i] == static_cast<double>(static_cast<float>(m.params()[i])));
    std::filesystem::remove(path);
}

TEST_CASE("training example jsonl round-trip") {
    std::vector<TrainingExample> examples(2);
    examples[0].user_embedding = {0.5, -1.5};
    examples[0].video_id = 42;
    examples[0].label = true;
    examples[1].user_embedding = {1.0 / 3.0, 0.0};
    examples[1].video_id = 7;
    examples[1].label = false;
    auto lines = training_examples_to_jsonl(examples);
    auto back = training_examples_from_jsonl(lines);
    REQUIRE(back.size() == 2);
    CHECK(back[0].user_embedding == examples[0].user_embedding);
    CHECK(back[0].video_id == 42);
    CHECK(back[0].label == true);
    CHECK(back[1].label == false);
}

TEST_CASE("policy names round-trip") {
    for (Policy p : {Policy::recency, Policy::multimodal, Policy::conventional})
        CHECK(policy_from_string(to_string(p)) == p);
    CHECK_THROWS_AS(policy_from_string("hybrid"), std::invalid_argument);
}
