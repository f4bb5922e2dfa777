#include "vcg/experiment.hpp"

#include <algorithm>
#include <filesystem>
#include <map>
#include <optional>
#include <stdexcept>
#include <unordered_set>

#include "vcg/binio.hpp"
#include "vcg/errors.hpp"
#include "vcg/rankers.hpp"

namespace vcg {

namespace {

void write_text(const std::string& path, const std::string& text) {
    write_file_bytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

// Per-feed evaluation context kept alongside the LabeledFeed: who saw it,
// when, and which videos, so each policy can score the same items.
struct TestFeedCtx {
    uint64_t user_id = 0;
    int64_t ts = 0;
    std::vector<uint64_t> video_ids;
};

template <typename Fn>
auto stage(const std::string& name, Fn&& fn) {
    try {
        return fn();
    } catch (const std::invalid_argument& e) {
        throw DataError("experiment/" + name + ": " + e.what());
    } catch (const DataError& e) {
        throw DataError("experiment/" + name + ": " + e.what());
    }
}

}  // namespace

std::vector<Policy> parse_policy_list(const std::string& csv) {
    std::vector<Policy> out;
    size_t start = 0;
    while (start <= csv.size()) {
        size_t comma = csv.find(',', start);
        std::string part =
            comma == std::string::npos ? csv.substr(start) : csv.substr(start, comma - start);
        size_t a = part.find_first_not_of(" \t");
        size_t b = part.find_last_not_of(" \t");
        if (a == std::string::npos) throw UsageError("empty policy name in list: " + csv);
        Policy p = policy_from_string(part.substr(a, b - a + 1));
        if (std::find(out.begin(), out.end(), p) != out.end())
            throw UsageError("duplicate policy in list: " + csv);
        out.push_back(p);
        if (comma == std::string::npos) break;
        start = comma + 1;
    }
    if (out.empty()) throw UsageError("no policies requested");
    return out;
}

ExperimentOutput run_experiment(const SimWorld& world, const RunConfig& cfg,
                                const std::vector<Policy>& policies) {
    if (policies.empty()) throw UsageError("no policies requested");

    ProfileConfig pcfg = cfg.profile;
    if (pcfg.fallback.empty()) pcfg.fallback = world.fallback;

    ImpressionLog log = stage("logging", [&] {
        return simulate_logging_phase(world, static_cast<int>(cfg.ranker.k),
                                      world.cfg.sessions_per_user);
    });
    TimeSplit split = stage("split", [&] { return time_split(log, cfg.eval.holdout_days); });

    double gamma = world.cfg.gamma;
    if (cfg.eval.propensities == "fitted")
        gamma = stage("fit-gamma", [&] { return fit_gamma(split.train); });

    // Serving happens at each user's last logged session, so every policy
    // sees the catalog as it stood inside the holdout window.
    std::vector<int64_t> last_ts(static_cast<size_t>(world.cfg.n_users) + 1, 0);
    for (const Impression& im : log)
        last_ts[im.user_id] = std::max(last_ts[im.user_id], im.ts);

    bool wants_conventional =
        std::find(policies.begin(), policies.end(), Policy::conventional) != policies.end();
    std::optional<VideoFeatureSpec> spec;
    std::unordered_map<uint64_t, std::vector<double>> features;
    std::optional<ConventionalModel> model;
    VideoIndex tower;
    if (wants_conventional) {
        stage("train-conventional", [&] {
            VideoFeatureSpec s;
            std::vector<uint32_t> durations;
            durations.reserve(world.index.size());
            for (const VideoRecord& r : world.index.records()) durations.push_back(r.duration_ms);
            s.duration_edges = VideoFeatureSpec::quantile_edges(durations, s.duration_buckets);
            s.product_dim = world.product_latents.dimension();
            s.hashtag_dim = world.hashtag_latents.dimension();
            spec = s;
            features = featurize_catalog(world.index, world.product_latents,
                                         world.hashtag_latents, s);
            std::vector<TrainingExample> examples =
                training_examples_from_log(split.train, world.user_catalog);
            model = train_conventional(examples, features, s, world.cfg.d, cfg.ranker.hyper);
            tower = build_tower_index(*model, world.index, features);
            return 0;
        });
    }

    // Examined test impressions become labeled feeds; propensities follow the
    // original served position even though unexamined rows drop out.
    std::map<uint64_t, std::vector<const Impression*>> grouped;
    for (const Impression& im : split.test) grouped[im.feed_id].push_back(&im);
    std::vector<LabeledFeed> test_feeds;
    std::vector<TestFeedCtx> contexts;
    for (auto& [feed_id, imps] : grouped) {
        std::sort(imps.begin(), imps.end(),
                  [](const Impression* a, const Impression* b) { return a->position < b->position; });
        LabeledFeed lf;
        lf.feed_id = feed_id;
        TestFeedCtx ctx;
        for (const Impression* im : imps) {
            if (!im->examined) continue;
            LabeledItem item;
            item.video_id = im->video_id;
            item.label = static_cast<uint64_t>(im->watch_ms) * 2 >= im->duration_ms ? 1 : 0;
            item.position = static_cast<int>(lf.items.size()) + 1;
            item.propensity = std::min(1.0, examination_probability(im->position, gamma));
            lf.items.push_back(item);
            ctx.user_id = im->user_id;
            ctx.ts = im->ts;
            ctx.video_ids.push_back(im->video_id);
        }
        if (lf.items.empty()) continue;
        test_feeds.push_back(std::move(lf));
        contexts.push_back(std::move(ctx));
    }

    ExperimentOutput out;
    out.split_ts = split.boundary_ts;
    out.n_train = split.train.size();
    out.n_test = split.test.size();
    out.propensity_gamma = gamma;
    if (model.has_value()) out.conventional_loss_curve = model->meta().loss_curve;

    for (Policy policy : policies) {
        std::string name = to_string(policy);
        PolicyRun run;
        run.policy = policy;

        stage("serve/" + name, [&] {
            for (int u = 1; u <= world.cfg.n_users; ++u) {
                uint64_t uid = static_cast<uint64_t>(u);
                int64_t t_u = last_ts[uid];
                RankedFeed feed;
                if (policy == Policy::recency) {
                    feed = rank_recency(world.index, cfg.ranker.k, t_u);
                } else {
                    std::unordered_set<uint64_t> not_yet_uploaded;
                    for (const VideoRecord& r : world.index.records())
                        if (r.upload_ts > static_cast<uint64_t>(t_u))
                            not_yet_uploaded.insert(r.video_id);
                    if (policy == Policy::multimodal) {
                        feed = rank_multimodal(world.index, world.history_of(uid).up_to(t_u),
                                               world.product_latents, t_u, pcfg, cfg.ranker.k,
                                               not_yet_uploaded);
                    } else {
                        feed = feed_from_tower(tower, world.user_catalog.get(uid), cfg.ranker.k,
                                               not_yet_uploaded);
                    }
                }
                feed.user_id = uid;
                ImpressionLog sim = simulate_feed(world, feed, kServeFeedIdBase + uid, t_u);
                std::vector<uint32_t> watch;
                watch.reserve(sim.size());
                for (const Impression& im : sim) watch.push_back(im.watch_ms);
                run.feeds.push_back(std::move(feed));
                run.watch_ms.push_back(std::move(watch));
            }
            return 0;
        });

        std::vector<std::vector<double>> scores = stage("score/" + name, [&] {
            std::vector<std::vector<double>> all;
            all.reserve(test_feeds.size());
            for (const TestFeedCtx& ctx : contexts) {
                std::vector<double> s;
                s.reserve(ctx.video_ids.size());
                Embedding profile;
                if (policy == Policy::multimodal)
                    profile = user_profile(world.history_of(ctx.user_id).up_to(ctx.ts),
                                           world.product_latents, ctx.ts, pcfg);
                for (uint64_t vid : ctx.video_ids) {
                    const VideoRecord& rec = world.index.get(vid);
                    switch (policy) {
                        case Policy::recency:
                            s.push_back(static_cast<double>(rec.upload_ts));
                            break;
                        case Policy::multimodal:
                            s.push_back(dot_score(profile, rec.embedding));
                            break;
                        case Policy::conventional:
                            s.push_back(sigmoid(model->logit(world.user_catalog.get(ctx.user_id),
                                                             features.at(vid))));
                            break;
                    }
                }
                all.push_back(std::move(s));
            }
            return all;
        });

        run.report = stage("evaluate/" + name, [&] {
            PolicyEvalInput input;
            input.policy_name = name;
            input.recommendations = run.feeds;
            input.rec_watch_ms = run.watch_ms;
            input.test_feeds = test_feeds;
            input.test_scores = std::move(scores);
            input.propensity_cap = cfg.eval.propensity_cap;
            input.threshold = cfg.eval.threshold;
            input.exposure_k = cfg.eval.exposure_k;
            input.coherence_k = cfg.eval.coherence_k;
            input.split_ts = split.boundary_ts;
            return evaluate_policy(input, world.index, world.product_content, world.histories);
        });

        out.runs.push_back(std::move(run));
    }

    std::vector<EvalReport> reports;
    reports.reserve(out.runs.size());
    for (const PolicyRun& run : out.runs) reports.push_back(run.report);
    out.table = eval_comparison_table(reports);
    return out;
}

nlohmann::json write_experiment_outputs(const ExperimentOutput& out, const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);
    nlohmann::json resolved = run_config_to_json(cfg);

    nlohmann::json reports = nlohmann::json::object();
    for (const PolicyRun& run : out.runs) {
        std::string name = to_string(run.policy);
        nlohmann::json report_doc{{"seed", cfg.seed},
                                  {"config", resolved},
                                  {"report", eval_report_to_json(run.report)}};
        write_text(cfg.out_dir + "/report_" + name + ".json", report_doc.dump(2) + "\n");

        nlohmann::json feeds = nlohmann::json::array();
        for (const RankedFeed& f : run.feeds) {
            nlohmann::json items = nlohmann::json::array();
            for (const RankedItem& it : f.items)
                items.push_back(
                    {{"video_id", it.video_id}, {"score", it.score}, {"position", it.position}});
            feeds.push_back({{"user_id", f.user_id}, {"items", std::move(items)}});
        }
        nlohmann::json feeds_doc{{"seed", cfg.seed},
                                 {"config", resolved},
                                 {"policy", name},
                                 {"feeds", std::move(feeds)}};
        write_text(cfg.out_dir + "/feeds_" + name + ".json", feeds_doc.dump(2) + "\n");

        reports[name] = eval_report_to_json(run.report);
    }

    nlohmann::json metrics{{"seed", cfg.seed},
                           {"config", resolved},
                           {"split_ts", out.split_ts},
                           {"n_train", out.n_train},
                           {"n_test", out.n_test},
                           {"propensity_gamma", out.propensity_gamma},
                           {"conventional_loss_curve", out.conventional_loss_curve},
                           {"reports", reports},
                           {"table", out.table}};
    write_text(cfg.out_dir + "/metrics.json", metrics.dump(2) + "\n");
    return metrics;
}

}  // namespace vcg
