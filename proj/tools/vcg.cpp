#include <algorithm>
#include <filesystem>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "vcg/binio.hpp"
#include "vcg/config.hpp"
#include "vcg/errors.hpp"
#include "vcg/experiment.hpp"
#include "vcg/judge.hpp"
#include "vcg/rng.hpp"
#include "vcg/service.hpp"
#include "vcg/simulator.hpp"

namespace {

using namespace vcg;

struct CommonArgs {
    std::string config_path;
    std::string out_dir;
    std::string seed_str;
    std::vector<std::string> sets;
};

void add_common(CLI::App* sub, CommonArgs& c) {
    sub->add_option("--config", c.config_path, "JSON config file (defaults apply when omitted)");
    sub->add_option("--set", c.sets, "override a config value: section.key=value");
    sub->add_option("--out", c.out_dir, "output directory (shorthand for out_dir)");
    sub->add_option("--seed", c.seed_str, "master seed (shorthand for seed)");
}

RunConfig resolve(const CommonArgs& c) {
    std::vector<std::string> overrides;
    if (!c.seed_str.empty()) overrides.push_back("seed=" + c.seed_str);
    if (!c.out_dir.empty()) overrides.push_back("out_dir=" + c.out_dir);
    overrides.insert(overrides.end(), c.sets.begin(), c.sets.end());
    return load_run_config(c.config_path, overrides);
}

std::string world_dir(const RunConfig& cfg) { return cfg.out_dir + "/world"; }

void write_text(const std::string& path, const std::string& text) {
    write_file_bytes(path, std::vector<uint8_t>(text.begin(), text.end()));
}

std::string read_text(const std::string& path) {
    std::vector<uint8_t> bytes = read_file_bytes(path);
    return std::string(bytes.begin(), bytes.end());
}

ProfileConfig profile_with_fallback(const RunConfig& cfg, const SimWorld& world) {
    ProfileConfig pcfg = cfg.profile;
    if (pcfg.fallback.empty()) pcfg.fallback = world.fallback;
    return pcfg;
}

int cmd_gen(const RunConfig& cfg) {
    SimWorld world = generate_world(cfg.world);
    std::filesystem::create_directories(world_dir(cfg));
    save_world(world, world_dir(cfg));
    nlohmann::json bundle{{"seed", cfg.seed}, {"config", run_config_to_json(cfg)}};
    write_text(cfg.out_dir + "/config.json", bundle.dump(2) + "\n");
    std::cout << "world written to " << world_dir(cfg) << ": " << world.index.size()
              << " videos, " << cfg.world.n_users << " users, " << cfg.world.n_products
              << " products, d=" << cfg.world.d << "\n";
    return 0;
}

int cmd_index(const RunConfig& cfg) {
    SimWorld world = load_world(world_dir(cfg));
    world.index.save_file(world_dir(cfg) + "/index.vix");
    nlohmann::json info{{"size", world.index.size()}, {"build_ts", world.index.build_ts()}};
    std::cout << info.dump() << "\n";
    return 0;
}

int cmd_experiment(const RunConfig& cfg, const std::string& policies_csv) {
    SimWorld world = load_world(world_dir(cfg));
    std::vector<Policy> policies = parse_policy_list(policies_csv);
    ExperimentOutput out = run_experiment(world, cfg, policies);
    write_experiment_outputs(out, cfg);
    std::cout << out.table;
    std::cout << "train impressions: " << out.n_train << ", test impressions: " << out.n_test
              << ", outputs in " << cfg.out_dir << "\n";
    return 0;
}

int cmd_loop(const RunConfig& cfg, const std::string& policy_flag) {
    SimWorld world = load_world(world_dir(cfg));
    LoopConfig lc;
    lc.policy = policy_from_string(policy_flag.empty() ? cfg.loop.policy : policy_flag);
    lc.rounds = cfg.loop.rounds;
    lc.k = cfg.loop.k;
    lc.retrain_every = cfg.loop.retrain_every;
    lc.hyper = cfg.ranker.hyper;
    lc.profile = profile_with_fallback(cfg, world);
    LoopReport report = run_feedback_loop(world, lc);

    std::string name = to_string(lc.policy);
    nlohmann::json doc{{"seed", cfg.seed},
                       {"config", run_config_to_json(cfg)},
                       {"loop", loop_report_to_json(report)}};
    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/loop_" + name + ".json", doc.dump(2) + "\n");
    for (const LoopRound& r : report.rounds)
        std::cout << "round " << r.round
                  << ": mean_duration_ms=" << r.mean_recommended_duration_ms
                  << " skew_popularity=" << r.skew_popularity
                  << " top_decile_share=" << r.top_decile_share << "\n";
    return 0;
}

int cmd_judge(const RunConfig& cfg, const std::string& policy_name, size_t k,
              const std::string& mode) {
    policy_from_string(policy_name);  // validate before touching files
    SimWorld world = load_world(world_dir(cfg));

    std::string feeds_path = cfg.out_dir + "/feeds_" + policy_name + ".json";
    if (!std::filesystem::exists(feeds_path))
        throw DataError("no ranked feeds for policy " + policy_name + " at " + feeds_path +
                        "; run experiment first");
    nlohmann::json doc = nlohmann::json::parse(read_text(feeds_path));
    std::vector<RankedFeed> feeds;
    for (const nlohmann::json& f : doc.at("feeds")) {
        RankedFeed feed;
        feed.user_id = f.at("user_id").get<uint64_t>();
        feed.policy = policy_from_string(policy_name);
        for (const nlohmann::json& it : f.at("items")) {
            RankedItem item;
            item.video_id = it.at("video_id").get<uint64_t>();
            item.score = it.at("score").get<double>();
            item.position = it.at("position").get<int>();
            feed.items.push_back(item);
        }
        if (!feed.items.empty()) feeds.push_back(std::move(feed));
    }
    if (feeds.empty()) throw DataError("feeds file has no non-empty feeds: " + feeds_path);

    std::string template_text = read_text(cfg.judge.template_path);

    MockJudgeClient mock(world.product_latents, world.index);
    std::unique_ptr<HttpJudgeClient> live;
    JudgeClient* client = &mock;
    if (mode == "live") {
        live = std::make_unique<HttpJudgeClient>(HttpJudgeClient::from_env());
        client = live.get();
    }
    JudgeOptions opts;
    opts.max_retries = cfg.judge.max_retries;
    opts.backoff_ms = cfg.judge.backoff_ms;
    opts.in_flight_cap = cfg.judge.in_flight_cap;

    // Deterministic user sample, reported in ascending user order.
    std::vector<size_t> order(feeds.size());
    for (size_t i = 0; i < order.size(); ++i) order[i] = i;
    if (feeds.size() > cfg.judge.sample_users) {
        Rng rng = named_stream(cfg.seed, "judge-sample");
        rng.shuffle(order);
        order.resize(cfg.judge.sample_users);
    }
    std::sort(order.begin(), order.end(), [&](size_t a, size_t b) {
        return feeds[a].user_id < feeds[b].user_id;
    });

    std::vector<JudgeReport> reports;
    nlohmann::json per_user = nlohmann::json::array();
    size_t failed = 0;
    std::string first_error;
    for (size_t i : order) {
        const RankedFeed& feed = feeds[i];
        try {
            JudgeReport r = judge_topk(*client, world.history_of(feed.user_id), feed, k,
                                       template_text, world.index, opts);
            nlohmann::json scores = nlohmann::json::array();
            for (const JudgeVerdict& v : r.verdicts) scores.push_back(v.score);
            per_user.push_back({{"user_id", feed.user_id},
                                {"mean_score", r.mean_score},
                                {"scores", std::move(scores)}});
            reports.push_back(std::move(r));
        } catch (const TransportError& e) {
            ++failed;
            if (first_error.empty()) first_error = e.what();
            per_user.push_back({{"user_id", feed.user_id}, {"error", e.what()}});
        }
    }
    if (reports.empty())
        throw TransportError("every judged user failed; first error: " + first_error);

    double mean_of_means = 0.0;
    for (const JudgeReport& r : reports) mean_of_means += r.mean_score;
    mean_of_means /= static_cast<double>(reports.size());
    std::array<size_t, 5> hist = score_histogram(reports);

    nlohmann::json out{{"seed", cfg.seed},
                       {"config", run_config_to_json(cfg)},
                       {"policy", policy_name},
                       {"k", k},
                       {"mode", mode},
                       {"mean_score", mean_of_means},
                       {"histogram", hist},
                       {"n_users", reports.size()},
                       {"n_failed", failed},
                       {"per_user", std::move(per_user)}};
    std::filesystem::create_directories(cfg.out_dir);
    write_text(cfg.out_dir + "/judge_" + policy_name + ".json", out.dump(2) + "\n");
    std::cout << "judge " << policy_name << " k=" << k << " mean=" << mean_of_means
              << " histogram=" << nlohmann::json(hist).dump() << " failed=" << failed << "\n";
    return 0;
}

int cmd_serve(const RunConfig& cfg, const std::string& host, int port) {
    SimWorld world = load_world(world_dir(cfg));
    auto snapshot = std::make_shared<const ServiceSnapshot>(
        world.index, world.product_latents, profile_with_fallback(cfg, world), world.histories,
        world.t_end);
    RetrievalService service;
    service.load(snapshot);
    std::cout << "listening on http://" << host << ":" << port << " ("
              << snapshot->index.size() << " videos)\n"
              << std::flush;
    if (!service.listen(host, port))
        throw TransportError("could not bind " + host + ":" + std::to_string(port));
    return 0;
}

int cmd_report(const RunConfig& cfg) {
    std::string metrics_path = cfg.out_dir + "/metrics.json";
    if (!std::filesystem::exists(metrics_path))
        throw DataError("no metrics at " + metrics_path + "; run experiment first");
    nlohmann::json doc = nlohmann::json::parse(read_text(metrics_path));
    std::cout << doc.at("table").get<std::string>();
    for (const char* name : {"recency", "multimodal", "conventional"}) {
        std::string judge_path = cfg.out_dir + "/judge_" + std::string(name) + ".json";
        if (!std::filesystem::exists(judge_path)) continue;
        nlohmann::json j = nlohmann::json::parse(read_text(judge_path));
        std::cout << "judge " << name << ": k=" << j.at("k") << " mean=" << j.at("mean_score")
                  << " histogram=" << j.at("histogram").dump() << "\n";
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"short-form video retrieval experiments"};
    app.require_subcommand(1);

    CommonArgs gen_args, index_args, exp_args, loop_args, judge_args, serve_args, report_args;
    std::string policies_csv = "recency,multimodal,conventional";
    std::string loop_policy;
    std::string judge_policy;
    std::string judge_mode;
    size_t judge_k = 0;
    std::string host = "127.0.0.1";
    int port = 8080;
    int rc = 0;

    CLI::App* gen = app.add_subcommand("gen", "generate a world snapshot");
    add_common(gen, gen_args);
    gen->callback([&] { rc = cmd_gen(resolve(gen_args)); });

    CLI::App* index = app.add_subcommand("index", "rebuild the retrieval index and print stats");
    add_common(index, index_args);
    index->callback([&] { rc = cmd_index(resolve(index_args)); });

    CLI::App* experiment = app.add_subcommand("experiment", "run the offline evaluation");
    add_common(experiment, exp_args);
    experiment->add_option("--policies", policies_csv, "comma-separated policies to evaluate");
    experiment->callback([&] { rc = cmd_experiment(resolve(exp_args), policies_csv); });

    CLI::App* loop = app.add_subcommand("loop", "run the closed feedback loop");
    add_common(loop, loop_args);
    loop->add_option("--policy", loop_policy, "policy to loop (default from config)");
    loop->callback([&] { rc = cmd_loop(resolve(loop_args), loop_policy); });

    CLI::App* judge = app.add_subcommand("judge", "judge ranked feeds from a prior experiment");
    add_common(judge, judge_args);
    judge->add_option("--policy", judge_policy, "policy whose feeds to judge")->required();
    judge->add_option("--k", judge_k, "judge the top k items (default from config)");
    judge->add_option("--judge-mode", judge_mode, "mock or live")
        ->check(CLI::IsMember({"mock", "live"}));
    judge->callback([&] {
        RunConfig cfg = resolve(judge_args);
        rc = cmd_judge(cfg, judge_policy, judge_k == 0 ? cfg.judge.k : judge_k,
                       judge_mode.empty() ? cfg.judge.mode : judge_mode);
    });

    CLI::App* serve = app.add_subcommand("serve", "serve retrieval over HTTP");
    add_common(serve, serve_args);
    serve->add_option("--host", host, "bind address");
    serve->add_option("--port", port, "bind port");
    serve->callback([&] { rc = cmd_serve(resolve(serve_args), host, port); });

    CLI::App* report = app.add_subcommand("report", "print the comparison table of a prior run");
    add_common(report, report_args);
    report->callback([&] { rc = cmd_report(resolve(report_args)); });

    try {
        app.parse(argc, argv);
        return rc;
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const vcg::UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 2;
    } catch (const vcg::TransportError& e) {
        std::cerr << "transport error: " << e.what() << "\n";
        return 4;
    } catch (const vcg::UnparseableVerdict& e) {
        std::cerr << "judge error: " << e.what() << "\n";
        return 4;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
}
