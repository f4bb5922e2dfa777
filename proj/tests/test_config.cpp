#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <nlohmann/json.hpp>

#include "vcg/config.hpp"
#include "vcg/embedding.hpp"
#include "vcg/errors.hpp"

using namespace vcg;
using nlohmann::json;

namespace {

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

struct TempFile {
    std::filesystem::path path;

    explicit TempFile(const std::string& content) {
        path = std::filesystem::temp_directory_path() /
               ("vcg_cfg_" + std::to_string(std::rand()) + ".json");
        std::ofstream out(path, std::ios::binary);
        out << content;
    }
    ~TempFile() { std::filesystem::remove(path); }
};

}  // namespace

TEST_CASE("serialized defaults match the pinned fixture byte for byte") {
    // Guards against silent drift of any default value: the fixture is the
    // resolved form of an empty config.
    std::string expected = read_file(std::string(VCG_FIXTURES_DIR) + "/default_config.json");
    std::string actual = run_config_to_json(RunConfig{}).dump(2) + "\n";
    CHECK(actual == expected);
}

TEST_CASE("config serialization is a fixed point of parsing") {
    RunConfig defaults = run_config_from_json(json::object());
    CHECK(run_config_to_json(defaults) == run_config_to_json(RunConfig{}));

    RunConfig custom;
    custom.seed = 9;
    custom.out_dir = "elsewhere";
    custom.world.n_users = 50;
    custom.world.seed = 9;
    custom.profile.max_history = 12;
    custom.ranker.hyper.epochs = 3;
    custom.ranker.hyper.seed = 9;
    custom.eval.propensities = "fitted";
    custom.judge.k = 2;
    custom.loop.policy = "recency";
    json j = run_config_to_json(custom);
    CHECK(run_config_to_json(run_config_from_json(j)) == j);
}

TEST_CASE("master seed fills section seeds only when they are absent") {
    RunConfig a = run_config_from_json(json{{"seed", 42}});
    CHECK(a.seed == 42);
    CHECK(a.world.seed == 42);
    CHECK(a.ranker.hyper.seed == 42);

    RunConfig b = run_config_from_json(json{{"seed", 42}, {"world", {{"seed", 7}}}});
    CHECK(b.world.seed == 7);
    CHECK(b.ranker.hyper.seed == 42);

    RunConfig c = run_config_from_json(json{{"seed", 42}, {"ranker", {{"seed", 5}}}});
    CHECK(c.world.seed == 42);
    CHECK(c.ranker.hyper.seed == 5);
}

TEST_CASE("unknown config keys are rejected by name") {
    auto message_of = [](const json& j) {
        try {
            run_config_from_json(j);
            return std::string("(no error)");
        } catch (const UsageError& e) {
            return std::string(e.what());
        }
    };
    CHECK(message_of(json{{"bogus", 1}}).find("config.bogus") != std::string::npos);
    CHECK(message_of(json{{"world", {{"n_userz", 5}}}}).find("world.n_userz") !=
          std::string::npos);
    CHECK(message_of(json{{"profile", {{"gamma", 0.5}}}}).find("profile.gamma") !=
          std::string::npos);
    CHECK(message_of(json{{"ranker", {{"lr", 0.1}}}}).find("ranker.lr") != std::string::npos);
    CHECK(message_of(json{{"eval", {{"k", 3}}}}).find("eval.k") != std::string::npos);
    CHECK(message_of(json{{"judge", {{"retries", 2}}}}).find("judge.retries") !=
          std::string::npos);
    CHECK(message_of(json{{"loop", {{"iterations", 2}}}}).find("loop.iterations") !=
          std::string::npos);
    CHECK_THROWS_AS(run_config_from_json(json::array()), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"world", 5}}), UsageError);
}

TEST_CASE("bad config values are usage errors") {
    CHECK_THROWS_AS(run_config_from_json(json{{"ranker", {{"epochs", "three"}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"world", {{"n_users", "many"}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"profile", {{"kind_weights", {1.0, 2.0}}}}}),
                    UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"eval", {{"threshold", "half"}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"out_dir", 4}}), UsageError);
}

TEST_CASE("config validation enforces cross-field rules") {
    CHECK_THROWS_AS(run_config_from_json(json{{"out_dir", ""}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"ranker", {{"k", 0}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"profile", {{"lambda", -1.0}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"profile", {{"max_history", 0}}}}), UsageError);
    CHECK_THROWS_AS(
        run_config_from_json(json{{"profile", {{"kind_weights", {1.0, -1.0, 1.0, 1.0}}}}}),
        UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"eval", {{"holdout_days", 0}}}}), UsageError);
    // The holdout must leave training days inside the default 30-day window.
    CHECK_THROWS_AS(run_config_from_json(json{{"eval", {{"holdout_days", 30}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"eval", {{"propensity_cap", 0.0}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"eval", {{"propensities", "guessed"}}}}),
                    UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"eval", {{"exposure_k", 0}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"judge", {{"mode", "oracle"}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"judge", {{"k", 0}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"judge", {{"in_flight_cap", 0}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"loop", {{"policy", "hybrid"}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"loop", {{"rounds", 0}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"loop", {{"retrain_every", 0}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"world", {{"n_users", 0}}}}), UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"world", {{"explore_prob", 1.5}}}}), UsageError);
}

TEST_CASE("half_life_days is sugar for lambda") {
    RunConfig weekly = run_config_from_json(json{{"profile", {{"half_life_days", 7}}}});
    CHECK(weekly.profile.lambda == ProfileConfig{}.lambda);  // the default is a 7-day half-life
    RunConfig daily = run_config_from_json(json{{"profile", {{"half_life_days", 1}}}});
    CHECK(daily.profile.lambda == lambda_from_half_life_days(1.0));
    CHECK(daily.profile.lambda > weekly.profile.lambda);

    CHECK_THROWS_AS(run_config_from_json(
                        json{{"profile", {{"half_life_days", 7}, {"lambda", 0.1}}}}),
                    UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"profile", {{"half_life_days", 0}}}}),
                    UsageError);
    CHECK_THROWS_AS(run_config_from_json(json{{"profile", {{"half_life_days", -2}}}}),
                    UsageError);
}

TEST_CASE("overrides parse values as JSON with a string fallback") {
    json j = json::object();
    j = apply_override(j, "seed=5");
    CHECK(j.at("seed") == 5);
    j = apply_override(j, "world.n_users=100");
    CHECK(j.at("world").at("n_users") == 100);
    j = apply_override(j, "profile.lambda=0.5");
    CHECK(j.at("profile").at("lambda") == 0.5);
    j = apply_override(j, "judge.mode=live");  // bare word stays a string
    CHECK(j.at("judge").at("mode") == "live");
    j = apply_override(j, "loop.policy=\"recency\"");  // quoted JSON string
    CHECK(j.at("loop").at("policy") == "recency");
    j = apply_override(j, "ranker.hidden_layer=true");
    CHECK(j.at("ranker").at("hidden_layer") == true);
    j = apply_override(j, "seed=6");  // later overrides win
    CHECK(j.at("seed") == 6);

    CHECK_THROWS_AS(apply_override(json::object(), "no_equals"), UsageError);
    CHECK_THROWS_AS(apply_override(json::object(), "=5"), UsageError);
    CHECK_THROWS_AS(apply_override(json::object(), "a..b=1"), UsageError);
    CHECK_THROWS_AS(apply_override(json::object(), "a.=1"), UsageError);
}

TEST_CASE("load_run_config reads files, applies overrides, then validates") {
    SUBCASE("empty path means built-in defaults") {
        RunConfig cfg = load_run_config("", {});
        CHECK(run_config_to_json(cfg) == run_config_to_json(RunConfig{}));
    }
    SUBCASE("overrides work without a file") {
        RunConfig cfg = load_run_config("", {"world.n_users=55", "seed=3"});
        CHECK(cfg.world.n_users == 55);
        CHECK(cfg.seed == 3);
        CHECK(cfg.world.seed == 3);  // master seed still fills world.seed
    }
    SUBCASE("file values are overridden in order") {
        TempFile f(R"({"seed": 3, "world": {"n_videos": 300}})");
        RunConfig cfg = load_run_config(f.path.string(), {"seed=12"});
        CHECK(cfg.seed == 12);
        CHECK(cfg.world.n_videos == 300);
        CHECK(cfg.world.seed == 12);
    }
    SUBCASE("a missing file is a usage error") {
        CHECK_THROWS_AS(load_run_config("/nonexistent/vcg.json", {}), UsageError);
    }
    SUBCASE("malformed JSON is a data error") {
        TempFile f("{not json");
        CHECK_THROWS_AS(load_run_config(f.path.string(), {}), DataError);
    }
    SUBCASE("an override that breaks validation is a usage error") {
        CHECK_THROWS_AS(load_run_config("", {"loop.rounds=0"}), UsageError);
    }
}
