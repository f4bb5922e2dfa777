#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcg/profiler.hpp"
#include "vcg/rankers.hpp"
#include "vcg/simulator.hpp"

namespace vcg {

struct RankerConfig {
    size_t k = 10;     // serving list length
    TrainHyper hyper;  // conventional-baseline training settings
};

struct EvalConfig {
    int holdout_days = 7;
    double propensity_cap = 10.0;
    double threshold = 0.5;
    size_t exposure_k = 10;
    size_t coherence_k = 100;
    // "true" uses the world's examination exponent; "fitted" estimates it
    // from the training log.
    std::string propensities = "true";
};

struct JudgeConfig {
    std::string mode = "mock";  // "mock" | "live"
    size_t k = 5;
    size_t sample_users = 50;
    size_t in_flight_cap = 4;
    size_t max_retries = 3;
    uint32_t backoff_ms = 100;
    std::string template_path = "fixtures/judge_prompt_template.txt";
};

struct LoopSection {
    std::string policy = "conventional";
    int rounds = 5;
    int k = 10;
    int retrain_every = 1;
};

// One file drives every command. The master seed fills world.seed and
// ranker.seed unless those sections pin their own.
struct RunConfig {
    uint64_t seed = 1;
    std::string out_dir = "out";
    WorldConfig world;
    ProfileConfig profile;  // fallback is filled from the world at runtime
    RankerConfig ranker;
    EvalConfig eval;
    JudgeConfig judge;
    LoopSection loop;

    void validate() const;
};

// Strict parse: unknown sections or keys raise UsageError. The profile
// section accepts "half_life_days" as sugar for "lambda" (not both).
RunConfig run_config_from_json(const nlohmann::json& j);
// Fully resolved: re-parsing the result reproduces the config exactly.
nlohmann::json run_config_to_json(const RunConfig& cfg);

// "section.key=value" (or "key=value" for top-level fields); the value is
// parsed as JSON when possible and kept as a string otherwise.
nlohmann::json apply_override(nlohmann::json j, const std::string& assignment);

// Empty path means built-in defaults. A path that cannot be read raises
// UsageError; malformed JSON raises DataError.
RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides);

}  // namespace vcg
