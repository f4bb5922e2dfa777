#include "vcg/config.hpp"

#include <cmath>
#include <filesystem>
#include <stdexcept>

#include "vcg/binio.hpp"
#include "vcg/errors.hpp"
#include "vcg/simulator.hpp"

namespace vcg {

namespace {

nlohmann::json ranker_to_json(const RankerConfig& r) {
    return {{"k", r.k},
            {"epochs", r.hyper.epochs},
            {"learning_rate", r.hyper.learning_rate},
            {"batch_size", r.hyper.batch_size},
            {"seed", r.hyper.seed},
            {"objective", r.hyper.objective},
            {"negatives_policy", r.hyper.negatives_policy},
            {"hidden_layer", r.hyper.hidden_layer}};
}

nlohmann::json profile_to_json(const ProfileConfig& p) {
    return {{"lambda", p.lambda},
            {"max_history", p.max_history},
            {"kind_weights", p.kind_weights}};
}

nlohmann::json eval_to_json(const EvalConfig& e) {
    return {{"holdout_days", e.holdout_days},
            {"propensity_cap", e.propensity_cap},
            {"threshold", e.threshold},
            {"exposure_k", e.exposure_k},
            {"coherence_k", e.coherence_k},
            {"propensities", e.propensities}};
}

nlohmann::json judge_to_json(const JudgeConfig& j) {
    return {{"mode", j.mode},
            {"k", j.k},
            {"sample_users", j.sample_users},
            {"in_flight_cap", j.in_flight_cap},
            {"max_retries", j.max_retries},
            {"backoff_ms", j.backoff_ms},
            {"template_path", j.template_path}};
}

nlohmann::json loop_to_json(const LoopSection& l) {
    return {{"policy", l.policy},
            {"rounds", l.rounds},
            {"k", l.k},
            {"retrain_every", l.retrain_every}};
}

// Every key a section may carry is a key its serialized default carries, so
// the emitters double as the schema for strict checking.
void check_keys(const nlohmann::json& section, const nlohmann::json& schema,
                const std::string& name, std::initializer_list<const char*> extras = {}) {
    if (!section.is_object()) throw UsageError("config section '" + name + "' must be an object");
    for (const auto& [key, value] : section.items()) {
        if (schema.contains(key)) continue;
        bool extra = false;
        for (const char* e : extras) extra = extra || key == e;
        if (!extra) throw UsageError("unknown config key: " + name + "." + key);
    }
}

template <typename T>
void read_into(const nlohmann::json& section, const char* key, T& field) {
    if (!section.contains(key)) return;
    try {
        field = section.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw UsageError(std::string("bad value for config key ") + key);
    }
}

}  // namespace

void RunConfig::validate() const {
    world.validate();
    if (out_dir.empty()) throw UsageError("out_dir must not be empty");
    if (ranker.k < 1) throw UsageError("ranker.k must be >= 1");
    if (!(profile.lambda >= 0.0)) throw UsageError("profile.lambda must be >= 0");
    if (profile.max_history < 1) throw UsageError("profile.max_history must be >= 1");
    for (double w : profile.kind_weights)
        if (!(w >= 0.0)) throw UsageError("profile.kind_weights must be >= 0");
    if (eval.holdout_days < 1) throw UsageError("eval.holdout_days must be >= 1");
    if (eval.holdout_days >= world.window_days)
        throw UsageError("eval.holdout_days must leave room for training data");
    if (!(eval.propensity_cap > 0.0)) throw UsageError("eval.propensity_cap must be > 0");
    if (eval.propensities != "true" && eval.propensities != "fitted")
        throw UsageError("eval.propensities must be \"true\" or \"fitted\"");
    if (eval.exposure_k < 1 || eval.coherence_k < 1)
        throw UsageError("eval prefix lengths must be >= 1");
    if (judge.mode != "mock" && judge.mode != "live")
        throw UsageError("judge.mode must be \"mock\" or \"live\"");
    if (judge.k < 1) throw UsageError("judge.k must be >= 1");
    if (judge.sample_users < 1) throw UsageError("judge.sample_users must be >= 1");
    if (judge.in_flight_cap < 1) throw UsageError("judge.in_flight_cap must be >= 1");
    policy_from_string(loop.policy);  // throws on unknown names
    if (loop.rounds < 1) throw UsageError("loop.rounds must be >= 1");
    if (loop.k < 1) throw UsageError("loop.k must be >= 1");
    if (loop.retrain_every < 1) throw UsageError("loop.retrain_every must be >= 1");
}

RunConfig run_config_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw UsageError("config must be a JSON object");
    RunConfig cfg;
    nlohmann::json top_schema{{"seed", nullptr},    {"out_dir", nullptr}, {"world", nullptr},
                              {"profile", nullptr}, {"ranker", nullptr},  {"eval", nullptr},
                              {"judge", nullptr},   {"loop", nullptr}};
    check_keys(j, top_schema, "config");
    read_into(j, "seed", cfg.seed);
    read_into(j, "out_dir", cfg.out_dir);

    if (j.contains("world")) {
        const nlohmann::json& w = j.at("world");
        check_keys(w, world_config_to_json(WorldConfig{}), "world");
        try {
            cfg.world = world_config_from_json(w);
        } catch (const std::invalid_argument& e) {
            throw UsageError(std::string("world config: ") + e.what());
        } catch (const nlohmann::json::exception& e) {
            throw UsageError(std::string("world config: ") + e.what());
        }
        if (!w.contains("seed")) cfg.world.seed = cfg.seed;
    } else {
        cfg.world.seed = cfg.seed;
    }

    if (j.contains("profile")) {
        const nlohmann::json& p = j.at("profile");
        check_keys(p, profile_to_json(cfg.profile), "profile", {"half_life_days"});
        if (p.contains("lambda") && p.contains("half_life_days"))
            throw UsageError("profile: set lambda or half_life_days, not both");
        read_into(p, "lambda", cfg.profile.lambda);
        if (p.contains("half_life_days")) {
            double days = p.at("half_life_days").get<double>();
            if (!(days > 0.0)) throw UsageError("profile.half_life_days must be > 0");
            cfg.profile.lambda = lambda_from_half_life_days(days);
        }
        read_into(p, "max_history", cfg.profile.max_history);
        read_into(p, "kind_weights", cfg.profile.kind_weights);
    }

    if (j.contains("ranker")) {
        const nlohmann::json& r = j.at("ranker");
        check_keys(r, ranker_to_json(cfg.ranker), "ranker");
        read_into(r, "k", cfg.ranker.k);
        read_into(r, "epochs", cfg.ranker.hyper.epochs);
        read_into(r, "learning_rate", cfg.ranker.hyper.learning_rate);
        read_into(r, "batch_size", cfg.ranker.hyper.batch_size);
        read_into(r, "objective", cfg.ranker.hyper.objective);
        read_into(r, "negatives_policy", cfg.ranker.hyper.negatives_policy);
        read_into(r, "hidden_layer", cfg.ranker.hyper.hidden_layer);
        if (r.contains("seed"))
            read_into(r, "seed", cfg.ranker.hyper.seed);
        else
            cfg.ranker.hyper.seed = cfg.seed;
    } else {
        cfg.ranker.hyper.seed = cfg.seed;
    }

    if (j.contains("eval")) {
        const nlohmann::json& e = j.at("eval");
        check_keys(e, eval_to_json(cfg.eval), "eval");
        read_into(e, "holdout_days", cfg.eval.holdout_days);
        read_into(e, "propensity_cap", cfg.eval.propensity_cap);
        read_into(e, "threshold", cfg.eval.threshold);
        read_into(e, "exposure_k", cfg.eval.exposure_k);
        read_into(e, "coherence_k", cfg.eval.coherence_k);
        read_into(e, "propensities", cfg.eval.propensities);
    }

    if (j.contains("judge")) {
        const nlohmann::json& g = j.at("judge");
        check_keys(g, judge_to_json(cfg.judge), "judge");
        read_into(g, "mode", cfg.judge.mode);
        read_into(g, "k", cfg.judge.k);
        read_into(g, "sample_users", cfg.judge.sample_users);
        read_into(g, "in_flight_cap", cfg.judge.in_flight_cap);
        read_into(g, "max_retries", cfg.judge.max_retries);
        read_into(g, "backoff_ms", cfg.judge.backoff_ms);
        read_into(g, "template_path", cfg.judge.template_path);
    }

    if (j.contains("loop")) {
        const nlohmann::json& l = j.at("loop");
        check_keys(l, loop_to_json(cfg.loop), "loop");
        read_into(l, "policy", cfg.loop.policy);
        read_into(l, "rounds", cfg.loop.rounds);
        read_into(l, "k", cfg.loop.k);
        read_into(l, "retrain_every", cfg.loop.retrain_every);
    }

    try {
        cfg.validate();
    } catch (const std::invalid_argument& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

nlohmann::json run_config_to_json(const RunConfig& cfg) {
    return {{"seed", cfg.seed},
            {"out_dir", cfg.out_dir},
            {"world", world_config_to_json(cfg.world)},
            {"profile", profile_to_json(cfg.profile)},
            {"ranker", ranker_to_json(cfg.ranker)},
            {"eval", eval_to_json(cfg.eval)},
            {"judge", judge_to_json(cfg.judge)},
            {"loop", loop_to_json(cfg.loop)}};
}

nlohmann::json apply_override(nlohmann::json j, const std::string& assignment) {
    size_t eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0)
        throw UsageError("override must look like section.key=value, got: " + assignment);
    std::string path = assignment.substr(0, eq);
    std::string value = assignment.substr(eq + 1);

    nlohmann::json parsed = nlohmann::json::parse(value, nullptr, false);
    if (parsed.is_discarded()) parsed = value;  // unquoted strings stay strings

    std::vector<std::string> parts;
    size_t start = 0;
    for (size_t dot = path.find('.'); dot != std::string::npos; dot = path.find('.', start)) {
        parts.push_back(path.substr(start, dot - start));
        start = dot + 1;
    }
    parts.push_back(path.substr(start));
    for (const std::string& p : parts)
        if (p.empty()) throw UsageError("bad override path: " + path);

    nlohmann::json* node = &j;
    for (size_t i = 0; i + 1 < parts.size(); ++i) node = &(*node)[parts[i]];
    (*node)[parts.back()] = std::move(parsed);
    return j;
}

RunConfig load_run_config(const std::string& path, const std::vector<std::string>& overrides) {
    nlohmann::json j = nlohmann::json::object();
    if (!path.empty()) {
        if (!std::filesystem::exists(path)) throw UsageError("config file not found: " + path);
        std::vector<uint8_t> bytes = read_file_bytes(path);
        j = nlohmann::json::parse(bytes.begin(), bytes.end(), nullptr, false);
        if (j.is_discarded()) throw DataError("config file is not valid JSON: " + path);
    }
    for (const std::string& o : overrides) j = apply_override(std::move(j), o);
    return run_config_from_json(j);
}

}  // namespace vcg
