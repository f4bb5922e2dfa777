#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcg/simulator.hpp"

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = -1;
    std::string output;  // stdout and stderr combined
};

fs::path workdir() {
    static fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "vcg_cli_tests";
        fs::remove_all(d);
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

CliResult run_cli(const std::string& args) {
    static int counter = 0;
    fs::path capture = workdir() / ("capture_" + std::to_string(counter++) + ".txt");
    std::string cmd =
        std::string(VCG_BINARY_PATH) + " " + args + " > " + capture.string() + " 2>&1";
    int status = std::system(cmd.c_str());
    CliResult r;
    r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
    std::ifstream in(capture);
    std::ostringstream os;
    os << in.rdbuf();
    r.output = os.str();
    return r;
}

std::string read_bytes(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

// Small world and short training so the whole file stays fast.
fs::path write_tiny_config() {
    json cfg{{"world",
              {{"n_users", 40},
               {"n_videos", 150},
               {"n_products", 60},
               {"d", 8},
               {"taste_clusters", 4}}},
             {"ranker", {{"epochs", 3}}},
             {"judge",
              {{"template_path",
                std::string(VCG_FIXTURES_DIR) + "/judge_prompt_template.txt"}}}};
    fs::path path = workdir() / "tiny.json";
    std::ofstream out(path);
    out << cfg.dump(2) << "\n";
    return path;
}

const char* kWorldFiles[] = {"world.json",          "index.vix",
                             "product_latents.emb", "product_content.emb",
                             "hashtag_latents.emb", "user_latents.emb",
                             "user_catalog.emb",    "histories.jsonl"};

}  // namespace

TEST_CASE("generate, experiment, judge and report run end to end") {
    fs::path cfg = write_tiny_config();
    std::string cfg_flag = " --config " + cfg.string();
    fs::path out_a = workdir() / "a";
    fs::path out_b = workdir() / "b";

    // gen writes a complete world snapshot.
    CliResult gen_a = run_cli("gen" + cfg_flag + " --out " + out_a.string());
    REQUIRE(gen_a.code == 0);
    CHECK(gen_a.output.find("150 videos") != std::string::npos);
    for (const char* name : kWorldFiles) CHECK(fs::exists(out_a / "world" / name));

    // The same config in a different directory produces byte-identical files.
    REQUIRE(run_cli("gen" + cfg_flag + " --out " + out_b.string()).code == 0);
    for (const char* name : kWorldFiles)
        CHECK(read_bytes(out_a / "world" / name) == read_bytes(out_b / "world" / name));

    // Re-running in place is also byte-stable.
    std::string index_before = read_bytes(out_a / "world" / "index.vix");
    REQUIRE(run_cli("gen" + cfg_flag + " --out " + out_a.string()).code == 0);
    CHECK(read_bytes(out_a / "world" / "index.vix") == index_before);

    // The written snapshot loads back with the advertised shape.
    vcg::SimWorld world = vcg::load_world((out_a / "world").string());
    CHECK(world.index.size() == 150);
    CHECK(world.histories.size() == 40);
    CHECK(world.product_latents.size() == 60);

    // index reloads the snapshot and reports its stats.
    CliResult index = run_cli("index" + cfg_flag + " --out " + out_a.string());
    CHECK(index.code == 0);
    CHECK(index.output.find("\"size\":150") != std::string::npos);

    // experiment writes metrics and per-policy outputs.
    CliResult exp = run_cli("experiment" + cfg_flag + " --out " + out_a.string());
    REQUIRE(exp.code == 0);
    CHECK(exp.output.find("recency") != std::string::npos);
    CHECK(exp.output.find("multimodal") != std::string::npos);
    CHECK(exp.output.find("conventional") != std::string::npos);
    for (const char* name : {"metrics.json", "feeds_recency.json", "feeds_multimodal.json",
                             "feeds_conventional.json", "report_recency.json",
                             "report_multimodal.json", "report_conventional.json"})
        CHECK(fs::exists(out_a / name));

    // A rerun of the same experiment reproduces every output byte.
    std::string metrics_before = read_bytes(out_a / "metrics.json");
    std::string feeds_before = read_bytes(out_a / "feeds_multimodal.json");
    REQUIRE(run_cli("experiment" + cfg_flag + " --out " + out_a.string()).code == 0);
    CHECK(read_bytes(out_a / "metrics.json") == metrics_before);
    CHECK(read_bytes(out_a / "feeds_multimodal.json") == feeds_before);

    // judge scores served feeds with the offline judge.
    CliResult judge =
        run_cli("judge --policy multimodal" + cfg_flag + " --out " + out_a.string());
    REQUIRE(judge.code == 0);
    json jdoc = json::parse(read_bytes(out_a / "judge_multimodal.json"));
    CHECK(jdoc.at("policy") == "multimodal");
    CHECK(jdoc.at("mode") == "mock");
    CHECK(jdoc.at("n_users") == 40);
    CHECK(jdoc.at("n_failed") == 0);
    size_t hist_total = 0;
    for (size_t c : jdoc.at("histogram").get<std::vector<size_t>>()) hist_total += c;
    CHECK(hist_total == 40 * 5);  // forty users, top five judged each
    double mean = jdoc.at("mean_score").get<double>();
    CHECK(mean >= 1.0);
    CHECK(mean <= 5.0);

    // loop runs the closed feedback loop and writes per-round metrics.
    CliResult loop = run_cli("loop" + cfg_flag + " --out " + out_a.string() +
                             " --set loop.policy=recency --set loop.rounds=2");
    REQUIRE(loop.code == 0);
    CHECK(loop.output.find("round 1:") != std::string::npos);
    CHECK(loop.output.find("round 2:") != std::string::npos);
    json ldoc = json::parse(read_bytes(out_a / "loop_recency.json"));
    CHECK(ldoc.at("loop").at("policy") == "recency");
    CHECK(ldoc.at("loop").at("rounds") == 2);

    // report prints the stored table plus any judge summaries.
    CliResult report = run_cli("report" + cfg_flag + " --out " + out_a.string());
    CHECK(report.code == 0);
    CHECK(report.output.find("metric") != std::string::npos);
    CHECK(report.output.find("recency") != std::string::npos);
    CHECK(report.output.find("skew_popularity") != std::string::npos);
    CHECK(report.output.find("judge multimodal:") != std::string::npos);

    // Flag shorthands land in the resolved config bundle.
    fs::path out_d = workdir() / "d";
    CliResult gen_d = run_cli("gen" + cfg_flag + " --out " + out_d.string() +
                              " --seed 5 --set world.n_videos=77");
    REQUIRE(gen_d.code == 0);
    json bundle = json::parse(read_bytes(out_d / "config.json"));
    CHECK(bundle.at("seed") == 5);
    CHECK(bundle.at("config").at("world").at("n_videos") == 77);
    CHECK(bundle.at("config").at("world").at("seed") == 5);
    CHECK(vcg::load_world((out_d / "world").string()).index.size() == 77);
}

TEST_CASE("command line failures use distinct exit codes") {
    fs::path cfg = write_tiny_config();
    std::string cfg_flag = " --config " + cfg.string();

    CHECK(run_cli("--help").code == 0);
    CHECK(run_cli("").code == 2);           // a subcommand is required
    CHECK(run_cli("frobnicate").code == 2);  // unknown subcommand

    CliResult missing = run_cli("gen --config /nonexistent/vcg.json");
    CHECK(missing.code == 2);
    CHECK(missing.output.find("usage error") != std::string::npos);

    fs::path broken = workdir() / "broken.json";
    {
        std::ofstream out(broken);
        out << "{oops";
    }
    CliResult malformed = run_cli("gen --config " + broken.string());
    CHECK(malformed.code == 3);
    CHECK(malformed.output.find("not valid JSON") != std::string::npos);

    CHECK(run_cli("gen" + cfg_flag + " --set world.n_users=0").code == 2);
    CHECK(run_cli("gen" + cfg_flag + " --set bogus.key=1").code == 2);

    // judge needs --policy, a known policy name, and prior experiment feeds.
    CHECK(run_cli("judge" + cfg_flag).code == 2);
    CHECK(run_cli("judge --policy hybrid" + cfg_flag).code == 3);
    fs::path fresh = workdir() / "fresh";
    REQUIRE(run_cli("gen" + cfg_flag + " --out " + fresh.string()).code == 0);
    CliResult no_feeds =
        run_cli("judge --policy recency" + cfg_flag + " --out " + fresh.string());
    CHECK(no_feeds.code == 3);
    CHECK(no_feeds.output.find("run experiment first") != std::string::npos);

    // experiment and report need a world / metrics in place.
    fs::path empty_dir = workdir() / "empty";
    fs::create_directories(empty_dir);
    CHECK(run_cli("experiment" + cfg_flag + " --out " + empty_dir.string()).code == 3);
    CHECK(run_cli("report" + cfg_flag + " --out " + empty_dir.string()).code == 3);
    CHECK(run_cli("experiment --policies nonsense" + cfg_flag + " --out " +
                  fresh.string())
              .code == 3);
}
