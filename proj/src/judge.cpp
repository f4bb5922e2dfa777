#include "vcg/judge.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdlib>
#include <mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <httplib.h>
#include <nlohmann/json.hpp>

#include "vcg/errors.hpp"

namespace vcg {

namespace {

constexpr std::array<JudgeCategory, 5> kCategories = {
    JudgeCategory::excellent_match, JudgeCategory::good_match, JudgeCategory::partial_match,
    JudgeCategory::poor_match, JudgeCategory::no_match};

}  // namespace

const char* to_string(JudgeCategory category) {
    switch (category) {
        case JudgeCategory::excellent_match: return "excellent_match";
        case JudgeCategory::good_match: return "good_match";
        case JudgeCategory::partial_match: return "partial_match";
        case JudgeCategory::poor_match: return "poor_match";
        case JudgeCategory::no_match: return "no_match";
    }
    throw std::invalid_argument("unknown judge category");
}

int category_score(JudgeCategory category) {
    switch (category) {
        case JudgeCategory::excellent_match: return 5;
        case JudgeCategory::good_match: return 4;
        case JudgeCategory::partial_match: return 3;
        case JudgeCategory::poor_match: return 2;
        case JudgeCategory::no_match: return 1;
    }
    throw std::invalid_argument("unknown judge category");
}

JudgeCategory category_from_score(int score) {
    switch (score) {
        case 5: return JudgeCategory::excellent_match;
        case 4: return JudgeCategory::good_match;
        case 3: return JudgeCategory::partial_match;
        case 2: return JudgeCategory::poor_match;
        case 1: return JudgeCategory::no_match;
    }
    throw std::invalid_argument("judge scores run 1 to 5");
}

std::optional<JudgeCategory> category_from_token(const std::string& token) {
    for (JudgeCategory c : kCategories)
        if (token == to_string(c)) return c;
    return std::nullopt;
}

namespace {

std::string render_items(const std::vector<JudgeItemDescriptor>& items) {
    if (items.empty()) return "(no interaction history)";
    std::ostringstream os;
    for (size_t i = 0; i < items.size(); ++i) {
        if (i > 0) os << "\n";
        os << "- product " << items[i].product_id << " | interaction: " << items[i].interaction
           << " | ts: " << items[i].ts;
    }
    return os.str();
}

std::string render_candidate(const JudgeCandidateDescriptor& c) {
    std::ostringstream os;
    os << "video " << c.video_id << " | duration_ms: " << c.duration_ms
       << " | creator: " << c.creator_id << " | products: ";
    if (c.product_ids.empty()) {
        os << "(none)";
    } else {
        for (size_t i = 0; i < c.product_ids.size(); ++i)
            os << (i > 0 ? ", " : "") << c.product_ids[i];
    }
    os << " | hashtags: ";
    if (c.hashtags.empty()) {
        os << "(none)";
    } else {
        for (size_t i = 0; i < c.hashtags.size(); ++i)
            os << (i > 0 ? ", " : "") << c.hashtags[i];
    }
    return os.str();
}

void replace_all(std::string& text, const std::string& marker, const std::string& value) {
    size_t pos = 0;
    while ((pos = text.find(marker, pos)) != std::string::npos) {
        text.replace(pos, marker.size(), value);
        pos += value.size();
    }
}

}  // namespace

JudgePrompt render_prompt(const UserHistory& history, const VideoRecord& video,
                          const std::string& template_text) {
    JudgePrompt prompt;
    size_t n = std::min(history.events.size(), kJudgeHistoryCap);
    prompt.user_items.reserve(n);
    for (size_t i = 0; i < n; ++i) {
        const InteractionEvent& ev = history.events[history.events.size() - 1 - i];
        JudgeItemDescriptor item;
        item.product_id = ev.product_id;
        item.ts = ev.ts;
        item.interaction = to_string(ev.kind);
        prompt.user_items.push_back(std::move(item));
    }
    prompt.candidate.video_id = video.video_id;
    prompt.candidate.duration_ms = video.duration_ms;
    prompt.candidate.creator_id = video.creator_id;
    prompt.candidate.product_ids = video.product_ids;
    prompt.candidate.hashtags = video.hashtags;

    std::string text = template_text;
    replace_all(text, "{{user_items}}", render_items(prompt.user_items));
    replace_all(text, "{{candidate}}", render_candidate(prompt.candidate));
    size_t residual = text.find("{{");
    if (residual != std::string::npos) {
        size_t end = text.find("}}", residual);
        std::string marker = end == std::string::npos
                                 ? text.substr(residual)
                                 : text.substr(residual, end - residual + 2);
        throw DataError("unresolved placeholder in judge template: " + marker);
    }
    prompt.text = std::move(text);
    return prompt;
}

JudgeVerdict parse_verdict(const std::string& raw) {
    size_t best_pos = std::string::npos;
    JudgeCategory best = JudgeCategory::no_match;
    for (JudgeCategory c : kCategories) {
        size_t pos = raw.find(to_string(c));
        if (pos < best_pos) {
            best_pos = pos;
            best = c;
        }
    }
    if (best_pos == std::string::npos) throw UnparseableVerdict(raw);
    JudgeVerdict v;
    v.category = best;
    v.score = category_score(best);
    v.raw_response = raw;
    return v;
}

JudgeVerdict mock_judge(const JudgePrompt& prompt, const EmbeddingProvider& item_latents,
                        const VideoIndex& catalog) {
    const VideoRecord& rec = catalog.get(prompt.candidate.video_id);
    // An empty item list stays a zero vector, so cosine is 0 and the verdict
    // is no_match.
    Embedding mean(item_latents.dimension(), 0.0);
    if (!prompt.user_items.empty()) {
        for (const JudgeItemDescriptor& item : prompt.user_items) {
            const Embedding& e = item_latents.get(item.product_id);
            for (size_t i = 0; i < mean.size(); ++i) mean[i] += e[i];
        }
        for (double& v : mean) v /= static_cast<double>(prompt.user_items.size());
    }
    double c = cosine(mean, rec.embedding);
    JudgeCategory cat = c >= 0.8   ? JudgeCategory::excellent_match
                        : c >= 0.6 ? JudgeCategory::good_match
                        : c >= 0.4 ? JudgeCategory::partial_match
                        : c >= 0.2 ? JudgeCategory::poor_match
                                   : JudgeCategory::no_match;
    JudgeVerdict v;
    v.category = cat;
    v.score = category_score(cat);
    v.raw_response = std::string("category: ") + to_string(cat);
    return v;
}

std::string MockJudgeClient::complete(const JudgePrompt& prompt) {
    return mock_judge(prompt, items_, catalog_).raw_response;
}

HttpJudgeClient::HttpJudgeClient(const std::string& url, std::string token)
    : token_(std::move(token)) {
    size_t scheme = url.find("://");
    if (scheme == std::string::npos)
        throw UsageError("judge url must include a scheme, got: " + url);
    size_t slash = url.find('/', scheme + 3);
    if (slash == std::string::npos) {
        base_ = url;
        path_ = "/";
    } else {
        base_ = url.substr(0, slash);
        path_ = url.substr(slash);
    }
}

HttpJudgeClient HttpJudgeClient::from_env() {
    const char* url = std::getenv("JUDGE_URL");
    if (url == nullptr || *url == '\0')
        throw UsageError("JUDGE_URL is not set; required for --judge-mode live");
    const char* token = std::getenv("JUDGE_TOKEN");
    return HttpJudgeClient(url, token == nullptr ? "" : token);
}

std::string HttpJudgeClient::complete(const JudgePrompt& prompt) {
    // One client per call keeps complete() safe under concurrent use.
    httplib::Client cli(base_);
    cli.set_connection_timeout(10, 0);
    cli.set_read_timeout(60, 0);
    httplib::Headers headers;
    if (!token_.empty()) headers.emplace("Authorization", "Bearer " + token_);

    nlohmann::json message{{"role", "user"}, {"content", prompt.text}};
    nlohmann::json body{{"messages", nlohmann::json::array({message})}, {"temperature", 0}};
    httplib::Result res = cli.Post(path_, headers, body.dump(), "application/json");
    if (!res)
        throw TransportError("judge endpoint " + base_ +
                             " unreachable: " + httplib::to_string(res.error()));
    if (res->status < 200 || res->status >= 300)
        throw TransportError("judge endpoint returned status " + std::to_string(res->status));

    nlohmann::json reply = nlohmann::json::parse(res->body, nullptr, false);
    if (reply.is_discarded()) return res->body;
    if (reply.contains("choices") && reply["choices"].is_array() && !reply["choices"].empty()) {
        const nlohmann::json& first = reply["choices"][0];
        if (first.contains("message") && first["message"].contains("content") &&
            first["message"]["content"].is_string())
            return first["message"]["content"].get<std::string>();
        if (first.contains("text") && first["text"].is_string())
            return first["text"].get<std::string>();
    }
    if (reply.contains("text") && reply["text"].is_string())
        return reply["text"].get<std::string>();
    return res->body;
}

JudgeReport judge_topk(JudgeClient& client, const UserHistory& history, const RankedFeed& feed,
                       size_t k, const std::string& template_text, const VideoIndex& catalog,
                       const JudgeOptions& opts) {
    if (feed.items.empty()) throw std::invalid_argument("judge_topk needs a non-empty feed");
    if (k < 1) throw std::invalid_argument("k must be >= 1");
    if (opts.in_flight_cap < 1) throw std::invalid_argument("in-flight cap must be >= 1");

    size_t n = std::min(k, feed.items.size());
    std::vector<JudgePrompt> prompts;
    prompts.reserve(n);
    for (size_t i = 0; i < n; ++i)
        prompts.push_back(
            render_prompt(history, catalog.get(feed.items[i].video_id), template_text));

    std::vector<JudgeVerdict> verdicts(n);
    struct Failure {
        size_t index;
        bool transport;
        std::string message;
        std::string raw;
    };
    std::mutex mu;
    std::optional<Failure> failure;

    std::atomic<size_t> cursor{0};
    auto worker = [&]() {
        for (;;) {
            size_t i = cursor.fetch_add(1);
            if (i >= n) return;
            {
                std::lock_guard<std::mutex> lock(mu);
                if (failure) return;
            }
            try {
                std::string raw;
                for (size_t attempt = 0;; ++attempt) {
                    try {
                        raw = client.complete(prompts[i]);
                        break;
                    } catch (const TransportError&) {
                        if (attempt >= opts.max_retries) throw;
                        uint64_t ms = static_cast<uint64_t>(opts.backoff_ms) << attempt;
                        std::this_thread::sleep_for(std::chrono::milliseconds(ms));
                    }
                }
                verdicts[i] = parse_verdict(raw);
            } catch (const UnparseableVerdict& e) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure || i < failure->index) failure = Failure{i, false, e.what(), e.raw};
            } catch (const TransportError& e) {
                std::lock_guard<std::mutex> lock(mu);
                if (!failure || i < failure->index) failure = Failure{i, true, e.what(), ""};
            }
        }
    };

    size_t n_threads = std::min(opts.in_flight_cap, n);
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        pool.reserve(n_threads);
        for (size_t t = 0; t < n_threads; ++t) pool.emplace_back(worker);
        for (std::thread& t : pool) t.join();
    }

    if (failure) {
        std::string msg =
            "judge call for candidate " + std::to_string(failure->index) + ": " + failure->message;
        if (failure->transport) throw TransportError(msg);
        throw UnparseableVerdict(failure->raw, msg);
    }

    JudgeReport report;
    report.user_id = feed.user_id;
    report.video_ids.reserve(n);
    report.verdicts = std::move(verdicts);
    double sum = 0.0;
    for (size_t i = 0; i < n; ++i) {
        report.video_ids.push_back(feed.items[i].video_id);
        sum += report.verdicts[i].score;
    }
    report.mean_score = sum / static_cast<double>(n);
    return report;
}

std::array<size_t, 5> score_histogram(const std::vector<JudgeReport>& reports) {
    std::array<size_t, 5> hist{};
    for (const JudgeReport& r : reports)
        for (const JudgeVerdict& v : r.verdicts) {
            if (v.score < 1 || v.score > 5)
                throw std::invalid_argument("judge scores run 1 to 5");
            ++hist[static_cast<size_t>(v.score) - 1];
        }
    return hist;
}

}  // namespace vcg
