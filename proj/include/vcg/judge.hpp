#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "vcg/embedding.hpp"
#include "vcg/index.hpp"
#include "vcg/profiler.hpp"
#include "vcg/rankers.hpp"

namespace vcg {

// Relevance categories, best to worst. Scores map 5..1 in this order.
enum class JudgeCategory { excellent_match, good_match, partial_match, poor_match, no_match };

const char* to_string(JudgeCategory category);
int category_score(JudgeCategory category);
JudgeCategory category_from_score(int score);
std::optional<JudgeCategory> category_from_token(const std::string& token);

// At most this many history items are shown to the judge, newest first.
inline constexpr size_t kJudgeHistoryCap = 12;

// One history item as the judge sees it. image_ref is an attachment slot for
// providers that accept media; it stays empty at desk scale.
struct JudgeItemDescriptor {
    uint64_t product_id = 0;
    int64_t ts = 0;
    std::string interaction;
    std::string image_ref;
};

// The video under evaluation. frames_ref is the media attachment slot.
struct JudgeCandidateDescriptor {
    uint64_t video_id = 0;
    uint32_t duration_ms = 0;
    uint64_t creator_id = 0;
    std::vector<uint64_t> product_ids;
    std::vector<std::string> hashtags;
    std::string frames_ref;
};

struct JudgePrompt {
    std::string text;
    std::vector<JudgeItemDescriptor> user_items;
    JudgeCandidateDescriptor candidate;
};

struct JudgeVerdict {
    JudgeCategory category = JudgeCategory::no_match;
    int score = 0;
    std::string raw_response;
};

// Substitutes {{user_items}} and {{candidate}} in the template. History is
// truncated to the kJudgeHistoryCap most recent events, rendered newest first;
// an empty history renders as an explicit no-history marker. Throws DataError
// if any "{{" marker survives substitution.
JudgePrompt render_prompt(const UserHistory& history, const VideoRecord& video,
                          const std::string& template_text);

// Extracts the earliest known category token. Throws UnparseableVerdict when
// none is present.
JudgeVerdict parse_verdict(const std::string& raw);

// A judge backend returns the raw text reply for one prompt. complete() may be
// called from several threads at once.
class JudgeClient {
public:
    virtual ~JudgeClient() = default;
    virtual std::string complete(const JudgePrompt& prompt) = 0;
};

// Deterministic offline judge: category from the cosine between the mean
// latent of the prompt's user items and the candidate's latent.
JudgeVerdict mock_judge(const JudgePrompt& prompt, const EmbeddingProvider& item_latents,
                        const VideoIndex& catalog);

class MockJudgeClient final : public JudgeClient {
public:
    MockJudgeClient(const EmbeddingProvider& item_latents, const VideoIndex& catalog)
        : items_(item_latents), catalog_(catalog) {}
    std::string complete(const JudgePrompt& prompt) override;

private:
    const EmbeddingProvider& items_;
    const VideoIndex& catalog_;
};

// Chat-completion client for a live judge endpoint. Sends one user message,
// temperature 0, bearer token when present.
class HttpJudgeClient final : public JudgeClient {
public:
    // url carries scheme, host, port and path, e.g. "http://judge:8080/v1/chat".
    HttpJudgeClient(const std::string& url, std::string token);
    // Reads JUDGE_URL (required) and JUDGE_TOKEN (optional).
    static HttpJudgeClient from_env();

    std::string complete(const JudgePrompt& prompt) override;

private:
    std::string base_;
    std::string path_;
    std::string token_;
};

struct JudgeOptions {
    size_t max_retries = 3;       // additional attempts after the first failure
    uint32_t backoff_ms = 100;    // first retry delay, doubled per retry
    size_t in_flight_cap = 4;     // concurrent judge calls
};

struct JudgeReport {
    uint64_t user_id = 0;
    double mean_score = 0.0;
    std::vector<uint64_t> video_ids;
    std::vector<JudgeVerdict> verdicts;
};

// Judges the first min(k, |feed|) items and averages their scores. Transport
// errors are retried with exponential backoff; a call that still fails (or an
// unparseable verdict, which is never retried) aborts with the candidate
// index. Calls run concurrently up to the in-flight cap; results are ordered
// by candidate index regardless of completion order.
JudgeReport judge_topk(JudgeClient& client, const UserHistory& history, const RankedFeed& feed,
                       size_t k, const std::string& template_text, const VideoIndex& catalog,
                       const JudgeOptions& opts = {});

// Counts of scores 1..5 (index 0 holds score 1).
std::array<size_t, 5> score_histogram(const std::vector<JudgeReport>& reports);

}  // namespace vcg
