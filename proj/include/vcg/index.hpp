#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "vcg/embedding.hpp"

namespace vcg {

struct VideoRecord {
    uint64_t video_id = 0;
    Embedding embedding;
    uint32_t duration_ms = 0;
    uint64_t upload_ts = 0;
    uint64_t creator_id = 0;
    std::vector<uint64_t> product_ids;
    std::vector<std::string> hashtags;
};

struct ScoredVideo {
    uint64_t video_id;
    double score;
    bool operator==(const ScoredVideo&) const = default;
};

// Precomputed video-embedding store with exact top-k dot-product retrieval.
// Immutable after build; concurrent queries are safe and lock-free.
class VideoIndex {
public:
    // An empty index; top_k over it returns nothing.
    VideoIndex() = default;

    // Records are stored sorted by id. build_ts <= 0 derives it from the
    // newest upload timestamp.
    static VideoIndex build(std::vector<VideoRecord> records, int64_t build_ts = 0);

    size_t size() const { return records_.size(); }
    size_t dimension() const { return dimension_; }
    int64_t build_ts() const { return build_ts_; }

    bool contains(uint64_t video_id) const { return by_id_.count(video_id) > 0; }
    const VideoRecord& get(uint64_t video_id) const;
    const std::vector<VideoRecord>& records() const { return records_; }

    // The k highest-dot-score videos not in `exclude`, sorted by score
    // descending with ties broken by ascending video id. Returns fewer than k
    // when the candidate pool is smaller.
    std::vector<ScoredVideo> top_k(const Embedding& query, size_t k,
                                   const std::unordered_set<uint64_t>& exclude = {}) const;

    // Snapshot format, magic "VIX1". Embeddings are persisted as f32; the
    // build timestamp round-trips.
    std::vector<uint8_t> save() const;
    static VideoIndex load(const std::vector<uint8_t>& bytes);
    void save_file(const std::string& path) const;
    static VideoIndex load_file(const std::string& path);

private:
    size_t dimension_ = 0;
    int64_t build_ts_ = 0;
    std::vector<VideoRecord> records_;
    std::unordered_map<uint64_t, size_t> by_id_;
};

}  // namespace vcg
