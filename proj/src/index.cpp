#include "vcg/index.hpp"

#include <algorithm>

#include "vcg/binio.hpp"

namespace vcg {

VideoIndex VideoIndex::build(std::vector<VideoRecord> records, int64_t build_ts) {
    if (records.empty()) throw std::invalid_argument("index build: no records");
    VideoIndex idx;
    idx.dimension_ = records[0].embedding.size();
    if (idx.dimension_ == 0) throw std::invalid_argument("index build: empty embedding");
    std::sort(records.begin(), records.end(),
              [](const VideoRecord& a, const VideoRecord& b) { return a.video_id < b.video_id; });
    int64_t max_upload = 0;
    for (size_t i = 0; i < records.size(); ++i) {
        const auto& r = records[i];
        if (i > 0 && r.video_id == records[i - 1].video_id)
            throw std::invalid_argument("index build: duplicate video id " +
                                        std::to_string(r.video_id));
        validate_embedding(r.embedding, idx.dimension_);
        if (r.duration_ms == 0)
            throw std::invalid_argument("index build: zero duration for video " +
                                        std::to_string(r.video_id));
        max_upload = std::max(max_upload, static_cast<int64_t>(r.upload_ts));
        idx.by_id_.emplace(r.video_id, i);
    }
    idx.build_ts_ = build_ts > 0 ? build_ts : max_upload;
    idx.records_ = std::move(records);
    return idx;
}

const VideoRecord& VideoIndex::get(uint64_t video_id) const {
    auto it = by_id_.find(video_id);
    if (it == by_id_.end()) throw DataError("unknown video id " + std::to_string(video_id));
    return records_[it->second];
}

std::vector<ScoredVideo> VideoIndex::top_k(const Embedding& query, size_t k,
                                           const std::unordered_set<uint64_t>& exclude) const {
    if (records_.empty()) return {};
    if (query.size() != dimension_)
        throw std::invalid_argument("top_k: query dimension mismatch");
    if (k == 0) throw std::invalid_argument("top_k: k must be >= 1");

    // Heap keeps the current best k with the worst of them at the front.
    auto better = [](const ScoredVideo& a, const ScoredVideo& b) {
        if (a.score != b.score) return a.score > b.score;
        return a.video_id < b.video_id;
    };
    std::vector<ScoredVideo> heap;
    heap.reserve(k + 1);
    for (const auto& r : records_) {
        if (exclude.count(r.video_id)) continue;
        ScoredVideo cand{r.video_id, dot_score(query, r.embedding)};
        if (heap.size() < k) {
            heap.push_back(cand);
            std::push_heap(heap.begin(), heap.end(), better);
        } else if (better(cand, heap.front())) {
            std::pop_heap(heap.begin(), heap.end(), better);
            heap.back() = cand;
            std::push_heap(heap.begin(), heap.end(), better);
        }
    }
    std::sort(heap.begin(), heap.end(), better);
    return heap;
}

std::vector<uint8_t> VideoIndex::save() const {
    BinWriter w;
    w.magic("VIX1");
    w.u32(1);
    w.u32(static_cast<uint32_t>(dimension_));
    w.u64(static_cast<uint64_t>(build_ts_));
    w.u64(records_.size());
    for (const auto& r : records_) {
        w.u64(r.video_id);
        w.u32(r.duration_ms);
        w.u64(r.upload_ts);
        w.u64(r.creator_id);
        w.u16(static_cast<uint16_t>(r.product_ids.size()));
        for (uint64_t pid : r.product_ids) w.u64(pid);
        w.u16(static_cast<uint16_t>(r.hashtags.size()));
        for (const auto& tag : r.hashtags) w.str16(tag);
        for (double v : r.embedding) w.f32(static_cast<float>(v));
    }
    return w.take();
}

VideoIndex VideoIndex::load(const std::vector<uint8_t>& bytes) {
    BinReader rd(bytes);
    rd.expect_magic("VIX1");
    uint32_t version = rd.u32();
    if (version != 1) throw DataError("VIX1: unsupported version " + std::to_string(version));
    uint32_t dim = rd.u32();
    int64_t build_ts = static_cast<int64_t>(rd.u64());
    uint64_t count = rd.u64();
    if (count == 0) throw DataError("VIX1: empty index");
    std::vector<VideoRecord> records;
    records.reserve(count);
    for (uint64_t i = 0; i < count; ++i) {
        VideoRecord r;
        r.video_id = rd.u64();
        r.duration_ms = rd.u32();
        r.upload_ts = rd.u64();
        r.creator_id = rd.u64();
        uint16_t np = rd.u16();
        r.product_ids.reserve(np);
        for (uint16_t j = 0; j < np; ++j) r.product_ids.push_back(rd.u64());
        uint16_t nh = rd.u16();
        r.hashtags.reserve(nh);
        for (uint16_t j = 0; j < nh; ++j) r.hashtags.push_back(rd.str16());
        r.embedding.resize(dim);
        for (uint32_t j = 0; j < dim; ++j) r.embedding[j] = static_cast<double>(rd.f32());
        records.push_back(std::move(r));
    }
    if (!rd.at_end()) throw DataError("VIX1: trailing bytes");
    return build(std::move(records), build_ts);
}

void VideoIndex::save_file(const std::string& path) const { write_file_bytes(path, save()); }

VideoIndex VideoIndex::load_file(const std::string& path) {
    return load(read_file_bytes(path));
}

}  // namespace vcg
