#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <unordered_map>
#include <vector>

#include "vcg/errors.hpp"

namespace vcg {

// One point in the shared d-dimensional semantic space. Users, products and
// videos all live in the same space; mixing dimensions is an error.
using Embedding = std::vector<double>;

// Throws if the embedding contains NaN/Inf or does not match `dim` (when > 0).
void validate_embedding(const Embedding& e, size_t dim = 0);

double dot_score(const Embedding& a, const Embedding& b);
double l2_norm(const Embedding& e);

// Cosine similarity; returns 0 when either side has zero norm.
double cosine(const Embedding& a, const Embedding& b);

// Rounds every component through f32, the precision used by persisted files.
Embedding quantize_f32(const Embedding& e);

// Frame embeddings of one video, in sampling order.
struct FrameSet {
    uint64_t video_id = 0;
    std::vector<Embedding> frames;
};

// Component-wise mean of the frame embeddings. With `normalize` the result is
// scaled to unit L2 norm (error on an exact zero vector).
Embedding mean_pool(const FrameSet& frames, bool normalize = false);

// exp(-lambda * (t_now - t_k)); lambda is per millisecond.
double decay_weight(int64_t t_now_ms, int64_t t_k_ms, double lambda);

// Converts a per-day decay rate to the per-millisecond rate used everywhere.
double lambda_per_ms_from_per_day(double lambda_per_day);

// Per-millisecond rate with the given half-life in days.
double lambda_from_half_life_days(double days);

// Maps entity ids to embeddings of a fixed dimension. Implementations must be
// deterministic: the same id always yields the same embedding.
class EmbeddingProvider {
public:
    virtual ~EmbeddingProvider() = default;
    virtual const std::string& name() const = 0;
    virtual size_t dimension() const = 0;
    virtual bool contains(uint64_t id) const = 0;
    // Throws DataError for unknown ids.
    virtual const Embedding& get(uint64_t id) const = 0;
};

// In-memory id -> embedding table. This is also the reader/writer for the
// packed provider file format (magic "EMB1") and its line-delimited text twin.
class TableProvider final : public EmbeddingProvider {
public:
    TableProvider(std::string name, size_t dimension);

    const std::string& name() const override { return name_; }
    size_t dimension() const override { return dimension_; }
    bool contains(uint64_t id) const override { return table_.count(id) > 0; }
    const Embedding& get(uint64_t id) const override;

    void put(uint64_t id, Embedding e);
    size_t size() const { return table_.size(); }
    std::vector<uint64_t> ids_sorted() const;

    std::vector<uint8_t> save() const;
    static TableProvider load(const std::vector<uint8_t>& bytes, std::string name = "emb");
    void save_file(const std::string& path) const;
    static TableProvider load_file(const std::string& path, std::string name = "emb");

    // Text fixture format: one {"id": ..., "values": [...]} record per line.
    std::vector<std::string> to_jsonl() const;
    static TableProvider from_jsonl(const std::vector<std::string>& lines, std::string name,
                                    size_t dimension = 0);

private:
    std::string name_;
    size_t dimension_;
    std::unordered_map<uint64_t, Embedding> table_;
};

}  // namespace vcg
