#include "vcg/embedding.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "vcg/binio.hpp"

namespace vcg {

void validate_embedding(const Embedding& e, size_t dim) {
    if (dim > 0 && e.size() != dim)
        throw std::invalid_argument("embedding dimension mismatch: got " +
                                    std::to_string(e.size()) + ", expected " +
                                    std::to_string(dim));
    for (double v : e)
        if (!std::isfinite(v)) throw std::invalid_argument("embedding has non-finite entry");
}

double dot_score(const Embedding& a, const Embedding& b) {
    if (a.size() != b.size())
        throw std::invalid_argument("dot_score dimension mismatch: " + std::to_string(a.size()) +
                                    " vs " + std::to_string(b.size()));
    double s = 0.0;
    for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s;
}

double l2_norm(const Embedding& e) {
    double s = 0.0;
    for (double v : e) s += v * v;
    return std::sqrt(s);
}

double cosine(const Embedding& a, const Embedding& b) {
    double na = l2_norm(a);
    double nb = l2_norm(b);
    if (na == 0.0 || nb == 0.0) return 0.0;
    return dot_score(a, b) / (na * nb);
}

Embedding quantize_f32(const Embedding& e) {
    Embedding out(e.size());
    for (size_t i = 0; i < e.size(); ++i) out[i] = static_cast<double>(static_cast<float>(e[i]));
    return out;
}

Embedding mean_pool(const FrameSet& frames, bool normalize) {
    if (frames.frames.empty()) throw std::invalid_argument("mean_pool: empty frame set");
    const size_t d = frames.frames[0].size();
    Embedding out(d, 0.0);
    for (const auto& f : frames.frames) {
        if (f.size() != d) throw std::invalid_argument("mean_pool: frame dimension mismatch");
        for (size_t i = 0; i < d; ++i) out[i] += f[i];
    }
    const double inv = 1.0 / static_cast<double>(frames.frames.size());
    for (double& v : out) v *= inv;
    if (normalize) {
        double n = l2_norm(out);
        if (n == 0.0) throw std::invalid_argument("mean_pool: cannot normalize zero vector");
        for (double& v : out) v /= n;
    }
    return out;
}

double decay_weight(int64_t t_now_ms, int64_t t_k_ms, double lambda) {
    if (t_k_ms > t_now_ms) throw std::invalid_argument("decay_weight: event is in the future");
    if (lambda < 0.0) throw std::invalid_argument("decay_weight: negative lambda");
    return std::exp(-lambda * static_cast<double>(t_now_ms - t_k_ms));
}

double lambda_per_ms_from_per_day(double lambda_per_day) {
    return lambda_per_day / 86'400'000.0;
}

double lambda_from_half_life_days(double days) {
    if (days <= 0.0) throw std::invalid_argument("half-life must be positive");
    return std::log(2.0) / (days * 86'400'000.0);
}

TableProvider::TableProvider(std::string name, size_t dimension)
    : name_(std::move(name)), dimension_(dimension) {
    if (dimension_ == 0) throw std::invalid_argument("provider dimension must be positive");
}

const Embedding& TableProvider::get(uint64_t id) const {
    auto it = table_.find(id);
    if (it == table_.end())
        throw DataError("provider '" + name_ + "': unknown id " + std::to_string(id));
    return it->second;
}

void TableProvider::put(uint64_t id, Embedding e) {
    validate_embedding(e, dimension_);
    table_[id] = std::move(e);
}

std::vector<uint64_t> TableProvider::ids_sorted() const {
    std::vector<uint64_t> ids;
    ids.reserve(table_.size());
    for (const auto& [id, _] : table_) ids.push_back(id);
    std::sort(ids.begin(), ids.end());
    return ids;
}

std::vector<uint8_t> TableProvider::save() const {
    BinWriter w;
    w.magic("EMB1");
    w.u32(1);
    w.u32(static_cast<uint32_t>(dimension_));
    w.u64(table_.size());
    for (uint64_t id : ids_sorted()) {
        w.u64(id);
        for (double v : table_.at(id)) w.f32(static_cast<float>(v));
    }
    return w.take();
}

TableProvider TableProvider::load(const std::vector<uint8_t>& bytes, std::string name) {
    BinReader r(bytes);
    r.expect_magic("EMB1");
    uint32_t version = r.u32();
    if (version != 1) throw DataError("EMB1: unsupported version " + std::to_string(version));
    uint32_t dim = r.u32();
    uint64_t count = r.u64();
    TableProvider p(std::move(name), dim);
    for (uint64_t i = 0; i < count; ++i) {
        uint64_t id = r.u64();
        Embedding e(dim);
        for (uint32_t j = 0; j < dim; ++j) e[j] = static_cast<double>(r.f32());
        validate_embedding(e, dim);
        p.table_[id] = std::move(e);
    }
    if (p.table_.size() != count) throw DataError("EMB1: duplicate ids");
    if (!r.at_end()) throw DataError("EMB1: trailing bytes");
    return p;
}

void TableProvider::save_file(const std::string& path) const { write_file_bytes(path, save()); }

TableProvider TableProvider::load_file(const std::string& path, std::string name) {
    return load(read_file_bytes(path), std::move(name));
}

std::vector<std::string> TableProvider::to_jsonl() const {
    std::vector<std::string> lines;
    lines.reserve(table_.size());
    for (uint64_t id : ids_sorted()) {
        nlohmann::json j;
        j["id"] = id;
        j["values"] = table_.at(id);
        lines.push_back(j.dump());
    }
    return lines;
}

TableProvider TableProvider::from_jsonl(const std::vector<std::string>& lines, std::string name,
                                        size_t dimension) {
    TableProvider p(std::move(name), dimension == 0 ? 1 : dimension);
    bool dim_known = dimension > 0;
    for (const auto& line : lines) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("bad embedding record: ") + e.what());
        }
        if (!j.contains("id") || !j.contains("values"))
            throw DataError("embedding record needs 'id' and 'values'");
        uint64_t id = 0;
        Embedding e;
        try {
            id = j.at("id").get<uint64_t>();
            e = j.at("values").get<Embedding>();
        } catch (const nlohmann::json::exception& ex) {
            throw DataError(std::string("bad embedding record: ") + ex.what());
        }
        if (!dim_known) {
            if (e.empty()) throw DataError("embedding record with empty values");
            p.dimension_ = e.size();
            dim_known = true;
        }
        try {
            validate_embedding(e, p.dimension_);
        } catch (const std::invalid_argument& ex) {
            throw DataError(std::string("bad embedding record: ") + ex.what());
        }
        p.table_[id] = std::move(e);
    }
    return p;
}

}  // namespace vcg
