#include "vcg/profiler.hpp"

#include <algorithm>

#include <nlohmann/json.hpp>

namespace vcg {

const char* to_string(InteractionKind kind) {
    switch (kind) {
        case InteractionKind::click: return "click";
        case InteractionKind::add_to_cart: return "add_to_cart";
        case InteractionKind::wishlist: return "wishlist";
        case InteractionKind::purchase: return "purchase";
    }
    return "click";
}

InteractionKind interaction_kind_from_string(const std::string& s) {
    if (s == "click") return InteractionKind::click;
    if (s == "add_to_cart") return InteractionKind::add_to_cart;
    if (s == "wishlist") return InteractionKind::wishlist;
    if (s == "purchase") return InteractionKind::purchase;
    throw DataError("unknown interaction kind: " + s);
}

void UserHistory::validate() const {
    for (size_t i = 1; i < events.size(); ++i)
        if (events[i].ts < events[i - 1].ts)
            throw std::invalid_argument("history events not sorted by ts");
}

UserHistory UserHistory::up_to(int64_t cutoff_ts) const {
    UserHistory h;
    h.user_id = user_id;
    for (const auto& e : events)
        if (e.ts <= cutoff_ts) h.events.push_back(e);
    return h;
}

Embedding user_profile(const UserHistory& history, const EmbeddingProvider& provider,
                       int64_t t_now, const ProfileConfig& cfg) {
    if (history.events.empty()) {
        validate_embedding(cfg.fallback, provider.dimension());
        return cfg.fallback;
    }
    history.validate();
    if (history.events.back().ts > t_now)
        throw std::invalid_argument("user_profile: history contains future events");

    const size_t d = provider.dimension();
    const size_t n = history.events.size();
    const size_t take = std::min(cfg.max_history, n);

    Embedding acc(d, 0.0);
    double weight_sum = 0.0;
    for (size_t i = n - take; i < n; ++i) {
        const auto& ev = history.events[i];
        double w = decay_weight(t_now, ev.ts, cfg.lambda) *
                   cfg.kind_weights[static_cast<size_t>(ev.kind)];
        const Embedding& e = provider.get(ev.product_id);
        for (size_t j = 0; j < d; ++j) acc[j] += w * e[j];
        weight_sum += w;
    }
    if (weight_sum <= 0.0) {
        // All weights underflowed; the limit of the formula is the newest event.
        return provider.get(history.events.back().product_id);
    }
    for (double& v : acc) v /= weight_sum;
    return acc;
}

Embedding global_fallback(const std::vector<std::pair<uint64_t, double>>& popular_products,
                          const EmbeddingProvider& provider) {
    if (popular_products.empty())
        throw std::invalid_argument("global_fallback: empty product list");
    const size_t d = provider.dimension();
    Embedding acc(d, 0.0);
    double weight_sum = 0.0;
    for (const auto& [id, w] : popular_products) {
        if (w <= 0.0) throw std::invalid_argument("global_fallback: non-positive weight");
        const Embedding& e = provider.get(id);
        for (size_t j = 0; j < d; ++j) acc[j] += w * e[j];
        weight_sum += w;
    }
    for (double& v : acc) v /= weight_sum;
    return acc;
}

std::vector<std::string> histories_to_jsonl(const std::vector<UserHistory>& histories) {
    std::vector<std::string> lines;
    lines.reserve(histories.size());
    for (const auto& h : histories) {
        nlohmann::json events = nlohmann::json::array();
        for (const auto& e : h.events) {
            events.push_back({{"product_id", e.product_id},
                              {"ts", e.ts},
                              {"kind", to_string(e.kind)}});
        }
        nlohmann::json j{{"user_id", h.user_id}, {"events", std::move(events)}};
        lines.push_back(j.dump());
    }
    return lines;
}

std::vector<UserHistory> histories_from_jsonl(const std::vector<std::string>& lines) {
    std::vector<UserHistory> out;
    for (const auto& line : lines) {
        if (line.empty()) continue;
        nlohmann::json j;
        try {
            j = nlohmann::json::parse(line);
        } catch (const nlohmann::json::exception& e) {
            throw DataError(std::string("bad history record: ") + e.what());
        }
        UserHistory h;
        h.user_id = j.at("user_id").get<uint64_t>();
        for (const auto& ev : j.at("events")) {
            InteractionEvent e;
            e.product_id = ev.at("product_id").get<uint64_t>();
            e.ts = ev.at("ts").get<int64_t>();
            e.kind = interaction_kind_from_string(ev.at("kind").get<std::string>());
            h.events.push_back(e);
        }
        h.validate();
        out.push_back(std::move(h));
    }
    return out;
}

}  // namespace vcg
