#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "vcg/embedding.hpp"

namespace vcg {

enum class InteractionKind { click, add_to_cart, wishlist, purchase };

const char* to_string(InteractionKind kind);
InteractionKind interaction_kind_from_string(const std::string& s);

struct InteractionEvent {
    uint64_t product_id = 0;
    int64_t ts = 0;
    InteractionKind kind = InteractionKind::click;
};

// Time-ordered product interaction history of one user.
struct UserHistory {
    uint64_t user_id = 0;
    std::vector<InteractionEvent> events;  // sorted by ts non-decreasing

    void validate() const;
    // Events with ts <= cutoff, preserving order.
    UserHistory up_to(int64_t cutoff_ts) const;
};

struct ProfileConfig {
    // Default decay: half-life of 7 days.
    double lambda = 0.6931471805599453 / 604'800'000.0;
    size_t max_history = 50;
    Embedding fallback;  // global popular-products embedding, used for empty histories
    // Optional pre-decay weight per interaction kind (click, add_to_cart,
    // wishlist, purchase). All 1 by default: kinds are not distinguished.
    std::array<double, 4> kind_weights{1.0, 1.0, 1.0, 1.0};
};

// Decay-weighted average of the product embeddings of the most recent
// max_history events; the configured fallback when the history is empty.
Embedding user_profile(const UserHistory& history, const EmbeddingProvider& provider,
                       int64_t t_now, const ProfileConfig& cfg);

// Weight-normalized average of the given products' embeddings.
Embedding global_fallback(const std::vector<std::pair<uint64_t, double>>& popular_products,
                          const EmbeddingProvider& provider);

// Line-delimited text records, one user per line.
std::vector<std::string> histories_to_jsonl(const std::vector<UserHistory>& histories);
std::vector<UserHistory> histories_from_jsonl(const std::vector<std::string>& lines);

}  // namespace vcg
