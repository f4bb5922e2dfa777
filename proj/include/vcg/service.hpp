#pragma once

#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include <nlohmann/json.hpp>

#include "vcg/embedding.hpp"
#include "vcg/index.hpp"
#include "vcg/profiler.hpp"

namespace httplib {
class Server;
}

namespace vcg {

// Everything a running retrieval service answers from. Immutable once built;
// response bodies are pure functions of (snapshot, request body).
struct ServiceSnapshot {
    ServiceSnapshot(VideoIndex idx, TableProvider latents, ProfileConfig profile_cfg,
                    std::vector<UserHistory> hists, int64_t now);

    VideoIndex index;
    TableProvider product_latents;
    ProfileConfig profile;
    std::unordered_map<uint64_t, UserHistory> histories;
    // Default profile timestamp when the request does not carry t_now.
    int64_t t_now = 0;
};

// Request body: {"user_id": id} or {"events": [{product_id, ts, kind}]} (at
// most one of the two; neither means an empty history and the fallback
// profile), plus optional "k" (default 10), "exclude" (video ids), "t_now".
// Returns {"items": [{"video_id", "score"}, ...]}. Throws DataError or
// std::invalid_argument on malformed requests; the HTTP layer maps those
// to 4xx.
nlohmann::json handle_retrieve(const ServiceSnapshot& snapshot, const nlohmann::json& request);

// Returns {"size": catalog count, "build_ts": availability horizon}.
nlohmann::json handle_healthz(const ServiceSnapshot& snapshot);

// HTTP wrapper: POST /v1/retrieve and GET /healthz, answering 503 until a
// snapshot is loaded. Request latency travels in the X-Latency-Ms response
// header so bodies stay byte-stable. Read-only; safe under concurrent
// requests.
class RetrievalService {
public:
    RetrievalService();
    ~RetrievalService();
    RetrievalService(const RetrievalService&) = delete;
    RetrievalService& operator=(const RetrievalService&) = delete;

    void load(std::shared_ptr<const ServiceSnapshot> snapshot);

    // Blocks serving on host:port; returns false if the bind fails.
    bool listen(const std::string& host, int port);
    // Binds an ephemeral port and serves on a background thread; returns the
    // port. Throws TransportError if the bind fails.
    int start_background(const std::string& host);
    void stop();

private:
    std::shared_ptr<const ServiceSnapshot> snapshot() const;
    void wire_routes();

    std::unique_ptr<httplib::Server> server_;
    std::thread runner_;
    mutable std::mutex mu_;
    std::shared_ptr<const ServiceSnapshot> snap_;
};

}  // namespace vcg
