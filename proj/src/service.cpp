#include "vcg/service.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include <httplib.h>

#include "vcg/errors.hpp"
#include "vcg/rankers.hpp"

namespace vcg {

ServiceSnapshot::ServiceSnapshot(VideoIndex idx, TableProvider latents, ProfileConfig profile_cfg,
                                 std::vector<UserHistory> hists, int64_t now)
    : index(std::move(idx)),
      product_latents(std::move(latents)),
      profile(std::move(profile_cfg)),
      t_now(now) {
    histories.reserve(hists.size());
    for (UserHistory& h : hists) {
        uint64_t uid = h.user_id;
        histories.emplace(uid, std::move(h));
    }
}

namespace {

// Accepts any JSON integer with a non-negative value; nlohmann's
// signed/unsigned storage split is an implementation detail.
bool is_nonnegative_integer(const nlohmann::json& v) {
    return v.is_number_unsigned() ||
           (v.is_number_integer() && v.get<int64_t>() >= 0);
}

uint64_t get_u64(const nlohmann::json& j, const char* key) {
    const nlohmann::json& v = j.at(key);
    if (!is_nonnegative_integer(v))
        throw DataError(std::string(key) + " must be a non-negative integer");
    return v.get<uint64_t>();
}

UserHistory history_from_request(const ServiceSnapshot& snap, const nlohmann::json& body) {
    bool has_user = body.contains("user_id");
    bool has_events = body.contains("events");
    if (has_user && has_events)
        throw std::invalid_argument("provide either user_id or events, not both");
    if (has_user) {
        uint64_t uid = get_u64(body, "user_id");
        auto it = snap.histories.find(uid);
        if (it == snap.histories.end())
            throw DataError("unknown user_id " + std::to_string(uid));
        return it->second;
    }
    UserHistory h;
    if (has_events) {
        const nlohmann::json& events = body.at("events");
        if (!events.is_array()) throw DataError("events must be an array");
        for (const nlohmann::json& e : events) {
            InteractionEvent ev;
            ev.product_id = get_u64(e, "product_id");
            ev.ts = e.at("ts").get<int64_t>();
            ev.kind = interaction_kind_from_string(e.at("kind").get<std::string>());
            h.events.push_back(ev);
        }
        std::stable_sort(h.events.begin(), h.events.end(),
                         [](const InteractionEvent& a, const InteractionEvent& b) {
                             return a.ts < b.ts;
                         });
    }
    return h;
}

}  // namespace

nlohmann::json handle_retrieve(const ServiceSnapshot& snapshot, const nlohmann::json& request) {
    if (!request.is_object()) throw DataError("request body must be a JSON object");

    size_t k = 10;
    if (request.contains("k")) {
        const nlohmann::json& kv = request.at("k");
        if (!is_nonnegative_integer(kv) || kv.get<uint64_t>() == 0)
            throw DataError("k must be a positive integer");
        k = kv.get<size_t>();
    }
    std::unordered_set<uint64_t> exclude;
    if (request.contains("exclude")) {
        const nlohmann::json& ex = request.at("exclude");
        if (!ex.is_array()) throw DataError("exclude must be an array of video ids");
        for (const nlohmann::json& v : ex) {
            if (!is_nonnegative_integer(v)) throw DataError("exclude must be an array of video ids");
            exclude.insert(v.get<uint64_t>());
        }
    }
    int64_t t_now = snapshot.t_now;
    if (request.contains("t_now")) t_now = request.at("t_now").get<int64_t>();

    UserHistory history = history_from_request(snapshot, request);
    RankedFeed feed = rank_multimodal(snapshot.index, history, snapshot.product_latents, t_now,
                                      snapshot.profile, k, exclude);

    nlohmann::json items = nlohmann::json::array();
    for (const RankedItem& it : feed.items)
        items.push_back({{"video_id", it.video_id}, {"score", it.score}});
    return nlohmann::json{{"items", std::move(items)}};
}

nlohmann::json handle_healthz(const ServiceSnapshot& snapshot) {
    return nlohmann::json{{"size", snapshot.index.size()},
                          {"build_ts", snapshot.index.build_ts()}};
}

RetrievalService::RetrievalService() : server_(std::make_unique<httplib::Server>()) {
    wire_routes();
}

RetrievalService::~RetrievalService() { stop(); }

void RetrievalService::load(std::shared_ptr<const ServiceSnapshot> snapshot) {
    std::lock_guard<std::mutex> lock(mu_);
    snap_ = std::move(snapshot);
}

std::shared_ptr<const ServiceSnapshot> RetrievalService::snapshot() const {
    std::lock_guard<std::mutex> lock(mu_);
    return snap_;
}

namespace {

void set_error(httplib::Response& res, int status, const std::string& message) {
    res.status = status;
    res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

}  // namespace

void RetrievalService::wire_routes() {
    server_->Post("/v1/retrieve", [this](const httplib::Request& req, httplib::Response& res) {
        std::shared_ptr<const ServiceSnapshot> snap = snapshot();
        if (!snap) {
            set_error(res, 503, "index not loaded");
            return;
        }
        auto t0 = std::chrono::steady_clock::now();
        try {
            nlohmann::json body =
                req.body.empty() ? nlohmann::json::object() : nlohmann::json::parse(req.body);
            nlohmann::json out = handle_retrieve(*snap, body);
            double ms = std::chrono::duration<double, std::milli>(
                            std::chrono::steady_clock::now() - t0)
                            .count();
            std::ostringstream latency;
            latency << ms;
            res.set_header("X-Latency-Ms", latency.str());
            res.set_content(out.dump(), "application/json");
        } catch (const nlohmann::json::exception& e) {
            set_error(res, 400, std::string("malformed request: ") + e.what());
        } catch (const DataError& e) {
            set_error(res, 400, e.what());
        } catch (const std::invalid_argument& e) {
            set_error(res, 400, e.what());
        }
    });

    server_->Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
        std::shared_ptr<const ServiceSnapshot> snap = snapshot();
        if (!snap) {
            set_error(res, 503, "index not loaded");
            return;
        }
        res.set_content(handle_healthz(*snap).dump(), "application/json");
    });
}

bool RetrievalService::listen(const std::string& host, int port) {
    return server_->listen(host, port);
}

int RetrievalService::start_background(const std::string& host) {
    int port = server_->bind_to_any_port(host);
    if (port <= 0) throw TransportError("could not bind a service port on " + host);
    runner_ = std::thread([this]() { server_->listen_after_bind(); });
    server_->wait_until_ready();
    return port;
}

void RetrievalService::stop() {
    server_->stop();
    if (runner_.joinable()) runner_.join();
}

}  // namespace vcg
