#pragma once

#include <atomic>
#include <chrono>
#include <cmath>
#include <condition_variable>
#include <cstdio>
#include <mutex>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "advpose/error.hpp"
#include "advpose/naturalness.hpp"
#include "advpose/objective.hpp"
#include "advpose/raster.hpp"
#include "advpose/wire.hpp"

namespace advpose {

// JSON-over-HTTP scorer protocol:
//   POST /v1/embed_image   {"id", "format": "adpr-base64", "data"} -> {"id", "embedding": [..]}
//   POST /v1/embed_text    {"id", "text"}                          -> {"id", "embedding": [..]}
//   POST /v1/naturalness   {"id", "format", "data"}                -> {"id", "score_r", "score_p"}
// Errors arrive as HTTP 4xx with {"error": string}.

struct RemoteConfig {
    std::string host = "127.0.0.1";
    int port = 8711;
    int retries = 3;            // transport retries beyond the first attempt
    int backoff_ms = 100;       // doubled after each failed attempt
    int timeout_sec = 10;
    int max_connections = 4;    // concurrent in-flight request cap
};

// Parse "http://host:port" (or "host:port") into a RemoteConfig.
inline RemoteConfig parse_endpoint(const std::string& endpoint) {
    RemoteConfig cfg;
    std::string rest = endpoint;
    const std::string scheme = "http://";
    if (rest.rfind(scheme, 0) == 0) rest = rest.substr(scheme.size());
    if (rest.rfind("https://", 0) == 0) throw InvalidInput("https endpoints are not supported");
    while (!rest.empty() && rest.back() == '/') rest.pop_back();
    auto colon = rest.rfind(':');
    if (colon == std::string::npos || colon + 1 >= rest.size())
        throw InvalidInput("endpoint must look like http://host:port");
    cfg.host = rest.substr(0, colon);
    try {
        cfg.port = std::stoi(rest.substr(colon + 1));
    } catch (const std::exception&) {
        throw InvalidInput("bad endpoint port in '" + endpoint + "'");
    }
    if (cfg.host.empty() || cfg.port <= 0 || cfg.port > 65535)
        throw InvalidInput("bad endpoint '" + endpoint + "'");
    return cfg;
}

// Client for the remote scorer protocol. Embedding dimension is pinned by
// the first successful call and every later response must agree. Responses
// are matched to requests by id. Non-unit embeddings are normalized (and
// counted); a fresh connection per request keeps concurrent use safe, with
// a semaphore-style cap on simultaneous connections.
class RemoteScorer : public ImageEncoder, public TextEncoder, public NaturalnessScorer {
public:
    explicit RemoteScorer(RemoteConfig cfg) : cfg_(std::move(cfg)) {}

    Embedding embed_image(const Raster& image) override {
        nlohmann::json body;
        body["id"] = next_id("img");
        body["format"] = "adpr-base64";
        body["data"] = wire::encode_image_payload(image);
        nlohmann::json resp = post("/v1/embed_image", body);
        return parse_embedding(resp, body["id"]);
    }

    Embedding embed_text(const std::string& text) override {
        nlohmann::json body;
        body["id"] = next_id("txt");
        body["text"] = text;
        nlohmann::json resp = post("/v1/embed_text", body);
        return parse_embedding(resp, body["id"]);
    }

    std::pair<double, double> score(const Raster& image, const PoseParams&) override {
        nlohmann::json body;
        body["id"] = next_id("nat");
        body["format"] = "adpr-base64";
        body["data"] = wire::encode_image_payload(image);
        nlohmann::json resp = post("/v1/naturalness", body);
        require_id(resp, body["id"]);
        if (!resp.contains("score_r") || !resp.contains("score_p") ||
            !resp["score_r"].is_number() || !resp["score_p"].is_number())
            throw ProtocolError("naturalness response missing numeric score_r/score_p: " +
                                excerpt(resp.dump()));
        double r = resp["score_r"].get<double>();
        double p = resp["score_p"].get<double>();
        if (!std::isfinite(r) || !std::isfinite(p))
            throw ProtocolError("naturalness scores must be finite");
        return {r, p};
    }

    // How many responses needed client-side normalization so far.
    long normalized_responses() const { return normalized_count_.load(); }
    int pinned_dimension() const { return pinned_dim_.load(); }

private:
    struct ConnectionSlot {
        explicit ConnectionSlot(RemoteScorer& owner) : owner_(owner) {
            std::unique_lock<std::mutex> lock(owner_.gate_mutex_);
            owner_.gate_cv_.wait(lock,
                                 [&] { return owner_.in_flight_ < owner_.cfg_.max_connections; });
            ++owner_.in_flight_;
        }
        ~ConnectionSlot() {
            {
                std::lock_guard<std::mutex> lock(owner_.gate_mutex_);
                --owner_.in_flight_;
            }
            owner_.gate_cv_.notify_one();
        }
        RemoteScorer& owner_;
    };

    std::string next_id(const char* prefix) {
        return std::string(prefix) + "-" + std::to_string(request_counter_.fetch_add(1));
    }

    static std::string excerpt(const std::string& payload) {
        constexpr std::size_t limit = 200;
        if (payload.size() <= limit) return payload;
        return payload.substr(0, limit) + "...";
    }

    nlohmann::json post(const std::string& path, const nlohmann::json& body) {
        std::string payload = body.dump();
        std::string last_error;
        int backoff = cfg_.backoff_ms;
        for (int attempt = 0; attempt <= cfg_.retries; ++attempt) {
            if (attempt > 0) {
                std::this_thread::sleep_for(std::chrono::milliseconds(backoff));
                backoff *= 2;
            }
            httplib::Result res = [&] {
                ConnectionSlot slot(*this);    // caps concurrent connections
                httplib::Client client(cfg_.host, cfg_.port);
                client.set_connection_timeout(cfg_.timeout_sec, 0);
                client.set_read_timeout(cfg_.timeout_sec, 0);
                return client.Post(path, payload, "application/json");
            }();
            if (!res) {
                last_error = "transport error " + httplib::to_string(res.error());
                continue;
            }
            if (res->status >= 400 && res->status < 500) {
                std::string detail;
                try {
                    auto j = nlohmann::json::parse(res->body);
                    detail = j.value("error", res->body);
                } catch (const nlohmann::json::exception&) {
                    detail = res->body;
                }
                if (res->status == 404)
                    throw EndpointMissing("endpoint " + path + " not implemented by the server");
                throw ProtocolError("server rejected " + path + " (" + std::to_string(res->status) +
                                    "): " + excerpt(detail));
            }
            if (res->status != 200) {
                last_error = "http status " + std::to_string(res->status);
                continue;
            }
            try {
                return nlohmann::json::parse(res->body);
            } catch (const nlohmann::json::exception& e) {
                throw ProtocolError("malformed response body for " + path + ": " + e.what() +
                                    "; payload: " + excerpt(res->body));
            }
        }
        throw ProviderUnavailable("endpoint " + cfg_.host + ":" + std::to_string(cfg_.port) +
                                  " unreachable after " + std::to_string(cfg_.retries + 1) +
                                  " attempts (" + last_error + ")");
    }

    static void require_id(const nlohmann::json& resp, const nlohmann::json& want) {
        if (!resp.contains("id") || resp["id"] != want)
            throw ProtocolError("response id does not match request id " + want.get<std::string>() +
                                ": " + excerpt(resp.dump()));
    }

    Embedding parse_embedding(const nlohmann::json& resp, const nlohmann::json& want_id) {
        require_id(resp, want_id);
        if (!resp.contains("embedding") || !resp["embedding"].is_array())
            throw ProtocolError("response missing embedding array: " + excerpt(resp.dump()));
        Embedding out;
        out.reserve(resp["embedding"].size());
        double norm_sq = 0.0;
        for (const auto& v : resp["embedding"]) {
            if (!v.is_number()) throw ProtocolError("embedding entries must be numbers");
            double x = v.get<double>();
            if (!std::isfinite(x)) throw ProtocolError("embedding entries must be finite");
            out.push_back(x);
            norm_sq += x * x;
        }
        if (out.empty()) throw ProtocolError("embedding array is empty");
        if (norm_sq == 0.0) throw ProviderError("degenerate embedding: zero norm");

        int dim = static_cast<int>(out.size());
        int expected = pinned_dim_.load();
        if (expected == 0) {
            // First successful call pins the dimension for the whole run.
            int zero = 0;
            pinned_dim_.compare_exchange_strong(zero, dim);
            expected = pinned_dim_.load();
        }
        if (dim != expected)
            throw ProtocolError("embedding dimension changed: expected " +
                                std::to_string(expected) + ", got " + std::to_string(dim));

        double n = std::sqrt(norm_sq);
        if (std::abs(n - 1.0) > 1e-9) {
            for (double& x : out) x /= n;
            if (normalized_count_.fetch_add(1) == 0)
                std::fprintf(stderr,
                             "note: server returned a non-unit embedding (norm %.6f); "
                             "normalizing client-side\n",
                             n);
        }
        return out;
    }

    RemoteConfig cfg_;
    std::atomic<long> request_counter_{0};
    std::atomic<int> pinned_dim_{0};
    std::atomic<long> normalized_count_{0};
    std::mutex gate_mutex_;
    std::condition_variable gate_cv_;
    int in_flight_ = 0;
};

}  // namespace advpose
