#pragma once

#include <atomic>
#include <cmath>
#include <memory>
#include <string>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "advpose/error.hpp"
#include "advpose/rng.hpp"
#include "advpose/wire.hpp"

namespace advpose {

// Conformance stub for the remote scorer protocol. Embeddings are
// content-addressed: the payload bytes are hashed (FNV-1a) and the hash
// seeds a deterministic unit vector, so identical inputs always round-trip
// to identical embeddings. The text_dim and norm_scale knobs exist for
// protocol conformance tests (dimension-mismatch rejection and client-side
// normalization).
struct StubServerOptions {
    int embed_dim = 64;
    int text_dim = 0;             // 0: use embed_dim; nonzero: misbehave on purpose
    double norm_scale = 1.0;      // returned vectors are scaled by this factor
    bool naturalness = true;      // serve /v1/naturalness (it is optional protocol-wide)
};

class StubServer {
public:
    explicit StubServer(StubServerOptions options = {}) : options_(options) {
        if (options_.embed_dim < 1) throw InvalidInput("embed_dim must be >= 1");

        server_.Post("/v1/embed_image", [this](const httplib::Request& req, httplib::Response& res) {
            handle_embed(req, res, /*text=*/false);
        });
        server_.Post("/v1/embed_text", [this](const httplib::Request& req, httplib::Response& res) {
            handle_embed(req, res, /*text=*/true);
        });
        server_.Post("/v1/naturalness", [this](const httplib::Request& req, httplib::Response& res) {
            if (!options_.naturalness) {
                nlohmann::json err;
                err["error"] = "naturalness endpoint not implemented";
                res.status = 404;
                res.set_content(err.dump(), "application/json");
                return;
            }
            nlohmann::json body;
            if (!parse_body(req, res, body)) return;
            if (!require_image_payload(body, res)) return;
            std::uint64_t h = fnv1a64(body["data"].get<std::string>());
            Rng rng(h);
            nlohmann::json out;
            out["id"] = body["id"];
            out["score_r"] = 1.0 + 4.0 * rng.uniform();
            out["score_p"] = 1.0 + 4.0 * rng.uniform();
            res.set_content(out.dump(), "application/json");
        });
    }

    ~StubServer() { stop(); }

    // Bind to an OS-assigned free port and serve from a background thread.
    int start() {
        int port = server_.bind_to_any_port("127.0.0.1");
        if (port <= 0) throw Error("stub server could not bind a port");
        launch();
        return port;
    }

    void start(int port) {
        if (!server_.bind_to_port("127.0.0.1", port))
            throw Error("stub server could not bind port " + std::to_string(port));
        launch();
    }

    void stop() {
        if (running_.exchange(false)) {
            server_.stop();
            if (thread_.joinable()) thread_.join();
        }
    }

    // Serve on the calling thread (CLI mode); blocks until stopped.
    void run(int port) {
        if (!server_.bind_to_port("0.0.0.0", port))
            throw Error("stub server could not bind port " + std::to_string(port));
        server_.listen_after_bind();
    }

private:
    void launch() {
        running_ = true;
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }

    static void fail(httplib::Response& res, const std::string& message) {
        nlohmann::json err;
        err["error"] = message;
        res.status = 400;
        res.set_content(err.dump(), "application/json");
    }

    static bool parse_body(const httplib::Request& req, httplib::Response& res,
                           nlohmann::json& body) {
        try {
            body = nlohmann::json::parse(req.body);
        } catch (const nlohmann::json::exception& e) {
            fail(res, std::string("body is not valid JSON: ") + e.what());
            return false;
        }
        if (!body.contains("id") || !body["id"].is_string()) {
            fail(res, "missing string field 'id'");
            return false;
        }
        return true;
    }

    static bool require_image_payload(const nlohmann::json& body, httplib::Response& res) {
        if (!body.contains("format") || body["format"] != "adpr-base64") {
            fail(res, "format must be 'adpr-base64'");
            return false;
        }
        if (!body.contains("data") || !body["data"].is_string()) {
            fail(res, "missing string field 'data'");
            return false;
        }
        try {
            wire::decode_image_payload(body["data"].get<std::string>());
        } catch (const Error& e) {
            fail(res, std::string("bad image payload: ") + e.what());
            return false;
        }
        return true;
    }

    void handle_embed(const httplib::Request& req, httplib::Response& res, bool text) {
        nlohmann::json body;
        if (!parse_body(req, res, body)) return;

        std::uint64_t hash = 0;
        if (text) {
            if (!body.contains("text") || !body["text"].is_string()) {
                fail(res, "missing string field 'text'");
                return;
            }
            hash = fnv1a64(body["text"].get<std::string>());
        } else {
            if (!require_image_payload(body, res)) return;
            hash = fnv1a64(body["data"].get<std::string>());
        }

        int dim = text && options_.text_dim > 0 ? options_.text_dim : options_.embed_dim;
        Rng rng(hash);
        std::vector<double> vec(dim);
        double norm_sq = 0.0;
        for (double& v : vec) {
            v = rng.normal();
            norm_sq += v * v;
        }
        double n = std::sqrt(norm_sq);
        for (double& v : vec) v = options_.norm_scale * v / n;

        nlohmann::json out;
        out["id"] = body["id"];
        out["embedding"] = vec;
        res.set_content(out.dump(), "application/json");
    }

    StubServerOptions options_;
    httplib::Server server_;
    std::thread thread_;
    std::atomic<bool> running_{false};
};

}  // namespace advpose
