#pragma once

// HTTP client for an out-of-process score-distillation provider.
//
//   POST /gradient
//   {"prompt", "step", "total_steps", "seed", "height", "width", "image_b64"}
//   -> 200 {"grad_b64"}
//
// Payloads are base64 little-endian float32, H*W*3 values, row-major RGB.

#include <chrono>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "vecforge/guidance.hpp"

namespace vecforge {

// Network-level failure; the request may be retried.
struct TransportError : Error {
    using Error::Error;
};
// The provider answered with something outside the protocol.
struct ProtocolError : Error {
    using Error::Error;
};

inline std::string make_gradient_request(const RasterImage& image, const GuidanceContext& ctx) {
    nlohmann::json body = {
        {"prompt", ctx.prompt},
        {"step", ctx.step},
        {"total_steps", ctx.total_steps},
        {"seed", ctx.rng_seed},
        {"height", image.height_px},
        {"width", image.width_px},
        {"image_b64", wire::encode_floats(image.pixels)},
    };
    return body.dump();
}

inline GradientImage parse_gradient_response(std::string_view text, int width, int height) {
    nlohmann::json body;
    try {
        body = nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ProtocolError(std::string("gradient response is not JSON: ") + e.what());
    }
    if (!body.is_object() || !body.contains("grad_b64") || !body["grad_b64"].is_string())
        throw ProtocolError("gradient response lacks a grad_b64 string");
    GradientImage g(width, height, 0.0);
    try {
        g.pixels = wire::decode_floats(body["grad_b64"].get<std::string>(), g.pixels.size());
    } catch (const wire::DecodeError& e) {
        throw ProtocolError(std::string("gradient payload: ") + e.what());
    }
    for (double v : g.pixels)
        if (!std::isfinite(v)) throw ProtocolError("gradient payload contains non-finite values");
    return g;
}

class RemoteSdsGuidance final : public Guidance {
public:
    // base_url like "http://127.0.0.1:8765"
    explicit RemoteSdsGuidance(std::string base_url, std::chrono::seconds timeout = std::chrono::seconds(120),
                               int retries = 2)
        : base_url_(std::move(base_url)), timeout_(timeout), retries_(retries) {}

    GradientImage gradient(const RasterImage& image, const GuidanceContext& ctx) override {
        const std::string request = make_gradient_request(image, ctx);
        for (int attempt = 0;; ++attempt) {
            httplib::Client client(base_url_);
            client.set_connection_timeout(timeout_);
            client.set_read_timeout(timeout_);
            client.set_write_timeout(timeout_);
            auto res = client.Post("/gradient", request, "application/json");
            if (!res) {
                if (attempt < retries_) continue;
                throw TransportError("gradient provider " + base_url_ + " unreachable: " + httplib::to_string(res.error()));
            }
            if (res->status != 200)
                throw ProtocolError("gradient provider returned HTTP " + std::to_string(res->status) + ": " + res->body);
            return parse_gradient_response(res->body, image.width_px, image.height_px);
        }
    }

private:
    std::string base_url_;
    std::chrono::seconds timeout_;
    int retries_;
};

}  // namespace vecforge
