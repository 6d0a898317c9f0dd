#pragma once

// Read-only HTTP front end over a loaded checkpoint.
//
//   GET /render?tr=K&bg=RRGGBB&aspect=W:H   -> image/svg+xml
//   GET /meta                               -> application/json
//
// Request handling is a pure function of (checkpoint, query), so identical
// queries always produce identical bytes.

#include <map>
#include <optional>
#include <string>

#include <httplib.h>
#include <json.hpp>

#include "vecforge/checkpoint.hpp"
#include "vecforge/network.hpp"
#include "vecforge/svg.hpp"
#include "vecforge/training.hpp"

namespace vecforge {

struct BadRequest : Error {
    using Error::Error;
};

struct RenderQuery {
    int tr = 1;
    Rgb bg{1.0, 1.0, 1.0};
    AspectRatio aspect{1, 1};
};

// Accepts "RRGGBB" or "#RRGGBB".
inline std::optional<Rgb> parse_hex_rgb(std::string s) {
    if (!s.empty() && s[0] == '#') s.erase(0, 1);
    if (s.size() != 6) return std::nullopt;
    int bytes[3];
    for (int i = 0; i < 3; ++i) {
        int v = 0;
        for (int j = 0; j < 2; ++j) {
            const char c = s[static_cast<std::size_t>(2 * i + j)];
            int d;
            if (c >= '0' && c <= '9') d = c - '0';
            else if (c >= 'a' && c <= 'f') d = c - 'a' + 10;
            else if (c >= 'A' && c <= 'F') d = c - 'A' + 10;
            else return std::nullopt;
            v = v * 16 + d;
        }
        bytes[i] = v;
    }
    return rgb_from_bytes(bytes[0], bytes[1], bytes[2]);
}

inline int parse_truncation(const std::string& s, int n) {
    std::size_t used = 0;
    int tr = 0;
    try {
        tr = std::stoi(s, &used);
    } catch (const std::exception&) {
        throw BadRequest("tr must be an integer, got '" + s + "'");
    }
    if (used != s.size()) throw BadRequest("tr must be an integer, got '" + s + "'");
    if (tr < 1 || tr > n) throw BadRequest("tr must be in [1, " + std::to_string(n) + "], got " + s);
    return tr;
}

// Missing fields default to: all shapes, the first trained background, the
// first trained aspect ratio.
inline RenderQuery parse_render_query(const Checkpoint& ckpt, const std::optional<std::string>& tr,
                                      const std::optional<std::string>& bg, const std::optional<std::string>& aspect) {
    RenderQuery q;
    const int n = ckpt.network.config.n_shapes;
    q.tr = tr ? parse_truncation(*tr, n) : n;
    if (bg) {
        const auto c = parse_hex_rgb(*bg);
        if (!c) throw BadRequest("bg must be RRGGBB hex, got '" + *bg + "'");
        q.bg = *c;
    } else if (!ckpt.train_config.bg_palette.empty()) {
        q.bg = ckpt.train_config.bg_palette.front().rgb;
    }
    if (aspect) {
        try {
            q.aspect = parse_aspect(*aspect);
        } catch (const FormatError& e) {
            throw BadRequest(e.what());
        }
    } else {
        q.aspect = ckpt.train_config.aspect_choices.front();
    }
    return q;
}

// Export canvas for an aspect ratio: the longer side keeps the checkpoint's
// longer canvas side.
inline Canvas export_canvas(const Checkpoint& ckpt, AspectRatio aspect) {
    TrainConfig sizing;
    sizing.canvas_px = std::max(ckpt.canvas.width_px, ckpt.canvas.height_px);
    sizing.aa_width_px = ckpt.canvas.aa_width_px;
    sizing.flatten_segments = ckpt.canvas.flatten_segments;
    return sizing.canvas_for(aspect);
}

inline Scene query_scene(const Checkpoint& ckpt, const RenderQuery& q) {
    const auto cond = conditioning_for(ckpt.network.config, q.bg, q.aspect);
    return network_scene(ckpt.network, cond, q.tr, q.bg, ckpt.train_config.shape_kind(), ckpt.train_config.stroke_width);
}

// Shared by the CLI `render` command and the service.
inline std::string render_query_svg(const Checkpoint& ckpt, const RenderQuery& q) {
    const Canvas canvas = export_canvas(ckpt, q.aspect);
    return export_svg(query_scene(ckpt, q), {canvas.width_px, canvas.height_px, ckpt.train_config.sketch_mode});
}

struct Response {
    int status = 200;
    std::string content_type;
    std::string body;
};

inline Response handle_render(const Checkpoint& ckpt, const std::optional<std::string>& tr,
                              const std::optional<std::string>& bg, const std::optional<std::string>& aspect) {
    RenderQuery q;
    try {
        q = parse_render_query(ckpt, tr, bg, aspect);
    } catch (const BadRequest& e) {
        return {400, "application/json", nlohmann::json({{"error", e.what()}}).dump()};
    }
    return {200, "image/svg+xml", render_query_svg(ckpt, q)};
}

inline nlohmann::json meta_json(const Checkpoint& ckpt) {
    nlohmann::json palette = nlohmann::json::array();
    for (const auto& c : ckpt.train_config.bg_palette) palette.push_back({{"name", c.name}, {"hex", hex_color(c.rgb)}});
    nlohmann::json aspects = nlohmann::json::array();
    for (const auto& a : ckpt.train_config.aspect_choices) aspects.push_back(a.to_string());
    return {
        {"n_shapes", ckpt.network.config.n_shapes},
        {"conditioning",
         {{"background", ckpt.network.config.condition_background},
          {"aspect", ckpt.network.config.condition_aspect},
          {"random_background", ckpt.train_config.bg_random}}},
        {"trained_palette", palette},
        {"aspect_choices", aspects},
        {"version", ckpt.version},
    };
}

inline Response handle_meta(const Checkpoint& ckpt) { return {200, "application/json", meta_json(ckpt).dump()}; }

class RenderServer {
public:
    explicit RenderServer(Checkpoint ckpt) : ckpt_(std::move(ckpt)) {
        server_.set_default_headers({{"Access-Control-Allow-Origin", "*"}});
        server_.Get("/render", [this](const httplib::Request& req, httplib::Response& res) {
            auto param = [&](const char* k) -> std::optional<std::string> {
                if (!req.has_param(k)) return std::nullopt;
                return req.get_param_value(k);
            };
            apply(handle_render(ckpt_, param("tr"), param("bg"), param("aspect")), res);
        });
        server_.Get("/meta", [this](const httplib::Request&, httplib::Response& res) { apply(handle_meta(ckpt_), res); });
        server_.Options(R"(/.*)", [](const httplib::Request&, httplib::Response& res) {
            res.set_header("Access-Control-Allow-Methods", "GET, OPTIONS");
            res.set_header("Access-Control-Allow-Headers", "*");
            res.status = 204;
        });
    }

    // Binds to an ephemeral port when port == 0; returns the bound port or -1.
    int bind(const std::string& host, int port) {
        if (port == 0) return server_.bind_to_any_port(host);
        return server_.bind_to_port(host, port) ? port : -1;
    }
    bool listen_after_bind() { return server_.listen_after_bind(); }
    void stop() { server_.stop(); }
    bool running() const { return server_.is_running(); }
    void wait_until_ready() const { server_.wait_until_ready(); }

private:
    static void apply(const Response& r, httplib::Response& res) {
        res.status = r.status;
        res.set_content(r.body, r.content_type);
    }

    Checkpoint ckpt_;
    httplib::Server server_;
};

}  // namespace vecforge
