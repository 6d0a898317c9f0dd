#pragma once

// Pretraining toward initialization targets and the main guided loop with
// nested-dropout truncation, warmup + cosine schedule, and global-norm
// gradient clipping.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdint>
#include <functional>
#include <numbers>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "vecforge/core.hpp"
#include "vecforge/guidance.hpp"
#include "vecforge/init.hpp"
#include "vecforge/network.hpp"
#include "vecforge/raster.hpp"
#include "vecforge/rng.hpp"

namespace vecforge {

struct AspectRatio {
    int width = 1;
    int height = 1;

    double log_ratio() const { return std::log(static_cast<double>(width) / height); }
    std::string to_string() const { return std::to_string(width) + ":" + std::to_string(height); }
    bool operator==(const AspectRatio&) const = default;
};

struct TrainConfig {
    int n_shapes = 16;
    int pretrain_steps = 300;
    double pretrain_lr = 0.01;
    int main_steps = 4000;
    double lr_peak = 0.018;
    double lr_final = 0.012;
    int warmup_steps = 400;
    double clip_norm = 0.1;
    bool dropout = true;
    double keep_all_prob = 0.7;
    double trunc_temperature = 3.0;

    std::vector<NamedColor> bg_palette = {{"white", {1.0, 1.0, 1.0}}};
    bool bg_random = false;
    std::vector<NamedColor> color_names = css_basic_palette();  // for naming random backgrounds
    std::vector<AspectRatio> aspect_choices = {{1, 1}};

    bool sketch_mode = false;
    double stroke_width = 0.01;

    int canvas_px = 128;  // longer canvas side during training
    double aa_width_px = 1.0;
    int flatten_segments = 16;

    int hidden = 128;
    int frequencies = 64;
    double leaky_slope = 0.01;
    double fourier_sigma = 1.0;
    bool condition_background = false;
    bool condition_aspect = false;

    int checkpoint_every = 0;  // 0 disables periodic checkpoints
    std::uint64_t seed = 0;

    void validate() const {
        if (n_shapes < 1) throw RangeError("config: n_shapes must be >= 1");
        if (pretrain_steps < 0 || main_steps < 1) throw RangeError("config: step counts out of range");
        if (!(lr_final > 0.0 && lr_final <= lr_peak)) throw RangeError("config: need 0 < lr_final <= lr_peak");
        if (!(keep_all_prob >= 0.0 && keep_all_prob <= 1.0)) throw RangeError("config: keep_all_prob must be in [0,1]");
        if (!(trunc_temperature > 0.0)) throw RangeError("config: trunc_temperature must be positive");
        if (warmup_steps < 0 || warmup_steps >= main_steps) throw RangeError("config: need 0 <= warmup_steps < main_steps");
        if (!(clip_norm > 0.0)) throw RangeError("config: clip_norm must be positive");
        if (!bg_random && bg_palette.empty()) throw RangeError("config: empty background palette");
        if (aspect_choices.empty()) throw RangeError("config: aspect_choices is empty");
        for (const auto& a : aspect_choices)
            if (a.width < 1 || a.height < 1) throw RangeError("config: aspect ratio terms must be positive");
        if (sketch_mode && !(stroke_width > 0.0)) throw RangeError("config: stroke_width must be positive");
        if (canvas_px < 1) throw RangeError("config: canvas_px must be >= 1");
    }

    bool operator==(const TrainConfig&) const = default;

    NetworkConfig network_config() const {
        return {n_shapes, hidden, frequencies, leaky_slope, fourier_sigma, condition_background, condition_aspect};
    }

    ShapeKind shape_kind() const { return sketch_mode ? ShapeKind::OpenStroke : ShapeKind::ClosedFill; }

    // The longer side is canvas_px.
    Canvas canvas_for(AspectRatio a) const {
        Canvas c;
        c.aa_width_px = aa_width_px;
        c.flatten_segments = flatten_segments;
        if (a.width >= a.height) {
            c.width_px = canvas_px;
            c.height_px = std::max(1, static_cast<int>(std::lround(static_cast<double>(canvas_px) * a.height / a.width)));
        } else {
            c.height_px = canvas_px;
            c.width_px = std::max(1, static_cast<int>(std::lround(static_cast<double>(canvas_px) * a.width / a.height)));
        }
        return c;
    }
};

// ---------------------------------------------------------------------------
// Schedules and samplers

// Linear warmup from 0 to lr_peak, then cosine decay to lr_final at main_steps.
inline double lr_at(int step, const TrainConfig& cfg) {
    if (step <= cfg.warmup_steps) {
        return cfg.warmup_steps == 0 ? cfg.lr_peak : cfg.lr_peak * step / cfg.warmup_steps;
    }
    const double progress = static_cast<double>(step - cfg.warmup_steps) / (cfg.main_steps - cfg.warmup_steps);
    return cfg.lr_final + (cfg.lr_peak - cfg.lr_final) * (1.0 + std::cos(std::numbers::pi * progress)) / 2.0;
}

// Deterministic part of the truncation sampler, given its two draws.
// u ~ U(0,1) picks the keep-all branch; otherwise e ~ Exp(rate) is capped at 1
// and scaled to a shape count.
inline int truncation_from_draws(double u, double e, int n, double keep_all_prob) {
    if (u < keep_all_prob) return n;
    const double x = std::min(e, 1.0);
    return std::clamp(static_cast<int>(std::ceil(x * n)), 1, n);
}

inline int sample_truncation(Rng& rng, int n, double keep_all_prob, double rate) {
    if (n < 1) throw RangeError("sample_truncation: n must be >= 1");
    const double u = rng.uniform();
    if (u < keep_all_prob) return n;
    return truncation_from_draws(u, rng.exponential(rate), n, keep_all_prob);
}

inline int sample_truncation(Rng& rng, const TrainConfig& cfg) {
    return sample_truncation(rng, cfg.n_shapes, cfg.keep_all_prob, cfg.trunc_temperature);
}

inline NamedColor sample_background(Rng& rng, const TrainConfig& cfg) {
    if (cfg.bg_random) {
        Rgb c;
        c.r = rng.uniform();
        c.g = rng.uniform();
        c.b = rng.uniform();
        return {nearest_color(cfg.color_names, c).name, c};
    }
    if (cfg.bg_palette.empty()) throw RangeError("sample_background: empty palette");
    return cfg.bg_palette[rng.below(cfg.bg_palette.size())];
}

inline AspectRatio sample_aspect(Rng& rng, const TrainConfig& cfg) {
    if (cfg.aspect_choices.size() == 1) return cfg.aspect_choices.front();
    return cfg.aspect_choices[rng.below(cfg.aspect_choices.size())];
}

inline double global_norm(const NetworkParams& g) { return std::sqrt(squared_norm(g)); }

// g <- g * min(1, max_norm / ||g||) over all parameters at once.
inline void clip_gradients(NetworkParams& g, double max_norm) {
    const double n = global_norm(g);
    if (!(n > max_norm)) return;
    const double scale = max_norm / n;
    for_each_tensor(g, [&](std::vector<double>& t) {
        for (double& v : t) v *= scale;
    });
}

inline ConditioningInput conditioning_for(const NetworkConfig& cfg, Rgb background, AspectRatio aspect) {
    ConditioningInput c;
    if (cfg.condition_background) c.background_rgb = background;
    if (cfg.condition_aspect) c.aspect_log_ratio = aspect.log_ratio();
    return c;
}

// Plain gradient descent: p <- p - lr * g.
inline void descend(NetworkParams& params, const NetworkParams& grad, double lr) {
    for_each_tensor_pair(params, grad, [&](std::vector<double>& p, const std::vector<double>& g) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= lr * g[i];
    });
}

inline bool all_finite(const NetworkParams& p) {
    bool ok = true;
    for_each_tensor(p, [&](const std::vector<double>& t) {
        for (double v : t) ok = ok && std::isfinite(v);
    });
    return ok;
}

// Fresh network for a config; weights depend only on cfg.seed.
inline Network make_network(const TrainConfig& cfg) {
    Rng rng(cfg.seed ^ 0x6a09e667f3bcc909ULL);
    return init_network(cfg.network_config(), rng);
}

// ---------------------------------------------------------------------------
// Pretraining

// Mean over shapes of ||p - p_init||^2 + ||c - c_init||^2.
inline double init_loss(const NetworkOutput& out, const InitTargets& targets) {
    double total = 0.0;
    for (std::size_t k = 0; k < targets.size(); ++k) {
        for (std::size_t j = 0; j < kPointsPerShape; ++j) {
            const Point2 d = out.points[k][j] - targets[k].points[j];
            total += dot(d, d);
        }
        for (std::size_t c = 0; c < 3; ++c) {
            const double d = out.colors[k][c] - targets[k].color[c];
            total += d * d;
        }
    }
    return targets.empty() ? 0.0 : total / static_cast<double>(targets.size());
}

struct PretrainResult {
    double initial_loss = 0.0;
    double final_loss = 0.0;
};

inline double init_loss(const Network& net, const InitTargets& targets, const ConditioningInput& cond) {
    const auto idx = index_range(static_cast<int>(targets.size()));
    return init_loss(forward(net, cond, idx), targets);
}

// Constant learning rate, no truncation, no clipping.
inline PretrainResult pretrain(Network& net, const InitTargets& targets, const TrainConfig& cfg) {
    if (static_cast<int>(targets.size()) != net.config.n_shapes)
        throw DimensionError("pretrain: target count does not match n_shapes");
    Rng rng(cfg.seed ^ 0x9e3779b97f4a7c15ULL);
    const auto idx = index_range(net.config.n_shapes);
    const double inv_n = 1.0 / static_cast<double>(targets.size());
    PretrainResult result;
    std::vector<ControlPoints> gp(targets.size());
    std::vector<Rgb> gc(targets.size());
    for (int step = 0; step <= cfg.pretrain_steps; ++step) {
        const auto bg = sample_background(rng, cfg);
        const auto aspect = sample_aspect(rng, cfg);
        const auto cond = conditioning_for(net.config, bg.rgb, aspect);
        const auto out = forward(net, cond, idx);
        const double loss = init_loss(out, targets);
        if (step == 0) result.initial_loss = loss;
        result.final_loss = loss;
        if (step == cfg.pretrain_steps) break;
        for (std::size_t k = 0; k < targets.size(); ++k) {
            for (std::size_t j = 0; j < kPointsPerShape; ++j)
                gp[k][j] = (out.points[k][j] - targets[k].points[j]) * (2.0 * inv_n);
            for (std::size_t c = 0; c < 3; ++c) gc[k][c] = 2.0 * inv_n * (out.colors[k][c] - targets[k].color[c]);
        }
        const auto grads = backward(net, cond, idx, gp, gc);
        descend(net.params, grads, cfg.pretrain_lr);
        if (!all_finite(net.params)) throw Error("pretrain: parameters became non-finite at step " + std::to_string(step));
    }
    return result;
}

// ---------------------------------------------------------------------------
// Main loop

struct StepRecord {
    int step = 0;
    double lr = 0.0;
    int tr = 0;
    std::string bg_name;
    double grad_norm_pre = 0.0;
    double grad_norm_post = 0.0;
    std::optional<double> loss;

    bool operator==(const StepRecord&) const = default;
};

using TrainHistory = std::vector<StepRecord>;

inline void write_history_csv(std::ostream& os, const TrainHistory& history) {
    os << "step,lr,tr,bg_name,grad_norm_pre,grad_norm_post,loss\n";
    char buf[64];
    auto num = [&](double v) {
        std::snprintf(buf, sizeof buf, "%.17g", v);
        return std::string(buf);
    };
    for (const auto& r : history) {
        os << r.step << ',' << num(r.lr) << ',' << r.tr << ',' << r.bg_name << ',' << num(r.grad_norm_pre) << ','
           << num(r.grad_norm_post) << ',';
        if (r.loss) os << num(*r.loss);
        os << '\n';
    }
}

struct GuidanceFailure : Error {
    GuidanceFailure(int step, const std::string& what)
        : Error("guidance failed at step " + std::to_string(step) + ": " + what), step(step) {}
    int step;
};

// Renders the first tr shapes of the network's scene.
inline Scene network_scene(const Network& net, const ConditioningInput& cond, int tr, Rgb background,
                           ShapeKind kind, double stroke_width) {
    Scene scene;
    scene.background = background;
    const auto idx = index_range(tr);
    scene.shapes = to_shapes(forward(net, cond, idx), kind, stroke_width);
    return scene;
}

using StepCallback = std::function<void(int step, const Network&)>;

inline TrainHistory train(Network& net, Guidance& guidance, const TrainConfig& cfg, const std::string& prompt_object,
                          const StepCallback& on_step = {}) {
    cfg.validate();
    Rng rng(cfg.seed);
    TrainHistory history;
    history.reserve(static_cast<std::size_t>(cfg.main_steps));
    const int n = net.config.n_shapes;
    for (int step = 0; step < cfg.main_steps; ++step) {
        const auto bg = sample_background(rng, cfg);
        const auto aspect = sample_aspect(rng, cfg);
        const int tr = cfg.dropout ? sample_truncation(rng, n, cfg.keep_all_prob, cfg.trunc_temperature) : n;
        const auto cond = conditioning_for(net.config, bg.rgb, aspect);
        const Canvas canvas = cfg.canvas_for(aspect);
        const auto idx = index_range(tr);

        const auto out = forward(net, cond, idx);
        Scene scene;
        scene.background = bg.rgb;
        scene.shapes = to_shapes(out, cfg.shape_kind(), cfg.stroke_width);
        const RenderTape tape(scene, canvas, scene.shapes.size());

        GuidanceContext ctx;
        ctx.prompt = format_prompt(prompt_object, bg.name);
        ctx.step = step;
        ctx.total_steps = cfg.main_steps;
        ctx.rng_seed = cfg.seed * 1000003ULL + static_cast<std::uint64_t>(step);
        GradientImage grad_img;
        try {
            grad_img = guidance.gradient(tape.image(), ctx);
        } catch (const std::exception& e) {
            throw GuidanceFailure(step, e.what());
        }

        StepRecord rec;
        rec.step = step;
        rec.tr = tr;
        rec.bg_name = bg.name;
        rec.loss = guidance.loss(tape.image());
        rec.lr = lr_at(step, cfg);

        const auto sg = tape.backward(grad_img);
        std::vector<ControlPoints> gp(sg.shapes.size());
        std::vector<Rgb> gc(sg.shapes.size());
        for (std::size_t k = 0; k < sg.shapes.size(); ++k) {
            gp[k] = sg.shapes[k].points;
            gc[k] = sg.shapes[k].color;
        }
        auto grads = backward(net, cond, idx, gp, gc);
        rec.grad_norm_pre = global_norm(grads);
        clip_gradients(grads, cfg.clip_norm);
        rec.grad_norm_post = global_norm(grads);
        descend(net.params, grads, rec.lr);
        if (!all_finite(net.params)) throw Error("train: parameters became non-finite at step " + std::to_string(step));
        history.push_back(std::move(rec));
        if (on_step) on_step(step, net);
    }
    return history;
}

}  // namespace vecforge
