#pragma once

// Implicit shape network: a shape index (optionally with background color and
// aspect ratio) is lifted with random Fourier features and fed to two parallel
// MLP branches. The position branch emits 12 control points, the color branch
// an RGB triple squashed by a sigmoid.
//
// Each branch is  linear -> layernorm -> leaky relu -> linear -> layernorm ->
// leaky relu -> linear.

#include <cmath>
#include <cstddef>
#include <algorithm>
#include <concepts>
#include <type_traits>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "vecforge/core.hpp"
#include "vecforge/rng.hpp"

namespace vecforge {

struct NetworkConfig {
    int n_shapes = 16;
    int hidden = 128;
    int frequencies = 64;
    double leaky_slope = 0.01;
    double fourier_sigma = 1.0;
    bool condition_background = false;
    bool condition_aspect = false;

    int input_dim() const {
        return 2 * frequencies * (1 + (condition_background ? 1 : 0) + (condition_aspect ? 1 : 0));
    }
    bool operator==(const NetworkConfig&) const = default;
};

inline constexpr double kLayerNormEps = 1e-5;
inline constexpr int kPositionOutputs = static_cast<int>(2 * kPointsPerShape);
inline constexpr int kColorOutputs = 3;

// gamma(x) = [cos(2 pi B x), sin(2 pi B x)] with B frozen after construction.
struct FourierEncoder {
    int input_dim = 1;
    int frequencies = 64;
    double sigma = 1.0;
    std::vector<double> B;  // frequencies x input_dim, row-major

    int output_dim() const { return 2 * frequencies; }

    static FourierEncoder sample(int input_dim, int frequencies, double sigma, Rng& rng) {
        FourierEncoder enc{input_dim, frequencies, sigma, {}};
        enc.B.resize(static_cast<std::size_t>(input_dim) * frequencies);
        for (auto& b : enc.B) b = rng.normal(0.0, sigma);
        return enc;
    }

    // Writes 2F values into out.
    void encode_into(std::span<const double> x, std::span<double> out) const {
        if (static_cast<int>(x.size()) != input_dim) throw DimensionError("fourier_encode: input dimension mismatch");
        for (int f = 0; f < frequencies; ++f) {
            double phase = 0.0;
            for (int d = 0; d < input_dim; ++d) phase += B[static_cast<std::size_t>(f) * input_dim + d] * x[d];
            phase *= 2.0 * std::numbers::pi;
            out[f] = std::cos(phase);
            out[frequencies + f] = std::sin(phase);
        }
    }

    std::vector<double> encode(std::span<const double> x) const {
        std::vector<double> out(static_cast<std::size_t>(output_dim()));
        encode_into(x, out);
        return out;
    }

    bool operator==(const FourierEncoder&) const = default;
};

struct EncoderSet {
    FourierEncoder index;
    std::optional<FourierEncoder> background;
    std::optional<FourierEncoder> aspect;

    bool operator==(const EncoderSet&) const = default;
};

struct Linear {
    int in = 0;
    int out = 0;
    std::vector<double> weight;  // out x in, row-major
    std::vector<double> bias;

    Linear() = default;
    Linear(int in_dim, int out_dim)
        : in(in_dim), out(out_dim), weight(static_cast<std::size_t>(in_dim) * out_dim, 0.0), bias(out_dim, 0.0) {}

    void apply(std::span<const double> x, std::span<double> y) const {
        for (int o = 0; o < out; ++o) {
            const double* w = &weight[static_cast<std::size_t>(o) * in];
            double acc = bias[o];
            for (int i = 0; i < in; ++i) acc += w[i] * x[i];
            y[o] = acc;
        }
    }

    bool operator==(const Linear&) const = default;
};

struct LayerNorm {
    std::vector<double> gain;
    std::vector<double> shift;

    LayerNorm() = default;
    explicit LayerNorm(int dim) : gain(dim, 1.0), shift(dim, 0.0) {}

    bool operator==(const LayerNorm&) const = default;
};

struct Branch {
    Linear fc1;
    LayerNorm norm1;
    Linear fc2;
    LayerNorm norm2;
    Linear head;

    Branch() = default;
    Branch(int in_dim, int hidden, int out_dim)
        : fc1(in_dim, hidden), norm1(hidden), fc2(hidden, hidden), norm2(hidden), head(hidden, out_dim) {}

    bool operator==(const Branch&) const = default;
};

struct NetworkParams {
    Branch position;
    Branch color;
    double leaky_slope = 0.01;

    bool operator==(const NetworkParams&) const = default;
};

// Visits every trainable tensor in a fixed order. The order defines the layout
// of the flattened parameter vector.
template <typename Params, typename F>
    requires std::same_as<std::remove_const_t<Params>, NetworkParams>
void for_each_tensor(Params& p, F&& f) {
    for (auto* b : {&p.position, &p.color}) {
        f(b->fc1.weight);
        f(b->fc1.bias);
        f(b->norm1.gain);
        f(b->norm1.shift);
        f(b->fc2.weight);
        f(b->fc2.bias);
        f(b->norm2.gain);
        f(b->norm2.shift);
        f(b->head.weight);
        f(b->head.bias);
    }
}

// Two-argument form for elementwise updates such as p -= lr * g.
template <typename F>
void for_each_tensor_pair(NetworkParams& p, const NetworkParams& q, F&& f) {
    std::vector<std::vector<double>*> lhs;
    std::vector<const std::vector<double>*> rhs;
    for_each_tensor(p, [&](std::vector<double>& t) { lhs.push_back(&t); });
    for_each_tensor(q, [&](const std::vector<double>& t) { rhs.push_back(&t); });
    if (lhs.size() != rhs.size()) throw DimensionError("parameter layouts differ");
    for (std::size_t i = 0; i < lhs.size(); ++i) {
        if (lhs[i]->size() != rhs[i]->size()) throw DimensionError("parameter layouts differ");
        f(*lhs[i], *rhs[i]);
    }
}

inline std::size_t parameter_count(const NetworkParams& p) {
    std::size_t n = 0;
    for_each_tensor(p, [&](const std::vector<double>& t) { n += t.size(); });
    return n;
}

// Same shapes as p, all zeros.
inline NetworkParams zeros_like(const NetworkParams& p) {
    NetworkParams z = p;
    for_each_tensor(z, [](std::vector<double>& t) { std::fill(t.begin(), t.end(), 0.0); });
    return z;
}

inline double squared_norm(const NetworkParams& p) {
    double s = 0.0;
    for_each_tensor(p, [&](const std::vector<double>& t) {
        for (double v : t) s += v * v;
    });
    return s;
}

struct ConditioningInput {
    std::optional<Rgb> background_rgb;
    std::optional<double> aspect_log_ratio;
};

struct NetworkOutput {
    std::vector<ControlPoints> points;
    std::vector<Rgb> colors;
};

// Full model: the frozen encoders plus the trainable parameters.
struct Network {
    NetworkConfig config;
    EncoderSet encoders;
    NetworkParams params;

    bool operator==(const Network&) const = default;
};

inline Network init_network(const NetworkConfig& config, Rng& rng) {
    if (config.n_shapes < 1 || config.hidden < 1 || config.frequencies < 1)
        throw RangeError("network config: sizes must be positive");
    Network net;
    net.config = config;
    net.encoders.index = FourierEncoder::sample(1, config.frequencies, config.fourier_sigma, rng);
    if (config.condition_background)
        net.encoders.background = FourierEncoder::sample(3, config.frequencies, config.fourier_sigma, rng);
    if (config.condition_aspect)
        net.encoders.aspect = FourierEncoder::sample(1, config.frequencies, config.fourier_sigma, rng);

    const int in = config.input_dim();
    net.params.position = Branch(in, config.hidden, kPositionOutputs);
    net.params.color = Branch(in, config.hidden, kColorOutputs);
    net.params.leaky_slope = config.leaky_slope;
    for (auto* branch : {&net.params.position, &net.params.color}) {
        for (auto* layer : {&branch->fc1, &branch->fc2, &branch->head}) {
            const double bound = 1.0 / std::sqrt(static_cast<double>(layer->in));
            for (auto& w : layer->weight) w = rng.uniform(-bound, bound);
        }
    }
    return net;
}

namespace detail {

struct LayerCache {
    std::vector<double> pre;     // linear output
    std::vector<double> normed;  // (pre - mean) / sd
    double inv_sd = 0.0;
    std::vector<double> post;    // leaky relu(gain * normed + shift)
};

struct BranchCache {
    LayerCache l1, l2;
    std::vector<double> out;
};

inline void layer_forward(const Linear& fc, const LayerNorm& ln, double slope, std::span<const double> x,
                          LayerCache& c) {
    const auto h = static_cast<std::size_t>(fc.out);
    c.pre.resize(h);
    c.normed.resize(h);
    c.post.resize(h);
    fc.apply(x, c.pre);
    double mean = 0.0;
    for (double v : c.pre) mean += v;
    mean /= static_cast<double>(h);
    double var = 0.0;
    for (double v : c.pre) var += (v - mean) * (v - mean);
    var /= static_cast<double>(h);
    c.inv_sd = 1.0 / std::sqrt(var + kLayerNormEps);
    for (std::size_t j = 0; j < h; ++j) {
        c.normed[j] = (c.pre[j] - mean) * c.inv_sd;
        const double y = ln.gain[j] * c.normed[j] + ln.shift[j];
        c.post[j] = y > 0.0 ? y : slope * y;
    }
}

inline void branch_forward(const Branch& b, double slope, std::span<const double> x, BranchCache& c) {
    layer_forward(b.fc1, b.norm1, slope, x, c.l1);
    layer_forward(b.fc2, b.norm2, slope, c.l1.post, c.l2);
    c.out.resize(static_cast<std::size_t>(b.head.out));
    b.head.apply(c.l2.post, c.out);
}

inline void linear_backward(const Linear& fc, std::span<const double> x, std::span<const double> dy, Linear& g,
                            std::span<double> dx) {
    for (int o = 0; o < fc.out; ++o) {
        const double d = dy[o];
        g.bias[o] += d;
        if (d == 0.0) continue;
        double* gw = &g.weight[static_cast<std::size_t>(o) * fc.in];
        for (int i = 0; i < fc.in; ++i) gw[i] += d * x[i];
    }
    if (dx.empty()) return;
    std::fill(dx.begin(), dx.end(), 0.0);
    for (int o = 0; o < fc.out; ++o) {
        const double d = dy[o];
        if (d == 0.0) continue;
        const double* w = &fc.weight[static_cast<std::size_t>(o) * fc.in];
        for (int i = 0; i < fc.in; ++i) dx[i] += d * w[i];
    }
}

// dpost -> gradient w.r.t. the layer input x (written to dx, may be empty).
inline void layer_backward(const Linear& fc, const LayerNorm& ln, double slope, std::span<const double> x,
                           const LayerCache& c, std::span<const double> dpost, Linear& gfc, LayerNorm& gln,
                           std::span<double> dx) {
    const std::size_t h = c.pre.size();
    std::vector<double> dnormed(h);
    double mean_d = 0.0, mean_dx = 0.0;
    for (std::size_t j = 0; j < h; ++j) {
        const double y = ln.gain[j] * c.normed[j] + ln.shift[j];
        const double dy = dpost[j] * (y > 0.0 ? 1.0 : slope);
        gln.gain[j] += dy * c.normed[j];
        gln.shift[j] += dy;
        dnormed[j] = dy * ln.gain[j];
        mean_d += dnormed[j];
        mean_dx += dnormed[j] * c.normed[j];
    }
    mean_d /= static_cast<double>(h);
    mean_dx /= static_cast<double>(h);
    std::vector<double> dpre(h);
    for (std::size_t j = 0; j < h; ++j) dpre[j] = c.inv_sd * (dnormed[j] - mean_d - c.normed[j] * mean_dx);
    linear_backward(fc, x, dpre, gfc, dx);
}

inline void branch_backward(const Branch& b, double slope, std::span<const double> x, const BranchCache& c,
                            std::span<const double> dout, Branch& g) {
    std::vector<double> d2(c.l2.post.size());
    linear_backward(b.head, c.l2.post, dout, g.head, d2);
    std::vector<double> d1(c.l1.post.size());
    layer_backward(b.fc2, b.norm2, slope, c.l1.post, c.l2, d2, g.fc2, g.norm2, d1);
    layer_backward(b.fc1, b.norm1, slope, x, c.l1, d1, g.fc1, g.norm1, {});
}

inline double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

}  // namespace detail

// Index i in 1..n maps to (i-1)/(n-1); a single shape maps to 0.
inline double normalize_index(int i, int n) { return n > 1 ? static_cast<double>(i - 1) / (n - 1) : 0.0; }

inline std::vector<double> network_input(const NetworkConfig& config, const EncoderSet& enc,
                                         const ConditioningInput& cond, int index) {
    if (index < 1 || index > config.n_shapes) throw RangeError("network: shape index out of range");
    std::vector<double> v(static_cast<std::size_t>(config.input_dim()));
    std::size_t offset = 0;
    const double x = normalize_index(index, config.n_shapes);
    enc.index.encode_into(std::span<const double>(&x, 1), std::span<double>(v).subspan(offset, enc.index.output_dim()));
    offset += enc.index.output_dim();
    if (config.condition_background) {
        if (!cond.background_rgb || !enc.background) throw DimensionError("network: background conditioning missing");
        const double rgb[3] = {cond.background_rgb->r, cond.background_rgb->g, cond.background_rgb->b};
        enc.background->encode_into(rgb, std::span<double>(v).subspan(offset, enc.background->output_dim()));
        offset += enc.background->output_dim();
    }
    if (config.condition_aspect) {
        if (!cond.aspect_log_ratio || !enc.aspect) throw DimensionError("network: aspect conditioning missing");
        const double a = *cond.aspect_log_ratio;
        enc.aspect->encode_into(std::span<const double>(&a, 1), std::span<double>(v).subspan(offset, enc.aspect->output_dim()));
    }
    return v;
}

inline NetworkOutput forward(const Network& net, const ConditioningInput& cond, std::span<const int> indices) {
    NetworkOutput out;
    out.points.resize(indices.size());
    out.colors.resize(indices.size());
    detail::BranchCache pc, cc;
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto v = network_input(net.config, net.encoders, cond, indices[k]);
        detail::branch_forward(net.params.position, net.params.leaky_slope, v, pc);
        detail::branch_forward(net.params.color, net.params.leaky_slope, v, cc);
        for (std::size_t j = 0; j < kPointsPerShape; ++j) out.points[k][j] = {pc.out[2 * j], pc.out[2 * j + 1]};
        out.colors[k] = {detail::sigmoid(cc.out[0]), detail::sigmoid(cc.out[1]), detail::sigmoid(cc.out[2])};
    }
    return out;
}

// Indices 1..count.
inline std::vector<int> index_range(int count) {
    std::vector<int> idx(static_cast<std::size_t>(std::max(count, 0)));
    for (int i = 0; i < count; ++i) idx[static_cast<std::size_t>(i)] = i + 1;
    return idx;
}

// Reverse-mode gradient of <forward(indices), (grad_points, grad_colors)> with
// respect to every trainable parameter.
inline NetworkParams backward(const Network& net, const ConditioningInput& cond, std::span<const int> indices,
                              std::span<const ControlPoints> grad_points, std::span<const Rgb> grad_colors) {
    if (grad_points.size() != indices.size() || grad_colors.size() != indices.size())
        throw DimensionError("network backward: gradient count does not match indices");
    NetworkParams g = zeros_like(net.params);
    detail::BranchCache pc, cc;
    std::vector<double> dpos(kPositionOutputs), dcol(kColorOutputs);
    for (std::size_t k = 0; k < indices.size(); ++k) {
        const auto v = network_input(net.config, net.encoders, cond, indices[k]);
        detail::branch_forward(net.params.position, net.params.leaky_slope, v, pc);
        detail::branch_forward(net.params.color, net.params.leaky_slope, v, cc);
        for (std::size_t j = 0; j < kPointsPerShape; ++j) {
            dpos[2 * j] = grad_points[k][j].x;
            dpos[2 * j + 1] = grad_points[k][j].y;
        }
        for (int c = 0; c < kColorOutputs; ++c) {
            const double s = detail::sigmoid(cc.out[static_cast<std::size_t>(c)]);
            dcol[static_cast<std::size_t>(c)] = grad_colors[k][static_cast<std::size_t>(c)] * s * (1.0 - s);
        }
        detail::branch_backward(net.params.position, net.params.leaky_slope, v, pc, dpos, g.position);
        detail::branch_backward(net.params.color, net.params.leaky_slope, v, cc, dcol, g.color);
    }
    return g;
}

inline std::vector<Shape> to_shapes(const NetworkOutput& out, ShapeKind kind, double stroke_width) {
    std::vector<Shape> shapes(out.points.size());
    for (std::size_t k = 0; k < shapes.size(); ++k) {
        shapes[k].control_points = out.points[k];
        shapes[k].color = out.colors[k];
        shapes[k].kind = kind;
        shapes[k].stroke_width = stroke_width;
    }
    return shapes;
}

}  // namespace vecforge
