#pragma once

// Soft differentiable rasterizer.
//
// Each shape contributes a per-pixel opacity alpha = logistic(-sd / aa_width),
// where sd is the signed distance in pixels to the flattened outline (negative
// inside by the nonzero rule). Shapes are composited bottom to top with the
// over operator onto an opaque background. The backward pass treats the
// inside flag and the nearest edge as locally constant.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "vecforge/core.hpp"

namespace vecforge {

struct RasterImage {
    int width_px = 0;
    int height_px = 0;
    std::vector<double> pixels;  // row-major RGB

    RasterImage() = default;
    RasterImage(int w, int h, double fill = 0.0)
        : width_px(w), height_px(h), pixels(static_cast<std::size_t>(w) * h * 3, fill) {}
    RasterImage(int w, int h, Rgb fill) : RasterImage(w, h) {
        for (std::size_t i = 0; i < pixels.size(); i += 3) {
            pixels[i] = fill.r;
            pixels[i + 1] = fill.g;
            pixels[i + 2] = fill.b;
        }
    }

    std::size_t index(int row, int col) const { return (static_cast<std::size_t>(row) * width_px + col) * 3; }
    Rgb at(int row, int col) const {
        const auto i = index(row, col);
        return {pixels[i], pixels[i + 1], pixels[i + 2]};
    }
    bool same_shape(const RasterImage& o) const { return width_px == o.width_px && height_px == o.height_px; }
    bool operator==(const RasterImage&) const = default;
};

struct ShapeGrads {
    std::array<Point2, kPointsPerShape> points{};
    Rgb color{};
};

struct SceneGrads {
    std::vector<ShapeGrads> shapes;
};

namespace detail {

// Beyond this many anti-alias widths the logistic is below 1e-13 and the
// pixel is skipped.
inline constexpr double kCoverageCutoff = 30.0;

inline double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// One shape flattened into pixel space.
struct PixelShape {
    std::vector<Point2> vertices;
    std::vector<Point2> edge_dir;
    std::vector<double> edge_inv_len2;
    std::size_t edges = 0;
    bool closed = true;
    double half_width_px = 0.0;
    double xmin = INFINITY, xmax = -INFINITY, ymin = INFINITY, ymax = -INFINITY;
    int col0 = 0, col1 = -1, row0 = 0, row1 = -1;  // inclusive pixel window

    PixelShape(const Shape& shape, const Canvas& canvas) {
        auto poly = flatten_shape(shape, canvas.flatten_segments);
        closed = poly.closed;
        vertices.reserve(poly.vertices.size());
        for (auto p : poly.vertices) {
            const Point2 q{p.x * canvas.width_px, p.y * canvas.height_px};
            vertices.push_back(q);
            xmin = std::min(xmin, q.x);
            xmax = std::max(xmax, q.x);
            ymin = std::min(ymin, q.y);
            ymax = std::max(ymax, q.y);
        }
        edges = poly.edge_count();
        edge_dir.resize(edges);
        edge_inv_len2.resize(edges);
        for (std::size_t e = 0; e < edges; ++e) {
            const Point2 d = vertices[(e + 1) % vertices.size()] - vertices[e];
            const double l2 = dot(d, d);
            edge_dir[e] = d;
            edge_inv_len2[e] = l2 > 0.0 ? 1.0 / l2 : 0.0;
        }
        if (!closed) half_width_px = 0.5 * shape.stroke_width * canvas.stroke_scale_px();
        const double margin = kCoverageCutoff * canvas.aa_width_px + half_width_px;
        // Pixel centers sit at c + 0.5.
        col0 = std::max(0, static_cast<int>(std::ceil(xmin - margin - 0.5)));
        col1 = std::min(canvas.width_px - 1, static_cast<int>(std::floor(xmax + margin - 0.5)));
        row0 = std::max(0, static_cast<int>(std::ceil(ymin - margin - 0.5)));
        row1 = std::min(canvas.height_px - 1, static_cast<int>(std::floor(ymax + margin - 0.5)));
        if (!std::isfinite(xmin) || !std::isfinite(ymin) || !std::isfinite(xmax) || !std::isfinite(ymax)) {
            col1 = -1;
            row1 = -1;
        }
    }

    bool window_empty() const { return col1 < col0 || row1 < row0; }
    int window_width() const { return col1 - col0 + 1; }
    std::size_t window_size() const {
        return window_empty() ? 0 : static_cast<std::size_t>(window_width()) * (row1 - row0 + 1);
    }
};

// Coverage sample of one shape at one pixel center.
struct Sample {
    double alpha = 0.0;
    double sd = 0.0;      // signed distance in pixels
    double sign = 1.0;    // d(sd)/d(distance)
    std::uint32_t edge = 0;
    double t = 0.0;
    Point2 dir{};         // unit vector from nearest point to pixel center
};

inline Sample sample(const PixelShape& s, Point2 p, double beta) {
    double best = INFINITY;
    std::uint32_t best_edge = 0;
    double best_t = 0.0;
    int winding = 0;
    const std::size_t nv = s.vertices.size();
    for (std::size_t e = 0; e < s.edges; ++e) {
        const Point2 a = s.vertices[e];
        const Point2 ab = s.edge_dir[e];
        const Point2 ap = p - a;
        double t = dot(ap, ab) * s.edge_inv_len2[e];
        t = t < 0.0 ? 0.0 : (t > 1.0 ? 1.0 : t);
        const double dx = ap.x - ab.x * t;
        const double dy = ap.y - ab.y * t;
        const double d2 = dx * dx + dy * dy;
        if (d2 < best) {
            best = d2;
            best_edge = static_cast<std::uint32_t>(e);
            best_t = t;
        }
        if (s.closed) winding += winding_contribution(a, s.vertices[(e + 1) % nv], p);
    }
    Sample out;
    const double d = std::sqrt(best);
    out.edge = best_edge;
    out.t = best_t;
    if (d > 0.0) {
        const Point2 a = s.vertices[best_edge];
        const Point2 q = a + s.edge_dir[best_edge] * best_t;
        out.dir = (p - q) * (1.0 / d);
    }
    if (s.closed) {
        out.sign = winding != 0 ? -1.0 : 1.0;
        out.sd = out.sign * d;
    } else {
        out.sign = 1.0;
        out.sd = d - s.half_width_px;
    }
    out.alpha = logistic(-out.sd / beta);
    return out;
}

inline Point2 pixel_center(int row, int col) { return {col + 0.5, row + 0.5}; }

// Distance from p to the shape's vertex bounding box is a lower bound on the
// distance to the outline; used to skip pixels with negligible coverage.
inline bool far_outside(const PixelShape& s, Point2 p, double beta) {
    const double dx = std::max({s.xmin - p.x, 0.0, p.x - s.xmax});
    const double dy = std::max({s.ymin - p.y, 0.0, p.y - s.ymax});
    return std::hypot(dx, dy) - s.half_width_px > kCoverageCutoff * beta;
}

}  // namespace detail

// Opacity of a single shape at a normalized pixel-center position.
inline double coverage(const Shape& shape, Point2 pixel_center, const Canvas& canvas) {
    const detail::PixelShape ps(shape, canvas);
    const Point2 p{pixel_center.x * canvas.width_px, pixel_center.y * canvas.height_px};
    return detail::sample(ps, p, canvas.aa_width_px).alpha;
}

// Forward pass with everything the backward pass needs kept on a tape.
class RenderTape {
public:
    RenderTape(const Scene& scene, const Canvas& canvas, std::size_t shape_count)
        : scene_(&scene), canvas_(canvas), count_(shape_count),
          image_(canvas.width_px, canvas.height_px, scene.background) {
        canvas.validate();
        if (shape_count > scene.shapes.size()) throw RangeError("render: truncation exceeds shape count");
        const double beta = canvas.aa_width_px;
        shapes_.reserve(count_);
        samples_.resize(count_);
        below_.resize(count_);
        for (std::size_t i = 0; i < count_; ++i) {
            const Shape& shape = scene.shapes[i];
            const auto& ps = shapes_.emplace_back(shape, canvas);
            auto& samples = samples_[i];
            auto& below = below_[i];
            samples.resize(ps.window_size());
            below.resize(ps.window_size() * 3);
            if (ps.window_empty()) continue;
            std::size_t k = 0;
            for (int r = ps.row0; r <= ps.row1; ++r) {
                for (int c = ps.col0; c <= ps.col1; ++c, ++k) {
                    const Point2 p = detail::pixel_center(r, c);
                    if (detail::far_outside(ps, p, beta)) {
                        samples[k].alpha = 0.0;
                        continue;
                    }
                    const auto s = detail::sample(ps, p, beta);
                    samples[k] = s;
                    const auto idx = image_.index(r, c);
                    for (std::size_t ch = 0; ch < 3; ++ch) {
                        double& px = image_.pixels[idx + ch];
                        below[3 * k + ch] = px;
                        px = s.alpha * shape.color[ch] + (1.0 - s.alpha) * px;
                    }
                }
            }
        }
    }

    const RasterImage& image() const { return image_; }

    SceneGrads backward(const RasterImage& grad_out) const {
        if (!grad_out.same_shape(image_) || grad_out.pixels.size() != image_.pixels.size())
            throw DimensionError("render_backward: gradient image does not match canvas");
        const double beta = canvas_.aa_width_px;
        const int m = canvas_.flatten_segments;
        SceneGrads grads;
        grads.shapes.resize(count_);
        std::vector<double> g = grad_out.pixels;  // dL/dC after the current layer
        std::vector<Point2> vertex_grad;
        for (std::size_t i = count_; i-- > 0;) {
            const Shape& shape = scene_->shapes[i];
            const auto& ps = shapes_[i];
            const auto& samples = samples_[i];
            const auto& below = below_[i];
            ShapeGrads& out = grads.shapes[i];
            vertex_grad.assign(ps.vertices.size(), Point2{});
            if (!ps.window_empty()) {
                std::size_t k = 0;
                for (int r = ps.row0; r <= ps.row1; ++r) {
                    for (int c = ps.col0; c <= ps.col1; ++c, ++k) {
                        const auto& s = samples[k];
                        if (s.alpha == 0.0) continue;
                        const auto idx = image_.index(r, c);
                        double dalpha = 0.0;
                        for (std::size_t ch = 0; ch < 3; ++ch) {
                            const double gc = g[idx + ch];
                            out.color[ch] += gc * s.alpha;
                            dalpha += gc * (shape.color[ch] - below[3 * k + ch]);
                            g[idx + ch] = gc * (1.0 - s.alpha);
                        }
                        // d alpha / d sd = -alpha (1 - alpha) / beta
                        const double dsd = -dalpha * s.alpha * (1.0 - s.alpha) / beta;
                        if (dsd == 0.0) continue;
                        const double dd = dsd * s.sign;
                        // d distance / d a = -(1-t) dir, d distance / d b = -t dir
                        const std::size_t a = s.edge;
                        const std::size_t b = (a + 1) % ps.vertices.size();
                        vertex_grad[a] = vertex_grad[a] - s.dir * (dd * (1.0 - s.t));
                        vertex_grad[b] = vertex_grad[b] - s.dir * (dd * s.t);
                    }
                }
            }
            for (std::size_t v = 0; v < vertex_grad.size(); ++v) {
                const auto vw = vertex_weights(shape.kind, m, v);
                for (std::size_t j = 0; j < 4; ++j) {
                    auto& pg = out.points[vw.points[j]];
                    pg.x += vertex_grad[v].x * vw.weights[j] * canvas_.width_px;
                    pg.y += vertex_grad[v].y * vw.weights[j] * canvas_.height_px;
                }
            }
        }
        return grads;
    }

private:
    const Scene* scene_;
    Canvas canvas_;
    std::size_t count_;
    RasterImage image_;
    std::vector<detail::PixelShape> shapes_;
    std::vector<std::vector<detail::Sample>> samples_;
    std::vector<std::vector<double>> below_;  // composite color under each shape
};

inline RasterImage render_partial(const Scene& scene, std::size_t tr, const Canvas& canvas) {
    if (tr < 1 || tr > scene.shapes.size()) throw RangeError("render_partial: truncation out of range");
    return RenderTape(scene, canvas, tr).image();
}

inline RasterImage render(const Scene& scene, const Canvas& canvas) {
    return RenderTape(scene, canvas, scene.shapes.size()).image();
}

inline SceneGrads render_backward(const Scene& scene, const Canvas& canvas, const RasterImage& grad_out) {
    return RenderTape(scene, canvas, scene.shapes.size()).backward(grad_out);
}

}  // namespace vecforge
