#pragma once

// Saliency-driven initialization: shape centers are drawn from an importance
// map, each center becomes a circular blob, and its color is read from a
// reference image.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "vecforge/core.hpp"
#include "vecforge/raster.hpp"
#include "vecforge/rng.hpp"

namespace vecforge {

struct SaliencyMap {
    int width_px = 0;
    int height_px = 0;
    std::vector<double> weights;  // row-major, nonnegative

    double at(int row, int col) const { return weights[static_cast<std::size_t>(row) * width_px + col]; }
};

struct InitTarget {
    ControlPoints points{};
    Rgb color{};
    bool operator==(const InitTarget&) const = default;
};

using InitTargets = std::vector<InitTarget>;

// Circle approximation handle length: (4/3) tan(pi/8).
inline const double kCircleKappa = 4.0 / 3.0 * std::tan(std::numbers::pi / 8.0);

struct PixelDraw {
    int row = 0;
    int col = 0;
};

inline std::vector<PixelDraw> sample_pixels(const SaliencyMap& map, int n, Rng& rng) {
    if (n < 1) throw RangeError("sample_points: n must be >= 1");
    const std::size_t count = static_cast<std::size_t>(map.width_px) * map.height_px;
    if (count == 0 || map.weights.size() != count) throw DimensionError("sample_points: saliency map size mismatch");
    std::vector<double> cdf(count);
    double total = 0.0;
    for (std::size_t i = 0; i < count; ++i) {
        const double w = map.weights[i];
        if (!std::isfinite(w) || w < 0.0) throw RangeError("sample_points: weights must be finite and nonnegative");
        total += w;
        cdf[i] = total;
    }
    if (!(total > 0.0)) throw RangeError("sample_points: saliency map has no positive weight");
    std::vector<PixelDraw> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int k = 0; k < n; ++k) {
        const double u = rng.uniform() * total;
        // First index whose cumulative weight exceeds u; zero-weight pixels are never chosen.
        auto it = std::upper_bound(cdf.begin(), cdf.end(), u);
        if (it == cdf.end()) it = std::prev(cdf.end());
        while (it != cdf.begin() && map.weights[static_cast<std::size_t>(it - cdf.begin())] == 0.0) --it;
        const auto idx = static_cast<std::size_t>(it - cdf.begin());
        out.push_back({static_cast<int>(idx / map.width_px), static_cast<int>(idx % map.width_px)});
    }
    return out;
}

inline Point2 pixel_center_normalized(int row, int col, int width, int height) {
    return {(col + 0.5) / width, (row + 0.5) / height};
}

inline std::vector<Point2> sample_points(const SaliencyMap& map, int n, Rng& rng) {
    std::vector<Point2> pts;
    for (auto d : sample_pixels(map, n, rng))
        pts.push_back(pixel_center_normalized(d.row, d.col, map.width_px, map.height_px));
    return pts;
}

// Four quarter arcs starting at (cx + r, cy); positive signed area in canvas
// coordinates.
inline ControlPoints make_blob(Point2 c, double radius) {
    if (!(radius > 0.0)) throw RangeError("make_blob: radius must be positive");
    const double r = radius;
    const double h = kCircleKappa * radius;
    return {{
        {c.x + r, c.y},     {c.x + r, c.y + h}, {c.x + h, c.y + r},
        {c.x, c.y + r},     {c.x - h, c.y + r}, {c.x - r, c.y + h},
        {c.x - r, c.y},     {c.x - r, c.y - h}, {c.x - h, c.y - r},
        {c.x, c.y - r},     {c.x + h, c.y - r}, {c.x + r, c.y - h},
    }};
}

inline InitTargets build_init_scene(const SaliencyMap& map, const RasterImage& colors, int n, double radius, Rng& rng) {
    if (map.width_px != colors.width_px || map.height_px != colors.height_px)
        throw DimensionError("build_init_scene: saliency map and color image sizes differ");
    InitTargets targets;
    targets.reserve(static_cast<std::size_t>(n));
    for (auto d : sample_pixels(map, n, rng)) {
        const Point2 center = pixel_center_normalized(d.row, d.col, map.width_px, map.height_px);
        targets.push_back({make_blob(center, radius), colors.at(d.row, d.col)});
    }
    return targets;
}

inline Scene scene_from_targets(const InitTargets& targets, Rgb background, ShapeKind kind = ShapeKind::ClosedFill,
                                double stroke_width = 0.01) {
    Scene s;
    s.background = background;
    for (const auto& t : targets) s.shapes.push_back({t.points, t.color, kind, stroke_width});
    return s;
}

}  // namespace vecforge
