#pragma once

// Geometry primitives and the scene model.
//
// Coordinates are normalized to the canvas: (0,0) is the top-left corner,
// (1,1) the bottom-right, y grows downward. Pixel (r,c) has its center at
// ((c+0.5)/W, (r+0.5)/H).

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace vecforge {

// Error types shared by every module.
struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct DimensionError : Error {
    using Error::Error;
};
struct RangeError : Error {
    using Error::Error;
};

struct Point2 {
    double x = 0.0;
    double y = 0.0;

    constexpr Point2 operator+(Point2 o) const { return {x + o.x, y + o.y}; }
    constexpr Point2 operator-(Point2 o) const { return {x - o.x, y - o.y}; }
    constexpr Point2 operator*(double s) const { return {x * s, y * s}; }
    constexpr bool operator==(const Point2&) const = default;
};

inline constexpr double dot(Point2 a, Point2 b) { return a.x * b.x + a.y * b.y; }
inline constexpr double cross(Point2 a, Point2 b) { return a.x * b.y - a.y * b.x; }
inline double norm(Point2 a) { return std::hypot(a.x, a.y); }

struct Rgb {
    double r = 0.0;
    double g = 0.0;
    double b = 0.0;

    constexpr double operator[](std::size_t i) const { return i == 0 ? r : (i == 1 ? g : b); }
    constexpr double& operator[](std::size_t i) { return i == 0 ? r : (i == 1 ? g : b); }
    constexpr bool operator==(const Rgb&) const = default;
};

inline Rgb rgb_from_bytes(int r, int g, int b) { return {r / 255.0, g / 255.0, b / 255.0}; }

enum class ShapeKind { ClosedFill, OpenStroke };

inline constexpr std::size_t kPointsPerShape = 12;
inline constexpr std::size_t kSegmentsPerShape = 4;

using ControlPoints = std::array<Point2, kPointsPerShape>;

struct Shape {
    ControlPoints control_points{};
    Rgb color{};
    ShapeKind kind = ShapeKind::ClosedFill;
    double stroke_width = 0.01;  // normalized; only read for OpenStroke

    bool operator==(const Shape&) const = default;
};

struct Scene {
    std::vector<Shape> shapes;  // index 0 is the bottom layer
    Rgb background{1.0, 1.0, 1.0};

    bool operator==(const Scene&) const = default;
};

struct Canvas {
    int width_px = 128;
    int height_px = 128;
    double aa_width_px = 1.0;
    int flatten_segments = 16;

    bool operator==(const Canvas&) const = default;

    void validate() const {
        if (width_px < 1 || height_px < 1) throw RangeError("canvas size must be at least 1x1");
        if (!(aa_width_px > 0.0)) throw RangeError("anti-alias width must be positive");
        if (flatten_segments < 2) throw RangeError("flatten_segments must be >= 2");
    }

    // Stroke widths are normalized to the shorter canvas side.
    double stroke_scale_px() const { return static_cast<double>(std::min(width_px, height_px)); }
};

inline bool is_valid(const Shape& s) {
    for (const auto& p : s.control_points)
        if (!std::isfinite(p.x) || !std::isfinite(p.y)) return false;
    for (std::size_t c = 0; c < 3; ++c)
        if (!(s.color[c] >= 0.0 && s.color[c] <= 1.0)) return false;
    if (s.kind == ShapeKind::OpenStroke && !(s.stroke_width > 0.0)) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Cubic Bezier segments

// Indices into the 12 control points for one cubic segment.
using SegmentIndices = std::array<std::size_t, 4>;

// Closed shapes wrap the last segment back to point 0; open strokes end on a
// duplicated point 11 so both kinds use all 12 learned points.
inline constexpr SegmentIndices segment_indices(ShapeKind kind, std::size_t k) {
    if (kind == ShapeKind::OpenStroke && k == 3) return {9, 10, 11, 11};
    return {3 * k, 3 * k + 1, 3 * k + 2, (3 * (k + 1)) % kPointsPerShape};
}

using Cubic = std::array<Point2, 4>;

inline std::array<Cubic, kSegmentsPerShape> shape_segments(const Shape& shape) {
    std::array<Cubic, kSegmentsPerShape> out{};
    for (std::size_t k = 0; k < kSegmentsPerShape; ++k) {
        const auto idx = segment_indices(shape.kind, k);
        for (std::size_t j = 0; j < 4; ++j) out[k][j] = shape.control_points[idx[j]];
    }
    return out;
}

inline constexpr std::array<double, 4> bernstein3(double t) {
    const double s = 1.0 - t;
    return {s * s * s, 3.0 * s * s * t, 3.0 * s * t * t, t * t * t};
}

inline Point2 eval_cubic(const Cubic& c, double t) {
    const auto w = bernstein3(t);
    return c[0] * w[0] + c[1] * w[1] + c[2] * w[2] + c[3] * w[3];
}

// Closed fills flatten to 4*m vertices (the closing edge is implicit).
// Open strokes flatten to 4*m+1 vertices and are not closed.
struct Polyline {
    std::vector<Point2> vertices;
    bool closed = true;

    std::size_t edge_count() const {
        if (vertices.size() < 2) return 0;
        return closed ? vertices.size() : vertices.size() - 1;
    }
    std::pair<Point2, Point2> edge(std::size_t e) const {
        return {vertices[e], vertices[(e + 1) % vertices.size()]};
    }
};

// Bernstein weights of polyline vertex v on control points: vertex v sits on
// segment v / m at parameter (v % m) / m (the final open vertex is t = 1 on segment 3).
struct VertexWeights {
    SegmentIndices points;
    std::array<double, 4> weights;
};

inline VertexWeights vertex_weights(ShapeKind kind, int m, std::size_t v) {
    std::size_t k = v / static_cast<std::size_t>(m);
    double t = static_cast<double>(v % static_cast<std::size_t>(m)) / m;
    if (k >= kSegmentsPerShape) {
        k = kSegmentsPerShape - 1;
        t = 1.0;
    }
    return {segment_indices(kind, k), bernstein3(t)};
}

inline Polyline flatten_shape(const Shape& shape, int m) {
    if (m < 2) throw RangeError("flatten_shape: segments per cubic must be >= 2");
    const bool closed = shape.kind == ShapeKind::ClosedFill;
    const std::size_t count = kSegmentsPerShape * static_cast<std::size_t>(m) + (closed ? 0 : 1);
    Polyline poly;
    poly.closed = closed;
    poly.vertices.reserve(count);
    for (std::size_t v = 0; v < count; ++v) {
        const auto vw = vertex_weights(shape.kind, m, v);
        Point2 p{};
        for (std::size_t j = 0; j < 4; ++j) p = p + shape.control_points[vw.points[j]] * vw.weights[j];
        poly.vertices.push_back(p);
    }
    return poly;
}

// ---------------------------------------------------------------------------
// Queries on polylines

// Signed crossing contribution of edge (a,b) to the winding number around pt.
inline int winding_contribution(Point2 a, Point2 b, Point2 pt) {
    if (a.y <= pt.y) {
        if (b.y > pt.y && cross(b - a, pt - a) > 0.0) return 1;
    } else if (b.y <= pt.y && cross(b - a, pt - a) < 0.0) {
        return -1;
    }
    return 0;
}

inline int winding_number(std::span<const Point2> poly, Point2 pt) {
    int w = 0;
    const std::size_t n = poly.size();
    for (std::size_t i = 0; i < n; ++i) w += winding_contribution(poly[i], poly[(i + 1) % n], pt);
    return w;
}

// Nonzero fill rule; the polygon is implicitly closed.
inline bool point_in_polygon(std::span<const Point2> poly, Point2 pt) {
    if (poly.size() < 3) throw RangeError("point_in_polygon: need at least 3 vertices");
    return winding_number(poly, pt) != 0;
}

struct SegmentProjection {
    double distance = 0.0;
    double t = 0.0;  // position of the nearest point along the segment
};

inline SegmentProjection project_on_segment(Point2 a, Point2 b, Point2 pt) {
    const Point2 ab = b - a;
    const double len2 = dot(ab, ab);
    double t = len2 > 0.0 ? dot(pt - a, ab) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return {norm(pt - (a + ab * t)), t};
}

struct PolylineDistance {
    double distance = std::numeric_limits<double>::infinity();
    std::size_t nearest_segment = 0;
    double t_on_segment = 0.0;
};

// Segments are (v[i], v[i+1]); a closed polyline adds (v[n-1], v[0]).
inline PolylineDistance distance_to_polyline(const Polyline& poly, Point2 pt) {
    if (poly.vertices.size() < 2) throw RangeError("distance_to_polyline: need at least 2 vertices");
    PolylineDistance best;
    const std::size_t edges = poly.edge_count();
    for (std::size_t e = 0; e < edges; ++e) {
        const auto [a, b] = poly.edge(e);
        const auto proj = project_on_segment(a, b, pt);
        if (proj.distance < best.distance) best = {proj.distance, e, proj.t};
    }
    return best;
}

}  // namespace vecforge
