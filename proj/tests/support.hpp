#pragma once

// Fixtures and finite-difference oracles shared by the unit tests and the
// acceptance runner.

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "vecforge/core.hpp"
#include "vecforge/init.hpp"
#include "vecforge/network.hpp"
#include "vecforge/raster.hpp"
#include "vecforge/rng.hpp"

namespace vecforge::fixtures {

inline std::string data_path(const std::string& name) { return std::string(VECFORGE_TEST_DATA) + "/" + name; }

// A blob with every control point jittered by up to `jitter * radius`.
inline Shape jittered_blob(Rng& rng, Point2 center, double radius, double jitter) {
    Shape s;
    s.control_points = make_blob(center, radius);
    for (auto& p : s.control_points) {
        p.x += rng.uniform(-jitter, jitter) * radius;
        p.y += rng.uniform(-jitter, jitter) * radius;
    }
    s.color = {rng.uniform(), rng.uniform(), rng.uniform()};
    return s;
}

inline Scene random_scene(Rng& rng, int shapes) {
    Scene scene;
    scene.background = {rng.uniform(), rng.uniform(), rng.uniform()};
    for (int i = 0; i < shapes; ++i)
        scene.shapes.push_back(
            jittered_blob(rng, {rng.uniform(0.25, 0.75), rng.uniform(0.25, 0.75)}, rng.uniform(0.12, 0.25), 0.3));
    return scene;
}

inline RasterImage random_image(Rng& rng, int w, int h, double lo = -1.0, double hi = 1.0) {
    RasterImage img(w, h);
    for (auto& v : img.pixels) v = rng.uniform(lo, hi);
    return img;
}

inline double inner(const RasterImage& a, const RasterImage& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) s += a.pixels[i] * b.pixels[i];
    return s;
}

// |a - b| below the absolute floor, or relative error below rel.
inline bool grads_agree(double analytic, double numeric, double rel, double abs_floor) {
    const double diff = std::fabs(analytic - numeric);
    if (diff <= abs_floor) return true;
    return diff <= rel * std::max(std::fabs(analytic), std::fabs(numeric));
}

struct FdReport {
    int checked = 0;
    int passed = 0;
    double worst_rel = 0.0;
    double fraction() const { return checked ? static_cast<double>(passed) / checked : 1.0; }
};

// Central differences of <render(scene), g> against render_backward, over every
// control point coordinate and color channel.
inline FdReport raster_fd_check(Scene scene, const Canvas& canvas, const RasterImage& g, double step = 1e-3,
                                double rel = 1e-2, double abs_floor = 1e-6) {
    const SceneGrads grads = render_backward(scene, canvas, g);
    FdReport rep;
    auto objective = [&] { return inner(render(scene, canvas), g); };
    auto check = [&](double& param, double analytic) {
        const double keep = param;
        param = keep + step;
        const double up = objective();
        param = keep - step;
        const double down = objective();
        param = keep;
        const double numeric = (up - down) / (2.0 * step);
        ++rep.checked;
        if (grads_agree(analytic, numeric, rel, abs_floor)) {
            ++rep.passed;
        } else {
            rep.worst_rel = std::max(rep.worst_rel, std::fabs(analytic - numeric) /
                                                        std::max(std::fabs(analytic), std::fabs(numeric)));
        }
    };
    for (std::size_t i = 0; i < scene.shapes.size(); ++i) {
        auto& shape = scene.shapes[i];
        for (std::size_t j = 0; j < kPointsPerShape; ++j) {
            check(shape.control_points[j].x, grads.shapes[i].points[j].x);
            check(shape.control_points[j].y, grads.shapes[i].points[j].y);
        }
        for (std::size_t c = 0; c < 3; ++c) check(shape.color[c], grads.shapes[i].color[c]);
    }
    return rep;
}

// Random upstream gradients for n shapes.
struct OutputGrads {
    std::vector<ControlPoints> points;
    std::vector<Rgb> colors;
};

inline OutputGrads random_output_grads(Rng& rng, std::size_t n) {
    OutputGrads g;
    g.points.resize(n);
    g.colors.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        for (auto& p : g.points[k]) p = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        g.colors[k] = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
    }
    return g;
}

inline double output_inner(const NetworkOutput& out, const OutputGrads& g) {
    double s = 0.0;
    for (std::size_t k = 0; k < out.points.size(); ++k) {
        for (std::size_t j = 0; j < kPointsPerShape; ++j) s += dot(out.points[k][j], g.points[k][j]);
        for (std::size_t c = 0; c < 3; ++c) s += out.colors[k][c] * g.colors[k][c];
    }
    return s;
}

// Perturbs norm gains and biases away from their init values so every
// parameter has a non-degenerate gradient.
inline void randomize_affine(NetworkParams& p, Rng& rng) {
    for (Branch* b : {&p.position, &p.color}) {
        for (LayerNorm* n : {&b->norm1, &b->norm2}) {
            for (auto& v : n->gain) v = rng.uniform(0.5, 1.5);
            for (auto& v : n->shift) v = rng.uniform(-0.3, 0.3);
        }
        for (Linear* l : {&b->fc1, &b->fc2, &b->head})
            for (auto& v : l->bias) v = rng.uniform(-0.2, 0.2);
    }
}

// Central differences of <forward(net), g> against backward, over every
// trainable parameter.
inline FdReport network_fd_check(Network net, const ConditioningInput& cond, std::span<const int> idx,
                                 const OutputGrads& g, double step = 1e-6, double rel = 1e-5, double abs_floor = 1e-9) {
    const NetworkParams grads = backward(net, cond, idx, g.points, g.colors);
    std::vector<double> analytic;
    for_each_tensor(grads, [&](const std::vector<double>& t) { analytic.insert(analytic.end(), t.begin(), t.end()); });
    std::vector<double*> params;
    for_each_tensor(net.params, [&](std::vector<double>& t) {
        for (auto& v : t) params.push_back(&v);
    });
    FdReport rep;
    for (std::size_t i = 0; i < params.size(); ++i) {
        double& p = *params[i];
        const double keep = p;
        p = keep + step;
        const double up = output_inner(forward(net, cond, idx), g);
        p = keep - step;
        const double down = output_inner(forward(net, cond, idx), g);
        p = keep;
        const double numeric = (up - down) / (2.0 * step);
        ++rep.checked;
        if (grads_agree(analytic[i], numeric, rel, abs_floor)) {
            ++rep.passed;
        } else {
            rep.worst_rel = std::max(rep.worst_rel, std::fabs(analytic[i] - numeric) /
                                                        std::max(std::fabs(analytic[i]), std::fabs(numeric)));
        }
    }
    return rep;
}

// Renders the three-blob target used by the end-to-end runs.
inline Scene three_blob_scene() {
    Scene s;
    s.background = {1.0, 1.0, 1.0};
    auto add = [&](Point2 c, double r, Rgb color) {
        Shape sh;
        sh.control_points = make_blob(c, r);
        sh.color = color;
        s.shapes.push_back(sh);
    };
    add({0.3, 0.35}, 0.18, {0.9, 0.2, 0.2});
    add({0.68, 0.4}, 0.15, {0.2, 0.6, 0.9});
    add({0.5, 0.72}, 0.16, {0.2, 0.8, 0.3});
    return s;
}

// Nonzero weight wherever the target differs from its white background.
inline SaliencyMap non_background_mask(const RasterImage& target) {
    SaliencyMap m{target.width_px, target.height_px,
                  std::vector<double>(static_cast<std::size_t>(target.width_px) * target.height_px)};
    for (int r = 0; r < target.height_px; ++r)
        for (int c = 0; c < target.width_px; ++c) {
            const Rgb p = target.at(r, c);
            m.weights[static_cast<std::size_t>(r) * target.width_px + c] = (p.r + p.g + p.b < 2.99) ? 1.0 : 0.0;
        }
    return m;
}

}  // namespace vecforge::fixtures
