#pragma once

// Guidance: anything that turns a rendered image into dL/dimage.

#include <bit>
#include <cstdint>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <boost/beast/core/detail/base64.hpp>

#include "vecforge/core.hpp"
#include "vecforge/raster.hpp"

namespace vecforge {

struct GuidanceContext {
    std::string prompt;
    int step = 0;
    int total_steps = 1;
    std::uint64_t rng_seed = 0;
};

// Same layout as RasterImage; values are unbounded.
using GradientImage = RasterImage;

class Guidance {
public:
    virtual ~Guidance() = default;
    // Must be deterministic in (image, ctx).
    virtual GradientImage gradient(const RasterImage& image, const GuidanceContext& ctx) = 0;
    // Scalar loss when the guidance has one (used for logging only).
    virtual std::optional<double> loss(const RasterImage&) const { return std::nullopt; }
};

class ZeroGuidance final : public Guidance {
public:
    GradientImage gradient(const RasterImage& image, const GuidanceContext&) override {
        return GradientImage(image.width_px, image.height_px, 0.0);
    }
};

inline double mean_squared_error(const RasterImage& a, const RasterImage& b) {
    if (!a.same_shape(b)) throw DimensionError("mse: image sizes differ");
    double s = 0.0;
    for (std::size_t i = 0; i < a.pixels.size(); ++i) {
        const double d = a.pixels[i] - b.pixels[i];
        s += d * d;
    }
    return a.pixels.empty() ? 0.0 : s / static_cast<double>(a.pixels.size());
}

// Gradient of mean squared error: 2 (image - target) / (H W 3).
inline GradientImage reconstruction_gradient(const RasterImage& image, const RasterImage& target) {
    if (!image.same_shape(target)) throw DimensionError("reconstruction_gradient: image sizes differ");
    GradientImage g(image.width_px, image.height_px, 0.0);
    const double scale = 2.0 / static_cast<double>(image.pixels.size());
    for (std::size_t i = 0; i < g.pixels.size(); ++i) g.pixels[i] = scale * (image.pixels[i] - target.pixels[i]);
    return g;
}

// Fits the render to a fixed target image. When training with several aspect
// ratios, supply one target per canvas size.
class ReconstructionGuidance final : public Guidance {
public:
    explicit ReconstructionGuidance(RasterImage target) { targets_.push_back(std::move(target)); }
    explicit ReconstructionGuidance(std::vector<RasterImage> targets) : targets_(std::move(targets)) {}

    const RasterImage& target_for(const RasterImage& image) const {
        for (const auto& t : targets_)
            if (t.same_shape(image)) return t;
        throw DimensionError("reconstruction guidance: no target matches the rendered size");
    }

    GradientImage gradient(const RasterImage& image, const GuidanceContext&) override {
        return reconstruction_gradient(image, target_for(image));
    }
    std::optional<double> loss(const RasterImage& image) const override {
        return mean_squared_error(image, target_for(image));
    }

private:
    std::vector<RasterImage> targets_;
};

// ---------------------------------------------------------------------------
// Prompts and color names

struct NamedColor {
    std::string name;
    Rgb rgb;
    bool operator==(const NamedColor&) const = default;
};

// The 16 CSS basic color keywords.
inline std::vector<NamedColor> css_basic_palette() {
    return {
        {"black", rgb_from_bytes(0, 0, 0)},        {"silver", rgb_from_bytes(192, 192, 192)},
        {"gray", rgb_from_bytes(128, 128, 128)},   {"white", rgb_from_bytes(255, 255, 255)},
        {"maroon", rgb_from_bytes(128, 0, 0)},     {"red", rgb_from_bytes(255, 0, 0)},
        {"purple", rgb_from_bytes(128, 0, 128)},   {"fuchsia", rgb_from_bytes(255, 0, 255)},
        {"green", rgb_from_bytes(0, 128, 0)},      {"lime", rgb_from_bytes(0, 255, 0)},
        {"olive", rgb_from_bytes(128, 128, 0)},    {"yellow", rgb_from_bytes(255, 255, 0)},
        {"navy", rgb_from_bytes(0, 0, 128)},       {"blue", rgb_from_bytes(0, 0, 255)},
        {"teal", rgb_from_bytes(0, 128, 128)},     {"aqua", rgb_from_bytes(0, 255, 255)},
    };
}

// Nearest entry in RGB (Euclidean); ties go to the earlier entry.
inline const NamedColor& nearest_color(const std::vector<NamedColor>& palette, Rgb c) {
    if (palette.empty()) throw RangeError("nearest_color: empty palette");
    std::size_t best = 0;
    double best_d = INFINITY;
    for (std::size_t i = 0; i < palette.size(); ++i) {
        double d = 0.0;
        for (std::size_t ch = 0; ch < 3; ++ch) d += (palette[i].rgb[ch] - c[ch]) * (palette[i].rgb[ch] - c[ch]);
        if (d < best_d) {
            best_d = d;
            best = i;
        }
    }
    return palette[best];
}

inline std::string format_prompt(std::string_view object, std::string_view color_name) {
    if (object.empty()) throw RangeError("format_prompt: empty object");
    std::string s = "A minimalist vector art of ";
    s += object;
    s += ", isolated on a ";
    s += color_name;
    s += " background.";
    return s;
}

// ---------------------------------------------------------------------------
// Wire encoding shared with the remote gradient provider: little-endian
// float32, H*W*3 values, row-major RGB, base64 (RFC 4648, padded).

namespace wire {

struct DecodeError : Error {
    using Error::Error;
};

inline std::string base64_encode(std::string_view bytes) {
    std::string out(boost::beast::detail::base64::encoded_size(bytes.size()), '\0');
    out.resize(boost::beast::detail::base64::encode(out.data(), bytes.data(), bytes.size()));
    return out;
}

// Strict: padded input only, no whitespace or foreign characters.
inline std::string base64_decode(std::string_view text) {
    if (text.size() % 4 != 0) throw DecodeError("base64: length is not a multiple of 4");
    std::size_t pad = 0;
    while (pad < 2 && pad < text.size() && text[text.size() - 1 - pad] == '=') ++pad;
    std::string out(boost::beast::detail::base64::decoded_size(text.size()), '\0');
    const auto [written, read] = boost::beast::detail::base64::decode(out.data(), text.data(), text.size() - pad);
    if (read != text.size() - pad) throw DecodeError("base64: invalid character at offset " + std::to_string(read));
    out.resize(written);
    return out;
}

inline std::string encode_floats(const std::vector<double>& values) {
    std::string bytes(values.size() * 4, '\0');
    for (std::size_t i = 0; i < values.size(); ++i) {
        auto bits = std::bit_cast<std::uint32_t>(static_cast<float>(values[i]));
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        std::memcpy(&bytes[4 * i], &bits, 4);
    }
    return base64_encode(bytes);
}

inline std::vector<double> decode_floats(std::string_view b64, std::size_t expected_count) {
    const std::string bytes = base64_decode(b64);
    if (bytes.size() != expected_count * 4)
        throw DecodeError("payload holds " + std::to_string(bytes.size()) + " bytes, expected " +
                          std::to_string(expected_count * 4));
    std::vector<double> out(expected_count);
    for (std::size_t i = 0; i < expected_count; ++i) {
        std::uint32_t bits;
        std::memcpy(&bits, &bytes[4 * i], 4);
        if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap32(bits);
        out[i] = static_cast<double>(std::bit_cast<float>(bits));
    }
    return out;
}

}  // namespace wire

}  // namespace vecforge
