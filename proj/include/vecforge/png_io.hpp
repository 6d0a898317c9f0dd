#pragma once

// 8-bit PNG reading and writing through libpng's simplified API. Sample values
// map linearly to [0, 1]; no gamma handling.

#include <png.h>

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "vecforge/core.hpp"
#include "vecforge/init.hpp"
#include "vecforge/raster.hpp"

namespace vecforge {

namespace png_detail {

inline std::vector<std::uint8_t> read(const std::string& path, std::uint32_t format, int& width, int& height) {
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.c_str()))
        throw Error("cannot read PNG '" + path + "': " + image.message);
    image.format = format;
    std::vector<std::uint8_t> buf(PNG_IMAGE_SIZE(image));
    if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
        png_image_free(&image);
        throw Error("cannot decode PNG '" + path + "': " + image.message);
    }
    width = static_cast<int>(image.width);
    height = static_cast<int>(image.height);
    return buf;
}

}  // namespace png_detail

inline RasterImage read_png_rgb(const std::string& path) {
    int w = 0, h = 0;
    const auto buf = png_detail::read(path, PNG_FORMAT_RGB, w, h);
    RasterImage img(w, h, 0.0);
    for (std::size_t i = 0; i < buf.size(); ++i) img.pixels[i] = buf[i] / 255.0;
    return img;
}

inline SaliencyMap read_png_saliency(const std::string& path) {
    int w = 0, h = 0;
    const auto buf = png_detail::read(path, PNG_FORMAT_GRAY, w, h);
    SaliencyMap map{w, h, std::vector<double>(buf.size())};
    for (std::size_t i = 0; i < buf.size(); ++i) map.weights[i] = buf[i] / 255.0;
    return map;
}

inline void write_png_rgb(const RasterImage& img, const std::string& path) {
    std::vector<std::uint8_t> buf(img.pixels.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<std::uint8_t>(std::lround(std::clamp(img.pixels[i], 0.0, 1.0) * 255.0));
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(img.width_px);
    image.height = static_cast<png_uint_32>(img.height_px);
    image.format = PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
        throw Error("cannot write PNG '" + path + "': " + image.message);
}

inline void write_png_gray(const SaliencyMap& map, const std::string& path) {
    std::vector<std::uint8_t> buf(map.weights.size());
    for (std::size_t i = 0; i < buf.size(); ++i)
        buf[i] = static_cast<std::uint8_t>(std::lround(std::clamp(map.weights[i], 0.0, 1.0) * 255.0));
    png_image image{};
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(map.width_px);
    image.height = static_cast<png_uint_32>(map.height_px);
    image.format = PNG_FORMAT_GRAY;
    if (!png_image_write_to_file(&image, path.c_str(), 0, buf.data(), 0, nullptr))
        throw Error("cannot write PNG '" + path + "': " + image.message);
}

}  // namespace vecforge
