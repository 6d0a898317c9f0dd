#pragma once

// Layered SVG export and a strict reader for the exported dialect.
//
// Document layout, in order: one background <rect>, then one <path> per
// shape from the bottom layer up. Closed fills are "M C C C C Z" with a fill
// color; sketch strokes are "M C C C C" with fill="none" and round caps.
// Coordinates are pixel units with 4 decimals.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/ptree.hpp>
#include <boost/property_tree/xml_parser.hpp>

#include "vecforge/core.hpp"

namespace vecforge {

struct ParseError : Error {
    using Error::Error;
};

struct SvgOptions {
    int width_px = 512;
    int height_px = 512;
    bool sketch = false;
};

namespace svg_detail {

inline std::string fixed4(double v) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    std::string s(buf);
    if (s == "-0.0000") s = "0.0000";
    return s;
}

inline int channel_byte(double v) { return static_cast<int>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

inline std::string hex_color(Rgb c) {
    char buf[8];
    std::snprintf(buf, sizeof buf, "#%02x%02x%02x", channel_byte(c.r), channel_byte(c.g), channel_byte(c.b));
    return buf;
}

inline std::string path_data(const Shape& shape, int w, int h) {
    auto pt = [&](Point2 p) { return fixed4(p.x * w) + " " + fixed4(p.y * h); };
    const auto segs = shape_segments(shape);
    std::string d = "M " + pt(segs[0][0]);
    for (const auto& s : segs) d += " C " + pt(s[1]) + " " + pt(s[2]) + " " + pt(s[3]);
    if (shape.kind == ShapeKind::ClosedFill) d += " Z";
    return d;
}

}  // namespace svg_detail

inline std::string hex_color(Rgb c) { return svg_detail::hex_color(c); }

// Byte-deterministic for identical inputs.
inline std::string export_svg(const Scene& scene, const SvgOptions& opts) {
    const int w = opts.width_px;
    const int h = opts.height_px;
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
    os << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << w << "\" height=\"" << h
       << "\" viewBox=\"0 0 " << w << ' ' << h << "\">\n";
    os << "<rect x=\"0\" y=\"0\" width=\"" << w << "\" height=\"" << h << "\" fill=\""
       << svg_detail::hex_color(scene.background) << "\"/>\n";
    const double stroke_scale = std::min(w, h);
    for (const auto& shape : scene.shapes) {
        Shape s = shape;
        if (opts.sketch) s.kind = ShapeKind::OpenStroke;
        os << "<path d=\"" << svg_detail::path_data(s, w, h) << "\"";
        if (s.kind == ShapeKind::ClosedFill) {
            os << " fill=\"" << svg_detail::hex_color(s.color) << "\"/>\n";
        } else {
            os << " fill=\"none\" stroke=\"" << svg_detail::hex_color(s.color) << "\" stroke-width=\""
               << svg_detail::fixed4(s.stroke_width * stroke_scale)
               << "\" stroke-linecap=\"round\" stroke-linejoin=\"round\"/>\n";
        }
    }
    os << "</svg>\n";
    return os.str();
}

struct ParsedSvg {
    int width_px = 0;
    int height_px = 0;
    Scene scene;  // control points normalized by width/height
};

namespace svg_detail {

using boost::property_tree::ptree;

[[noreturn]] inline void fail(const std::string& where, const std::string& what) {
    throw ParseError(where + ": " + what);
}

inline std::string attr(const ptree& node, const std::string& name, const std::string& where) {
    const auto a = node.get_child_optional("<xmlattr>." + name);
    if (!a) fail(where, "missing attribute '" + name + "'");
    return a->data();
}

inline std::vector<std::string> attr_names(const ptree& node) {
    std::vector<std::string> names;
    if (const auto a = node.get_child_optional("<xmlattr>"))
        for (const auto& [k, _] : *a) names.push_back(k);
    return names;
}

inline void expect_attrs(const ptree& node, std::initializer_list<std::string_view> allowed, const std::string& where) {
    for (const auto& n : attr_names(node)) {
        bool ok = false;
        for (auto a : allowed) ok = ok || n == a;
        if (!ok) fail(where, "unsupported attribute '" + n + "'");
    }
}

inline int parse_int(const std::string& s, const std::string& where) {
    std::size_t used = 0;
    int v = 0;
    try {
        v = std::stoi(s, &used);
    } catch (const std::exception&) {
        fail(where, "expected an integer, got '" + s + "'");
    }
    if (used != s.size()) fail(where, "expected an integer, got '" + s + "'");
    return v;
}

inline double parse_number(std::string_view s, const std::string& where) {
    std::size_t used = 0;
    double v = 0.0;
    const std::string tmp(s);
    try {
        v = std::stod(tmp, &used);
    } catch (const std::exception&) {
        fail(where, "expected a number, got '" + tmp + "'");
    }
    if (used != tmp.size() || !std::isfinite(v)) fail(where, "expected a number, got '" + tmp + "'");
    return v;
}

inline Rgb parse_hex(const std::string& s, const std::string& where) {
    if (s.size() != 7 || s[0] != '#') fail(where, "expected #rrggbb color, got '" + s + "'");
    auto hex = [&](char c) -> int {
        if (c >= '0' && c <= '9') return c - '0';
        if (c >= 'a' && c <= 'f') return c - 'a' + 10;
        if (c >= 'A' && c <= 'F') return c - 'A' + 10;
        fail(where, "bad hex digit in '" + s + "'");
    };
    auto byte = [&](int i) { return hex(s[i]) * 16 + hex(s[i + 1]); };
    return rgb_from_bytes(byte(1), byte(3), byte(5));
}

// Tokens of a path "d" string, each with its offset for error messages.
struct Token {
    std::string_view text;
    std::size_t offset;
};

inline std::vector<Token> tokenize(std::string_view d) {
    std::vector<Token> out;
    std::size_t i = 0;
    while (i < d.size()) {
        if (d[i] == ' ') {
            ++i;
            continue;
        }
        const std::size_t start = i;
        while (i < d.size() && d[i] != ' ') ++i;
        out.push_back({d.substr(start, i - start), start});
    }
    return out;
}

inline void parse_path(std::string_view d, Shape& shape, bool closed, int w, int h, const std::string& where) {
    const auto toks = tokenize(d);
    std::size_t k = 0;
    auto at = [&](std::size_t off) { return where + " d[" + std::to_string(off) + "]"; };
    auto command = [&](char c) {
        if (k >= toks.size()) fail(at(d.size()), std::string("expected command '") + c + "'");
        const auto& t = toks[k];
        if (t.text.size() != 1 || t.text[0] != c)
            fail(at(t.offset), std::string("expected command '") + c + "', found '" + std::string(t.text) + "'");
        ++k;
    };
    auto point = [&]() -> Point2 {
        if (k + 1 >= toks.size()) fail(at(d.size()), "expected coordinate pair");
        const double x = parse_number(toks[k].text, at(toks[k].offset));
        const double y = parse_number(toks[k + 1].text, at(toks[k + 1].offset));
        k += 2;
        return {x / w, y / h};
    };
    const auto kind = closed ? ShapeKind::ClosedFill : ShapeKind::OpenStroke;
    command('M');
    shape.control_points[0] = point();
    for (std::size_t seg = 0; seg < kSegmentsPerShape; ++seg) {
        command('C');
        const auto idx = segment_indices(kind, seg);
        for (std::size_t j = 1; j < 4; ++j) {
            const std::size_t tok_offset = k < toks.size() ? toks[k].offset : d.size();
            const Point2 p = point();
            const std::size_t target = idx[j];
            const bool shared = (seg == kSegmentsPerShape - 1 && j == 3);
            if (shared) {
                // The closing point repeats point 0 (fill) or point 11 (stroke).
                const Point2 expect = shape.control_points[target];
                if (!(p == expect)) fail(at(tok_offset), "final point does not match the shared endpoint");
            } else {
                shape.control_points[target] = p;
            }
        }
    }
    if (closed) command('Z');
    if (k != toks.size()) fail(at(toks[k].offset), "unexpected token '" + std::string(toks[k].text) + "'");
}

}  // namespace svg_detail

inline ParsedSvg parse_svg_paths(const std::string& text) {
    using svg_detail::fail;
    using svg_detail::ptree;
    ptree doc;
    try {
        std::istringstream is(text);
        boost::property_tree::read_xml(is, doc);
    } catch (const boost::property_tree::xml_parser_error& e) {
        throw ParseError("svg line " + std::to_string(e.line()) + ": " + e.message());
    }
    ParsedSvg out;
    std::size_t roots = 0;
    for (const auto& [name, node] : doc) {
        if (name == "<xmlcomment>") continue;
        if (name != "svg") fail("document", "unexpected element <" + name + ">");
        ++roots;
    }
    if (roots != 1) fail("document", "expected exactly one <svg> root");
    const ptree& svg = doc.get_child("svg");
    svg_detail::expect_attrs(svg, {"xmlns", "version", "width", "height", "viewBox"}, "<svg>");
    out.width_px = svg_detail::parse_int(svg_detail::attr(svg, "width", "<svg>"), "<svg> width");
    out.height_px = svg_detail::parse_int(svg_detail::attr(svg, "height", "<svg>"), "<svg> height");
    if (out.width_px < 1 || out.height_px < 1) fail("<svg>", "width and height must be positive");
    const int w = out.width_px;
    const int h = out.height_px;
    const double stroke_scale = std::min(w, h);

    bool seen_rect = false;
    std::size_t element = 0;
    for (const auto& [name, node] : svg) {
        if (name == "<xmlattr>" || name == "<xmlcomment>") continue;
        const std::string where = "element " + std::to_string(element++) + " <" + name + ">";
        if (!node.data().empty() && node.data().find_first_not_of(" \n\t\r") != std::string::npos)
            fail(where, "unexpected text content");
        for (const auto& [child, _] : node)
            if (child != "<xmlattr>") fail(where, "unexpected child <" + child + ">");
        if (name == "rect") {
            if (seen_rect || element != 1) fail(where, "background rect must be the first element");
            svg_detail::expect_attrs(node, {"x", "y", "width", "height", "fill"}, where);
            out.scene.background = svg_detail::parse_hex(svg_detail::attr(node, "fill", where), where + " fill");
            seen_rect = true;
        } else if (name == "path") {
            if (!seen_rect) fail(where, "path before background rect");
            Shape shape;
            const std::string fill = svg_detail::attr(node, "fill", where);
            const bool closed = fill != "none";
            if (closed) {
                svg_detail::expect_attrs(node, {"d", "fill"}, where);
                shape.kind = ShapeKind::ClosedFill;
                shape.color = svg_detail::parse_hex(fill, where + " fill");
            } else {
                svg_detail::expect_attrs(node, {"d", "fill", "stroke", "stroke-width", "stroke-linecap", "stroke-linejoin"},
                                         where);
                shape.kind = ShapeKind::OpenStroke;
                shape.color = svg_detail::parse_hex(svg_detail::attr(node, "stroke", where), where + " stroke");
                shape.stroke_width =
                    svg_detail::parse_number(svg_detail::attr(node, "stroke-width", where), where + " stroke-width") /
                    stroke_scale;
            }
            svg_detail::parse_path(svg_detail::attr(node, "d", where), shape, closed, w, h, where);
            out.scene.shapes.push_back(shape);
        } else {
            fail(where, "unsupported element");
        }
    }
    if (!seen_rect) fail("<svg>", "missing background rect");
    return out;
}

}  // namespace vecforge
