#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "support.hpp"
#include "vecforge/checkpoint.hpp"
#include "vecforge/svg.hpp"

using namespace vecforge;

namespace {

struct GoldenScene {
    int width = 0;
    int height = 0;
    double stroke_width = 0.0;
    Scene scene;
};

GoldenScene load_golden_scene() {
    const auto j = nlohmann::json::parse(read_text_file(fixtures::data_path("golden_scene.json")));
    GoldenScene g;
    g.width = j.at("width");
    g.height = j.at("height");
    g.stroke_width = j.at("stroke_width");
    g.scene.background = rgb_from_json(j.at("background"));
    for (const auto& s : j.at("shapes")) {
        Shape shape;
        shape.color = rgb_from_json(s.at("color"));
        for (std::size_t k = 0; k < kPointsPerShape; ++k)
            shape.control_points[k] = {s.at("points")[k][0].get<double>(), s.at("points")[k][1].get<double>()};
        g.scene.shapes.push_back(shape);
    }
    return g;
}

Scene as_strokes(Scene s, double width) {
    for (auto& shape : s.shapes) {
        shape.kind = ShapeKind::OpenStroke;
        shape.stroke_width = width;
    }
    return s;
}

Checkpoint random_checkpoint(std::uint64_t seed) {
    TrainConfig cfg;
    cfg.n_shapes = 5;
    cfg.hidden = 12;
    cfg.frequencies = 6;
    cfg.condition_background = true;
    cfg.condition_aspect = true;
    cfg.aspect_choices = {{1, 1}, {16, 9}};
    cfg.bg_palette = {{"white", {1, 1, 1}}, {"teal", rgb_from_bytes(0, 128, 128)}};
    cfg.seed = seed;
    Checkpoint c;
    c.train_config = cfg;
    c.network = make_network(cfg);
    Rng rng(seed);
    fixtures::randomize_affine(c.network.params, rng);
    // Values whose shortest decimal form is long or awkward.
    c.network.params.position.head.bias[0] = 0.1 + 0.2;
    c.network.params.color.head.bias[1] = 5e-324;
    c.network.params.color.head.bias[2] = -1.7976931348623157e308;
    c.canvas = {320, 180, 1.0, 16};
    return c;
}

std::filesystem::path temp_file(const std::string& name) {
    return std::filesystem::temp_directory_path() / ("vecforge_persist_" + name);
}

std::string parse_error_message(const std::string& svg) {
    try {
        parse_svg_paths(svg);
    } catch (const ParseError& e) {
        return e.what();
    }
    return "";
}

}  // namespace

TEST(SvgExport, MatchesGoldenFill) {
    const auto g = load_golden_scene();
    const auto svg = export_svg(g.scene, {g.width, g.height, false});
    EXPECT_EQ(svg, read_text_file(fixtures::data_path("golden_fill.svg")));
}

TEST(SvgExport, MatchesGoldenSketch) {
    const auto g = load_golden_scene();
    const auto svg = export_svg(as_strokes(g.scene, g.stroke_width), {g.width, g.height, true});
    EXPECT_EQ(svg, read_text_file(fixtures::data_path("golden_sketch.svg")));
    // The sketch flag alone forces strokes.
    Scene widths = g.scene;
    for (auto& s : widths.shapes) s.stroke_width = g.stroke_width;
    EXPECT_EQ(export_svg(widths, {g.width, g.height, true}), svg);
}

TEST(SvgExport, EmptySceneIsJustTheBackground) {
    Scene s;
    s.background = {0, 0, 0};
    const auto svg = export_svg(s, {64, 32, false});
    EXPECT_EQ(svg,
              "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
              "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"64\" height=\"32\" viewBox=\"0 0 64 "
              "32\">\n"
              "<rect x=\"0\" y=\"0\" width=\"64\" height=\"32\" fill=\"#000000\"/>\n"
              "</svg>\n");
    EXPECT_TRUE(parse_svg_paths(svg).scene.shapes.empty());
}

TEST(SvgExport, OneBlobHasFourCubicsAndClose) {
    Scene s;
    s.shapes.push_back({make_blob({0.5, 0.5}, 0.2), {0, 0, 1}});
    const auto svg = export_svg(s, {100, 100, false});
    const auto d0 = svg.find("d=\"") + 3;
    const auto d = svg.substr(d0, svg.find('"', d0) - d0);
    int c = 0, z = 0, m = 0;
    for (char ch : d) {
        c += ch == 'C';
        z += ch == 'Z';
        m += ch == 'M';
    }
    EXPECT_EQ(m, 1);
    EXPECT_EQ(c, 4);
    EXPECT_EQ(z, 1);
    EXPECT_EQ(d.substr(0, 20), "M 70.0000 50.0000 C ");
    EXPECT_EQ(d.back(), 'Z');
}

TEST(SvgExport, ColorsAndNegativeZero) {
    EXPECT_EQ(hex_color({1.0, 0.5, 0.0}), "#ff8000");
    EXPECT_EQ(hex_color({-0.2, 1.4, 0.2}), "#00ff33");
    Scene s;
    Shape sh{make_blob({0.0, 0.5}, 0.1), {0, 0, 0}};
    sh.control_points[6] = {-1e-9, 0.5};
    s.shapes.push_back(sh);
    EXPECT_EQ(export_svg(s, {10, 10, false}).find("-0.0000"), std::string::npos);
}

TEST(SvgExport, Deterministic) {
    Rng a(1), b(1);
    EXPECT_EQ(export_svg(fixtures::random_scene(a, 6), {128, 96, false}),
              export_svg(fixtures::random_scene(b, 6), {128, 96, false}));
}

TEST(SvgParse, RecoversGoldenScene) {
    const auto g = load_golden_scene();
    for (bool sketch : {false, true}) {
        const auto parsed = parse_svg_paths(read_text_file(fixtures::data_path(sketch ? "golden_sketch.svg" : "golden_fill.svg")));
        EXPECT_EQ(parsed.width_px, g.width);
        EXPECT_EQ(parsed.height_px, g.height);
        EXPECT_EQ(hex_color(parsed.scene.background), hex_color(g.scene.background));
        ASSERT_EQ(parsed.scene.shapes.size(), g.scene.shapes.size());
        for (std::size_t i = 0; i < g.scene.shapes.size(); ++i) {
            const auto& got = parsed.scene.shapes[i];
            const auto& want = g.scene.shapes[i];
            EXPECT_EQ(got.kind, sketch ? ShapeKind::OpenStroke : ShapeKind::ClosedFill);
            EXPECT_EQ(hex_color(got.color), hex_color(want.color));
            for (std::size_t k = 0; k < kPointsPerShape; ++k) {
                EXPECT_LE(std::fabs(got.control_points[k].x - want.control_points[k].x) * g.width, 5e-5);
                EXPECT_LE(std::fabs(got.control_points[k].y - want.control_points[k].y) * g.height, 5e-5);
            }
            if (sketch) {
                EXPECT_NEAR(got.stroke_width, g.stroke_width, 5e-5 / std::min(g.width, g.height));
            }
        }
    }
}

TEST(SvgParse, ExportParseExportIsAFixpoint) {
    Rng rng(2);
    for (int t = 0; t < 20; ++t) {
        const int w = 16 + static_cast<int>(rng.below(500)), h = 16 + static_cast<int>(rng.below(500));
        const bool sketch = t % 2 == 1;
        Scene s = fixtures::random_scene(rng, 1 + static_cast<int>(rng.below(8)));
        if (sketch) s = as_strokes(s, rng.uniform(0.002, 0.05));
        const auto first = export_svg(s, {w, h, sketch});
        const auto parsed = parse_svg_paths(first);
        EXPECT_EQ(export_svg(parsed.scene, {parsed.width_px, parsed.height_px, sketch}), first);
        for (std::size_t i = 0; i < s.shapes.size(); ++i)
            for (std::size_t k = 0; k < kPointsPerShape; ++k) {
                EXPECT_LE(std::fabs(parsed.scene.shapes[i].control_points[k].x - s.shapes[i].control_points[k].x) * w,
                          5e-5 + 1e-9);
                EXPECT_LE(std::fabs(parsed.scene.shapes[i].control_points[k].y - s.shapes[i].control_points[k].y) * h,
                          5e-5 + 1e-9);
            }
    }
}

TEST(SvgParse, QuadraticCommandIsRejectedWithLocation) {
    const std::string svg =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"10\" height=\"10\" viewBox=\"0 0 10 10\">"
        "<rect x=\"0\" y=\"0\" width=\"10\" height=\"10\" fill=\"#ffffff\"/>"
        "<path d=\"M 1 1 Q 2 2 3 3 Z\" fill=\"#000000\"/></svg>";
    const auto msg = parse_error_message(svg);
    EXPECT_NE(msg.find("element 1 <path>"), std::string::npos) << msg;
    EXPECT_NE(msg.find("d[6]"), std::string::npos) << msg;
    EXPECT_NE(msg.find("'Q'"), std::string::npos) << msg;
}

TEST(SvgParse, RejectsOutsideTheDialect) {
    const std::string head =
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"10\" height=\"10\" viewBox=\"0 0 10 10\">";
    const std::string rect = "<rect x=\"0\" y=\"0\" width=\"10\" height=\"10\" fill=\"#ffffff\"/>";
    const std::string good_d = "M 1 1 C 2 1 3 1 4 1 C 4 2 4 3 4 4 C 3 4 2 4 1 4 C 1 3 1 2 1 1 Z";
    EXPECT_NO_THROW(parse_svg_paths(head + rect + "<path d=\"" + good_d + "\" fill=\"#123456\"/></svg>"));
    const std::vector<std::string> bad = {
        "<svg/>",
        head + "</svg>",
        head + "<path d=\"" + good_d + "\" fill=\"#123456\"/>" + rect + "</svg>",
        head + rect + "<circle r=\"1\"/></svg>",
        head + rect + "<path d=\"" + good_d + "\" fill=\"red\"/></svg>",
        head + rect + "<path d=\"" + good_d + "\" fill=\"#123456\" opacity=\"0.5\"/></svg>",
        head + rect + "<path d=\"M 1 1 C 2 1 3 1 4 1 C 4 2 4 3 4 4 C 3 4 2 4 1 4 C 1 3 1 2 1 1\" fill=\"#123456\"/></svg>",
        head + rect + "<path d=\"M 1 1 C 2 1 3 1 4 1 C 4 2 4 3 4 4 C 3 4 2 4 1 4 C 1 3 1 2 2 2 Z\" fill=\"#123456\"/></svg>",
        head + rect + "<path d=\"M 1 1 C 2 1 3 1 4 1 C 4 2 4 3 4 4 C 3 4 2 4 1 4 Z\" fill=\"#123456\"/></svg>",
        head + rect + "<path d=\"M 1 1 C 2 1 3 1 4 x C 4 2 4 3 4 4 C 3 4 2 4 1 4 C 1 3 1 2 1 1 Z\" fill=\"#123456\"/></svg>",
        head + rect + "<path d=\"" + good_d + " L 3 3\" fill=\"#123456\"/></svg>",
        "<svg",
    };
    for (const auto& s : bad) EXPECT_THROW(parse_svg_paths(s), ParseError) << s;
}

TEST(Checkpoint, RoundTripIsBitExact) {
    const auto c = random_checkpoint(3);
    const auto path = temp_file("ckpt.json");
    save_checkpoint(c, path.string());
    const auto back = load_checkpoint(path.string());
    std::filesystem::remove(path);
    EXPECT_EQ(back, c);
    EXPECT_EQ(dump_checkpoint(back), dump_checkpoint(c));
    EXPECT_EQ(std::bit_cast<std::uint64_t>(back.network.params.position.head.bias[0]),
              std::bit_cast<std::uint64_t>(0.1 + 0.2));
    EXPECT_EQ(back.network.params.color.head.bias[1], 5e-324);
    const auto cond = conditioning_for(c.network.config, {0, 0.5, 0.5}, {16, 9});
    const auto a = forward(back.network, cond, index_range(5));
    const auto b = forward(c.network, cond, index_range(5));
    EXPECT_EQ(a.points, b.points);
    EXPECT_EQ(a.colors, b.colors);
}

TEST(Checkpoint, TopLevelKeys) {
    const auto j = nlohmann::json::parse(dump_checkpoint(random_checkpoint(4)));
    std::set<std::string> keys;
    for (const auto& [k, _] : j.items()) keys.insert(k);
    EXPECT_EQ(keys, (std::set<std::string>{"canvas", "network", "train_config", "version"}));
    EXPECT_EQ(j.at("version"), kCheckpointVersion);
}

TEST(Checkpoint, VersionAndFormatErrors) {
    auto j = nlohmann::json::parse(dump_checkpoint(random_checkpoint(5)));
    j["version"] = 2;
    EXPECT_THROW(checkpoint_from_json(j), VersionError);
    j.erase("version");
    EXPECT_THROW(checkpoint_from_json(j), FormatError);
    EXPECT_THROW(parse_checkpoint("{"), FormatError);
    EXPECT_THROW(parse_checkpoint("[]"), FormatError);

    auto k = nlohmann::json::parse(dump_checkpoint(random_checkpoint(5)));
    k["network"]["position"]["head"]["bias"].erase(0);
    EXPECT_THROW(checkpoint_from_json(k), FormatError);
    auto u = nlohmann::json::parse(dump_checkpoint(random_checkpoint(5)));
    u["train_config"]["mystery"] = 1;
    EXPECT_THROW(checkpoint_from_json(u), FormatError);
    auto e = nlohmann::json::parse(dump_checkpoint(random_checkpoint(5)));
    e["network"]["encoders"]["background"] = nullptr;
    EXPECT_THROW(checkpoint_from_json(e), FormatError);
    EXPECT_THROW(load_checkpoint("/nonexistent/ckpt.json"), Error);
}

TEST(Checkpoint, AspectStrings) {
    EXPECT_EQ(parse_aspect("16:9"), (AspectRatio{16, 9}));
    EXPECT_EQ(parse_aspect("1:1").to_string(), "1:1");
    for (const char* bad : {"16x9", "0:1", "1:-2", ":3", "2:", "a:b", "1:1:1", "1.5:1"})
        EXPECT_THROW(parse_aspect(bad), FormatError) << bad;
}

TEST(Checkpoint, PartialConfigKeepsDefaults) {
    const auto c = train_config_from_json(nlohmann::json{{"n_shapes", 7}, {"aspect_choices", {"3:2"}}});
    EXPECT_EQ(c.n_shapes, 7);
    EXPECT_EQ(c.aspect_choices, (std::vector<AspectRatio>{{3, 2}}));
    EXPECT_EQ(c.main_steps, TrainConfig{}.main_steps);
    EXPECT_THROW(train_config_from_json(nlohmann::json{{"n_shapes", "many"}}), FormatError);
}

TEST(Targets, RoundTrip) {
    Rng rng(6);
    InitTargets t;
    for (int i = 0; i < 4; ++i) t.push_back({make_blob({rng.uniform(), rng.uniform()}, 0.05), {rng.uniform(), 0.5, 0.25}});
    const auto path = temp_file("targets.json");
    save_targets(t, path.string());
    EXPECT_EQ(load_targets(path.string()), t);
    write_text_file(path.string(), "{\"targets\":[{\"points\":[[0,0]],\"color\":[0,0,0]}]}");
    EXPECT_THROW(load_targets(path.string()), FormatError);
    write_text_file(path.string(), "nope");
    EXPECT_THROW(load_targets(path.string()), FormatError);
    std::filesystem::remove(path);
}
