#pragma once

// JSON persistence for trained networks, training configs and init targets.
//
// Checkpoints are a single JSON object with sorted keys and shortest
// round-trip float formatting, so save -> load reproduces every weight bit for
// bit. See docs/checkpoint.md for the schema.

#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

#include "vecforge/core.hpp"
#include "vecforge/guidance.hpp"
#include "vecforge/init.hpp"
#include "vecforge/network.hpp"
#include "vecforge/training.hpp"

namespace vecforge {

inline constexpr int kCheckpointVersion = 1;

struct VersionError : Error {
    using Error::Error;
};
struct FormatError : Error {
    using Error::Error;
};

struct Checkpoint {
    int version = kCheckpointVersion;
    TrainConfig train_config;
    Network network;
    Canvas canvas;  // default export canvas

    bool operator==(const Checkpoint&) const = default;
};

using json = nlohmann::json;

// ---------------------------------------------------------------------------
// Small helpers

inline json rgb_to_json(Rgb c) { return json::array({c.r, c.g, c.b}); }

inline Rgb rgb_from_json(const json& j) {
    if (!j.is_array() || j.size() != 3) throw FormatError("expected an [r, g, b] array");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

inline json palette_to_json(const std::vector<NamedColor>& p) {
    json a = json::array();
    for (const auto& c : p) a.push_back({{"name", c.name}, {"rgb", rgb_to_json(c.rgb)}});
    return a;
}

inline std::vector<NamedColor> palette_from_json(const json& j) {
    if (!j.is_array()) throw FormatError("palette must be an array");
    std::vector<NamedColor> out;
    for (const auto& e : j) out.push_back({e.at("name").get<std::string>(), rgb_from_json(e.at("rgb"))});
    return out;
}

inline AspectRatio parse_aspect(const std::string& s) {
    const auto colon = s.find(':');
    if (colon == std::string::npos) throw FormatError("aspect ratio must look like W:H, got '" + s + "'");
    try {
        std::size_t u1 = 0, u2 = 0;
        const std::string a = s.substr(0, colon), b = s.substr(colon + 1);
        const int w = std::stoi(a, &u1);
        const int h = std::stoi(b, &u2);
        if (u1 != a.size() || u2 != b.size() || w < 1 || h < 1) throw std::invalid_argument(s);
        return {w, h};
    } catch (const std::exception&) {
        throw FormatError("aspect ratio must look like W:H with positive integers, got '" + s + "'");
    }
}

// ---------------------------------------------------------------------------
// TrainConfig

inline json to_json(const TrainConfig& c) {
    json aspects = json::array();
    for (const auto& a : c.aspect_choices) aspects.push_back(a.to_string());
    return {
        {"n_shapes", c.n_shapes},
        {"pretrain_steps", c.pretrain_steps},
        {"pretrain_lr", c.pretrain_lr},
        {"main_steps", c.main_steps},
        {"lr_peak", c.lr_peak},
        {"lr_final", c.lr_final},
        {"warmup_steps", c.warmup_steps},
        {"clip_norm", c.clip_norm},
        {"dropout", c.dropout},
        {"keep_all_prob", c.keep_all_prob},
        {"trunc_temperature", c.trunc_temperature},
        {"bg_palette", palette_to_json(c.bg_palette)},
        {"bg_random", c.bg_random},
        {"color_names", palette_to_json(c.color_names)},
        {"aspect_choices", aspects},
        {"sketch_mode", c.sketch_mode},
        {"stroke_width", c.stroke_width},
        {"canvas_px", c.canvas_px},
        {"aa_width_px", c.aa_width_px},
        {"flatten_segments", c.flatten_segments},
        {"hidden", c.hidden},
        {"frequencies", c.frequencies},
        {"leaky_slope", c.leaky_slope},
        {"fourier_sigma", c.fourier_sigma},
        {"condition_background", c.condition_background},
        {"condition_aspect", c.condition_aspect},
        {"checkpoint_every", c.checkpoint_every},
        {"seed", c.seed},
    };
}

// Fields absent from j keep the values already in base; unknown keys are rejected.
inline TrainConfig train_config_from_json(const json& j, TrainConfig base = {}) {
    if (!j.is_object()) throw FormatError("config must be a JSON object");
    const json known = to_json(base);
    for (const auto& [k, _] : j.items())
        if (!known.contains(k)) throw FormatError("unknown config key '" + k + "'");
    TrainConfig c = base;
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::remove_reference_t<decltype(field)>>();
        };
        get("n_shapes", c.n_shapes);
        get("pretrain_steps", c.pretrain_steps);
        get("pretrain_lr", c.pretrain_lr);
        get("main_steps", c.main_steps);
        get("lr_peak", c.lr_peak);
        get("lr_final", c.lr_final);
        get("warmup_steps", c.warmup_steps);
        get("clip_norm", c.clip_norm);
        get("dropout", c.dropout);
        get("keep_all_prob", c.keep_all_prob);
        get("trunc_temperature", c.trunc_temperature);
        if (j.contains("bg_palette")) c.bg_palette = palette_from_json(j.at("bg_palette"));
        get("bg_random", c.bg_random);
        if (j.contains("color_names")) c.color_names = palette_from_json(j.at("color_names"));
        if (j.contains("aspect_choices")) {
            c.aspect_choices.clear();
            for (const auto& a : j.at("aspect_choices")) c.aspect_choices.push_back(parse_aspect(a.get<std::string>()));
        }
        get("sketch_mode", c.sketch_mode);
        get("stroke_width", c.stroke_width);
        get("canvas_px", c.canvas_px);
        get("aa_width_px", c.aa_width_px);
        get("flatten_segments", c.flatten_segments);
        get("hidden", c.hidden);
        get("frequencies", c.frequencies);
        get("leaky_slope", c.leaky_slope);
        get("fourier_sigma", c.fourier_sigma);
        get("condition_background", c.condition_background);
        get("condition_aspect", c.condition_aspect);
        get("checkpoint_every", c.checkpoint_every);
        get("seed", c.seed);
    } catch (const json::exception& e) {
        throw FormatError(std::string("config: ") + e.what());
    }
    return c;
}

// ---------------------------------------------------------------------------
// Network

inline json to_json(const FourierEncoder& e) {
    return {{"input_dim", e.input_dim}, {"frequencies", e.frequencies}, {"sigma", e.sigma}, {"B", e.B}};
}

inline FourierEncoder encoder_from_json(const json& j) {
    FourierEncoder e;
    e.input_dim = j.at("input_dim").get<int>();
    e.frequencies = j.at("frequencies").get<int>();
    e.sigma = j.at("sigma").get<double>();
    e.B = j.at("B").get<std::vector<double>>();
    if (e.B.size() != static_cast<std::size_t>(e.input_dim) * e.frequencies)
        throw FormatError("encoder frequency matrix has the wrong size");
    return e;
}

inline json to_json(const Linear& l) { return {{"in", l.in}, {"out", l.out}, {"weight", l.weight}, {"bias", l.bias}}; }

inline Linear linear_from_json(const json& j) {
    Linear l;
    l.in = j.at("in").get<int>();
    l.out = j.at("out").get<int>();
    l.weight = j.at("weight").get<std::vector<double>>();
    l.bias = j.at("bias").get<std::vector<double>>();
    if (l.weight.size() != static_cast<std::size_t>(l.in) * l.out || l.bias.size() != static_cast<std::size_t>(l.out))
        throw FormatError("linear layer has inconsistent shapes");
    return l;
}

inline json to_json(const LayerNorm& n) { return {{"gain", n.gain}, {"shift", n.shift}}; }

inline LayerNorm layernorm_from_json(const json& j) {
    LayerNorm n;
    n.gain = j.at("gain").get<std::vector<double>>();
    n.shift = j.at("shift").get<std::vector<double>>();
    if (n.gain.size() != n.shift.size()) throw FormatError("layernorm has inconsistent shapes");
    return n;
}

inline json to_json(const Branch& b) {
    return {{"fc1", to_json(b.fc1)},     {"norm1", to_json(b.norm1)}, {"fc2", to_json(b.fc2)},
            {"norm2", to_json(b.norm2)}, {"head", to_json(b.head)}};
}

inline Branch branch_from_json(const json& j) {
    Branch b;
    b.fc1 = linear_from_json(j.at("fc1"));
    b.norm1 = layernorm_from_json(j.at("norm1"));
    b.fc2 = linear_from_json(j.at("fc2"));
    b.norm2 = layernorm_from_json(j.at("norm2"));
    b.head = linear_from_json(j.at("head"));
    return b;
}

inline json to_json(const NetworkConfig& c) {
    return {{"n_shapes", c.n_shapes},
            {"hidden", c.hidden},
            {"frequencies", c.frequencies},
            {"leaky_slope", c.leaky_slope},
            {"fourier_sigma", c.fourier_sigma},
            {"condition_background", c.condition_background},
            {"condition_aspect", c.condition_aspect}};
}

inline NetworkConfig network_config_from_json(const json& j) {
    NetworkConfig c;
    c.n_shapes = j.at("n_shapes").get<int>();
    c.hidden = j.at("hidden").get<int>();
    c.frequencies = j.at("frequencies").get<int>();
    c.leaky_slope = j.at("leaky_slope").get<double>();
    c.fourier_sigma = j.at("fourier_sigma").get<double>();
    c.condition_background = j.at("condition_background").get<bool>();
    c.condition_aspect = j.at("condition_aspect").get<bool>();
    return c;
}

inline json to_json(const Network& n) {
    return {
        {"config", to_json(n.config)},
        {"encoders",
         {{"index", to_json(n.encoders.index)},
          {"background", n.encoders.background ? to_json(*n.encoders.background) : json(nullptr)},
          {"aspect", n.encoders.aspect ? to_json(*n.encoders.aspect) : json(nullptr)}}},
        {"position", to_json(n.params.position)},
        {"color", to_json(n.params.color)},
    };
}

inline Network network_from_json(const json& j) {
    Network n;
    n.config = network_config_from_json(j.at("config"));
    const auto& enc = j.at("encoders");
    n.encoders.index = encoder_from_json(enc.at("index"));
    if (!enc.at("background").is_null()) n.encoders.background = encoder_from_json(enc.at("background"));
    if (!enc.at("aspect").is_null()) n.encoders.aspect = encoder_from_json(enc.at("aspect"));
    n.params.position = branch_from_json(j.at("position"));
    n.params.color = branch_from_json(j.at("color"));
    n.params.leaky_slope = n.config.leaky_slope;
    const int in = n.config.input_dim();
    if (n.params.position.fc1.in != in || n.params.color.fc1.in != in)
        throw FormatError("network input width does not match its conditioning config");
    if (n.config.condition_background != n.encoders.background.has_value() ||
        n.config.condition_aspect != n.encoders.aspect.has_value())
        throw FormatError("network encoders do not match its conditioning config");
    if (n.params.position.head.out != kPositionOutputs || n.params.color.head.out != kColorOutputs)
        throw FormatError("network output heads have the wrong width");
    return n;
}

// ---------------------------------------------------------------------------
// Checkpoint

inline json to_json(const Canvas& c) {
    return {{"width_px", c.width_px},
            {"height_px", c.height_px},
            {"aa_width_px", c.aa_width_px},
            {"flatten_segments", c.flatten_segments}};
}

inline json to_json(const Checkpoint& c) {
    return {{"version", c.version},
            {"train_config", to_json(c.train_config)},
            {"network", to_json(c.network)},
            {"canvas", to_json(c.canvas)}};
}

inline std::string dump_checkpoint(const Checkpoint& c) { return to_json(c).dump(1) + "\n"; }

inline Checkpoint checkpoint_from_json(const json& j) {
    if (!j.is_object()) throw FormatError("checkpoint must be a JSON object");
    if (!j.contains("version") || !j["version"].is_number_integer())
        throw FormatError("checkpoint lacks an integer version");
    if (const int v = j["version"].get<int>(); v != kCheckpointVersion)
        throw VersionError("checkpoint version " + std::to_string(v) + " is not supported (expected " +
                           std::to_string(kCheckpointVersion) + ")");
    Checkpoint c;
    try {
        c.train_config = train_config_from_json(j.at("train_config"));
        c.network = network_from_json(j.at("network"));
        const auto& cv = j.at("canvas");
        c.canvas.width_px = cv.at("width_px").get<int>();
        c.canvas.height_px = cv.at("height_px").get<int>();
        c.canvas.aa_width_px = cv.at("aa_width_px").get<double>();
        c.canvas.flatten_segments = cv.at("flatten_segments").get<int>();
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint: ") + e.what());
    }
    return c;
}

inline Checkpoint parse_checkpoint(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw FormatError(std::string("checkpoint is not valid JSON: ") + e.what());
    }
    return checkpoint_from_json(j);
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error("cannot open '" + path + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open '" + path + "' for writing");
    out << text;
    if (!out) throw Error("failed writing '" + path + "'");
}

inline void save_checkpoint(const Checkpoint& c, const std::string& path) { write_text_file(path, dump_checkpoint(c)); }

inline Checkpoint load_checkpoint(const std::string& path) { return parse_checkpoint(read_text_file(path)); }

// ---------------------------------------------------------------------------
// Init targets

inline json to_json(const InitTargets& targets) {
    json arr = json::array();
    for (const auto& t : targets) {
        json pts = json::array();
        for (const auto& p : t.points) pts.push_back(json::array({p.x, p.y}));
        arr.push_back({{"points", pts}, {"color", rgb_to_json(t.color)}});
    }
    return {{"targets", arr}};
}

inline InitTargets targets_from_json(const json& j) {
    InitTargets out;
    try {
        for (const auto& t : j.at("targets")) {
            InitTarget target;
            const auto& pts = t.at("points");
            if (pts.size() != kPointsPerShape) throw FormatError("each target needs 12 points");
            for (std::size_t k = 0; k < kPointsPerShape; ++k)
                target.points[k] = {pts[k].at(0).get<double>(), pts[k].at(1).get<double>()};
            target.color = rgb_from_json(t.at("color"));
            out.push_back(target);
        }
    } catch (const json::exception& e) {
        throw FormatError(std::string("targets: ") + e.what());
    }
    return out;
}

inline void save_targets(const InitTargets& t, const std::string& path) { write_text_file(path, to_json(t).dump(1) + "\n"); }

inline InitTargets load_targets(const std::string& path) {
    try {
        return targets_from_json(json::parse(read_text_file(path)));
    } catch (const json::parse_error& e) {
        throw FormatError(std::string("targets file is not valid JSON: ") + e.what());
    }
}

}  // namespace vecforge
