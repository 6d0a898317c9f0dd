#pragma once

// vecforge command line:
//
//   init   --saliency F --colors F --n 16 --out targets.json
//   train  --targets F --prompt S --guidance {recon:target.png | sds:URL | mock} [--config F] --out ckpt.json
//   render --ckpt F --tr K --bg RRGGBB --aspect W:H --out out.svg
//   sweep  --ckpt F --tr 1,4,8,12,16 --out-dir D
//   serve  --ckpt F --port P
//
// Exit status: 0 success, 2 bad flags, 1 runtime failure.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "vecforge/checkpoint.hpp"
#include "vecforge/guidance.hpp"
#include "vecforge/init.hpp"
#include "vecforge/png_io.hpp"
#include "vecforge/remote_guidance.hpp"
#include "vecforge/service.hpp"
#include "vecforge/training.hpp"

namespace vecforge::cli {

struct UsageError : Error {
    using Error::Error;
};

enum class LogLevel { Error = 0, Info = 1, Debug = 2 };

// VECFORGE_LOG = error | info | debug; unset or unknown means info.
inline LogLevel log_level() {
    const char* v = std::getenv("VECFORGE_LOG");
    if (!v) return LogLevel::Info;
    const std::string s(v);
    if (s == "error") return LogLevel::Error;
    if (s == "debug") return LogLevel::Debug;
    return LogLevel::Info;
}

inline void log(LogLevel level, const std::string& msg) {
    if (static_cast<int>(level) <= static_cast<int>(log_level())) std::cerr << "vecforge: " << msg << "\n";
}

inline std::unique_ptr<Guidance> make_guidance(const std::string& choice) {
    if (choice == "mock") return std::make_unique<ZeroGuidance>();
    if (choice.rfind("recon:", 0) == 0) {
        const std::string path = choice.substr(6);
        if (path.empty()) throw UsageError("--guidance recon: needs a target image path");
        return std::make_unique<ReconstructionGuidance>(read_png_rgb(path));
    }
    if (choice.rfind("sds:", 0) == 0) {
        const std::string url = choice.substr(4);
        if (url.empty()) throw UsageError("--guidance sds: needs a provider URL");
        return std::make_unique<RemoteSdsGuidance>(url);
    }
    throw UsageError("--guidance must be recon:FILE, sds:URL or mock, got '" + choice + "'");
}

inline std::string checkpoint_path_for_step(const std::string& out, int step) {
    std::filesystem::path p(out);
    char buf[32];
    std::snprintf(buf, sizeof buf, "-step%06d", step);
    return (p.parent_path() / (p.stem().string() + buf + p.extension().string())).string();
}

struct InitArgs {
    std::string saliency, colors, out;
    int n = 16;
    double radius = 0.05;
};

inline void cmd_init(const InitArgs& a, std::uint64_t seed) {
    const SaliencyMap map = read_png_saliency(a.saliency);
    const RasterImage colors = read_png_rgb(a.colors);
    Rng rng(seed);
    const auto targets = build_init_scene(map, colors, a.n, a.radius, rng);
    save_targets(targets, a.out);
    log(LogLevel::Info, "wrote " + std::to_string(targets.size()) + " init targets to " + a.out);
}

struct TrainArgs {
    std::string targets, prompt, guidance, config, out, history;
    std::optional<int> steps, pretrain_steps, checkpoint_every;
    std::optional<bool> dropout, sketch;
};

inline TrainConfig resolve_train_config(const TrainArgs& a, std::uint64_t seed, std::size_t target_count) {
    TrainConfig cfg;
    bool config_sets_n = false;
    if (!a.config.empty()) {
        const auto j = nlohmann::json::parse(read_text_file(a.config));
        try {
            cfg = train_config_from_json(j);
        } catch (const Error& e) {
            throw UsageError(std::string("--config: ") + e.what());
        }
        config_sets_n = j.contains("n_shapes");
    }
    cfg.seed = seed;
    if (a.steps) cfg.main_steps = *a.steps;
    if (a.pretrain_steps) cfg.pretrain_steps = *a.pretrain_steps;
    if (a.checkpoint_every) cfg.checkpoint_every = *a.checkpoint_every;
    if (a.dropout) cfg.dropout = *a.dropout;
    if (a.sketch) cfg.sketch_mode = *a.sketch;
    if (cfg.warmup_steps >= cfg.main_steps) {
        cfg.warmup_steps = cfg.main_steps / 10;
        log(LogLevel::Info, "warmup_steps >= main_steps; using " + std::to_string(cfg.warmup_steps));
    }
    const int n = static_cast<int>(target_count);
    if (config_sets_n && cfg.n_shapes != n)
        throw UsageError("config n_shapes = " + std::to_string(cfg.n_shapes) + " but targets file has " +
                         std::to_string(n));
    cfg.n_shapes = n;
    try {
        cfg.validate();
    } catch (const Error& e) {
        throw UsageError(e.what());
    }
    return cfg;
}

inline Checkpoint make_checkpoint(const Network& net, const TrainConfig& cfg) {
    Checkpoint c;
    c.network = net;
    c.train_config = cfg;
    c.canvas = cfg.canvas_for(cfg.aspect_choices.front());
    return c;
}

inline void cmd_train(const TrainArgs& a, std::uint64_t seed) {
    const InitTargets targets = load_targets(a.targets);
    if (targets.empty()) throw Error("targets file has no targets");
    const TrainConfig cfg = resolve_train_config(a, seed, targets.size());
    auto guidance = make_guidance(a.guidance);

    Network net = make_network(cfg);
    const auto pre = pretrain(net, targets, cfg);
    log(LogLevel::Info, "pretrain: init loss " + std::to_string(pre.initial_loss) + " -> " + std::to_string(pre.final_loss));

    const StepCallback on_step = [&](int step, const Network& n) {
        const int done = step + 1;
        if (cfg.checkpoint_every > 0 && done % cfg.checkpoint_every == 0 && done < cfg.main_steps)
            save_checkpoint(make_checkpoint(n, cfg), checkpoint_path_for_step(a.out, done));
    };
    const TrainHistory history = train(net, *guidance, cfg, a.prompt, on_step);
    const bool every_step = log_level() == LogLevel::Debug;
    for (const auto& r : history) {
        if (!every_step && r.step % 500 != 0 && r.step != cfg.main_steps - 1) continue;
        std::string line = "step " + std::to_string(r.step) + " lr " + std::to_string(r.lr) + " tr " +
                           std::to_string(r.tr) + " bg " + r.bg_name + " |g| " + std::to_string(r.grad_norm_pre);
        if (r.loss) line += " loss " + std::to_string(*r.loss);
        log(LogLevel::Info, line);
    }
    save_checkpoint(make_checkpoint(net, cfg), a.out);
    if (!a.history.empty()) {
        std::ofstream os(a.history);
        if (!os) throw Error("cannot write " + a.history);
        write_history_csv(os, history);
    }
    log(LogLevel::Info, "wrote checkpoint " + a.out);
}

struct RenderArgs {
    std::string ckpt, out, png;
    std::optional<int> tr;
    std::optional<std::string> bg, aspect;
};

inline RenderQuery query_from_flags(const Checkpoint& ckpt, const std::optional<int>& tr,
                                    const std::optional<std::string>& bg, const std::optional<std::string>& aspect) {
    try {
        return parse_render_query(ckpt, tr ? std::optional<std::string>(std::to_string(*tr)) : std::nullopt, bg, aspect);
    } catch (const BadRequest& e) {
        throw UsageError(e.what());
    }
}

inline void cmd_render(const RenderArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    const RenderQuery q = query_from_flags(ckpt, a.tr, a.bg, a.aspect);
    write_text_file(a.out, render_query_svg(ckpt, q));
    if (!a.png.empty()) write_png_rgb(render(query_scene(ckpt, q), export_canvas(ckpt, q.aspect)), a.png);
    log(LogLevel::Info, "wrote " + a.out);
}

struct SweepArgs {
    std::string ckpt, out_dir;
    std::vector<int> tr;
    std::optional<std::string> bg, aspect;
};

inline void cmd_sweep(const SweepArgs& a) {
    const Checkpoint ckpt = load_checkpoint(a.ckpt);
    std::vector<RenderQuery> queries;
    for (int k : a.tr) queries.push_back(query_from_flags(ckpt, k, a.bg, a.aspect));
    std::filesystem::create_directories(a.out_dir);
    for (const auto& q : queries) {
        const auto path = std::filesystem::path(a.out_dir) / ("out-tr" + std::to_string(q.tr) + ".svg");
        write_text_file(path.string(), render_query_svg(ckpt, q));
        log(LogLevel::Debug, "wrote " + path.string());
    }
    log(LogLevel::Info, "wrote " + std::to_string(queries.size()) + " files to " + a.out_dir);
}

struct ServeArgs {
    std::string ckpt, host = "127.0.0.1";
    int port = 8080;
};

inline void cmd_serve(const ServeArgs& a) {
    RenderServer server(load_checkpoint(a.ckpt));
    const int port = server.bind(a.host, a.port);
    if (port < 0) throw Error("cannot bind " + a.host + ":" + std::to_string(a.port));
    log(LogLevel::Info, "serving on http://" + a.host + ":" + std::to_string(port));
    if (!server.listen_after_bind()) throw Error("server stopped unexpectedly");
}

inline int run(int argc, const char* const* argv) {
    CLI::App app{"Train, render and serve neural vector graphics"};
    app.name("vecforge");
    app.require_subcommand(1);
    app.fallthrough();
    std::uint64_t seed = 0;
    app.add_option("--seed", seed, "random seed")->capture_default_str();

    InitArgs ia;
    auto* init = app.add_subcommand("init", "sample blob initialization targets from a saliency map");
    init->add_option("--saliency", ia.saliency, "grayscale saliency PNG")->required()->check(CLI::ExistingFile);
    init->add_option("--colors", ia.colors, "RGB color reference PNG")->required()->check(CLI::ExistingFile);
    init->add_option("--n", ia.n, "number of shapes")->capture_default_str()->check(CLI::PositiveNumber);
    init->add_option("--radius", ia.radius, "blob radius, normalized")->capture_default_str()->check(CLI::PositiveNumber);
    init->add_option("--out", ia.out, "output targets JSON")->required();

    TrainArgs ta;
    auto* tr = app.add_subcommand("train", "pretrain to targets, then run the guided main loop");
    tr->add_option("--targets", ta.targets, "init targets JSON")->required()->check(CLI::ExistingFile);
    tr->add_option("--prompt", ta.prompt, "object description for the prompt")->required();
    tr->add_option("--guidance", ta.guidance, "recon:target.png | sds:URL | mock")->required();
    tr->add_option("--config", ta.config, "TrainConfig JSON")->check(CLI::ExistingFile);
    tr->add_option("--out", ta.out, "output checkpoint JSON")->required();
    tr->add_option("--history", ta.history, "per-step CSV log");
    tr->add_option("--steps", ta.steps, "main loop steps")->check(CLI::PositiveNumber);
    tr->add_option("--pretrain-steps", ta.pretrain_steps, "pretrain steps")->check(CLI::NonNegativeNumber);
    tr->add_option("--checkpoint-every", ta.checkpoint_every, "periodic checkpoint interval")->check(CLI::NonNegativeNumber);
    tr->add_option("--dropout", ta.dropout, "nested dropout on/off");
    tr->add_option("--sketch", ta.sketch, "open strokes instead of filled shapes");

    RenderArgs ra;
    auto* rd = app.add_subcommand("render", "export one SVG from a checkpoint");
    rd->add_option("--ckpt", ra.ckpt, "checkpoint JSON")->required()->check(CLI::ExistingFile);
    rd->add_option("--tr", ra.tr, "number of shapes to render")->check(CLI::PositiveNumber);
    rd->add_option("--bg", ra.bg, "background RRGGBB");
    rd->add_option("--aspect", ra.aspect, "aspect ratio W:H");
    rd->add_option("--out", ra.out, "output SVG")->required();
    rd->add_option("--png", ra.png, "also write the raster render");

    SweepArgs sa;
    auto* sw = app.add_subcommand("sweep", "export one SVG per truncation level");
    sw->add_option("--ckpt", sa.ckpt, "checkpoint JSON")->required()->check(CLI::ExistingFile);
    sw->add_option("--tr", sa.tr, "comma-separated truncation levels")
        ->required()
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    sw->add_option("--bg", sa.bg, "background RRGGBB");
    sw->add_option("--aspect", sa.aspect, "aspect ratio W:H");
    sw->add_option("--out-dir", sa.out_dir, "output directory")->required();

    ServeArgs va;
    auto* sv = app.add_subcommand("serve", "serve /render and /meta over HTTP");
    sv->add_option("--ckpt", va.ckpt, "checkpoint JSON")->required()->check(CLI::ExistingFile);
    sv->add_option("--port", va.port, "TCP port")->capture_default_str()->check(CLI::Range(0, 65535));
    sv->add_option("--host", va.host, "bind address")->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (*init) cmd_init(ia, seed);
        else if (*tr) cmd_train(ta, seed);
        else if (*rd) cmd_render(ra);
        else if (*sw) cmd_sweep(sa);
        else if (*sv) cmd_serve(va);
    } catch (const UsageError& e) {
        std::cerr << "vecforge: usage error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "vecforge: error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}

inline int run(const std::vector<std::string>& args) {
    std::vector<const char*> argv;
    argv.reserve(args.size() + 1);
    argv.push_back("vecforge");
    for (const auto& a : args) argv.push_back(a.c_str());
    return run(static_cast<int>(argv.size()), argv.data());
}

}  // namespace vecforge::cli
