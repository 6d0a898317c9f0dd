#include <gtest/gtest.h>

#include <filesystem>
#include <unistd.h>
#include <set>
#include <thread>

#include <httplib.h>
#include <json.hpp>

#include "support.hpp"
#include "vecforge/cli.hpp"
#include "vecforge/service.hpp"

using namespace vecforge;

namespace {

Checkpoint service_checkpoint(bool sketch = false) {
    TrainConfig cfg;
    cfg.n_shapes = 6;
    cfg.hidden = 12;
    cfg.frequencies = 6;
    cfg.condition_background = true;
    cfg.condition_aspect = true;
    cfg.sketch_mode = sketch;
    cfg.stroke_width = 0.02;
    cfg.aspect_choices = {{1, 1}, {16, 9}};
    cfg.bg_palette = {{"white", {1, 1, 1}}, {"black", {0, 0, 0}}};
    Checkpoint c;
    c.train_config = cfg;
    c.network = make_network(cfg);
    Rng rng(21);
    fixtures::randomize_affine(c.network.params, rng);
    c.canvas = cfg.canvas_for(cfg.aspect_choices.front());
    return c;
}

int count(const std::string& s, const std::string& needle) {
    int n = 0;
    for (auto p = s.find(needle); p != std::string::npos; p = s.find(needle, p + 1)) ++n;
    return n;
}

class LiveServer {
public:
    explicit LiveServer(Checkpoint c) : server_(std::move(c)) {
        port_ = server_.bind("127.0.0.1", 0);
        thread_ = std::thread([this] { server_.listen_after_bind(); });
        server_.wait_until_ready();
    }
    ~LiveServer() {
        server_.stop();
        thread_.join();
    }
    int port() const { return port_; }

private:
    RenderServer server_;
    std::thread thread_;
    int port_ = -1;
};

}  // namespace

TEST(Service, FullRenderMatchesCliRender) {
    const auto ckpt = service_checkpoint();
    const auto dir = std::filesystem::temp_directory_path() / ("vecforge_service_" + std::to_string(::getpid()));
    std::filesystem::create_directories(dir);
    const auto ck = (dir / "ckpt.json").string(), out = (dir / "cli.svg").string();
    save_checkpoint(ckpt, ck);
    ASSERT_EQ(cli::run({"render", "--ckpt", ck, "--tr", "6", "--bg", "000000", "--aspect", "16:9", "--out", out}), 0);
    const auto r = handle_render(ckpt, "6", "000000", "16:9");
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(r.content_type, "image/svg+xml");
    EXPECT_EQ(r.body, read_text_file(out));
    EXPECT_EQ(count(r.body, "<path "), 6);
    EXPECT_NE(r.body.find("width=\"128\" height=\"72\""), std::string::npos);
    std::filesystem::remove_all(dir);
}

TEST(Service, TruncationControlsPathCount) {
    const auto ckpt = service_checkpoint();
    for (int k = 1; k <= 6; ++k) EXPECT_EQ(count(handle_render(ckpt, std::to_string(k), std::nullopt, std::nullopt).body, "<path "), k);
    EXPECT_EQ(count(handle_render(ckpt, std::nullopt, std::nullopt, std::nullopt).body, "<path "), 6);
    // Truncation keeps a prefix: the first k paths are unchanged by rendering more.
    const auto two = handle_render(ckpt, "2", "ffffff", "1:1").body;
    const auto five = handle_render(ckpt, "5", "ffffff", "1:1").body;
    EXPECT_EQ(five.substr(0, two.rfind("</svg>")), two.substr(0, two.rfind("</svg>")));
}

TEST(Service, BadQueriesAre400) {
    const auto ckpt = service_checkpoint();
    const std::vector<std::array<std::optional<std::string>, 3>> bad = {
        {{"0", std::nullopt, std::nullopt}},  {{"7", std::nullopt, std::nullopt}},
        {{"-1", std::nullopt, std::nullopt}}, {{"2x", std::nullopt, std::nullopt}},
        {{"", std::nullopt, std::nullopt}},   {{std::nullopt, "zzzzzz", std::nullopt}},
        {{std::nullopt, "fff", std::nullopt}}, {{std::nullopt, std::nullopt, "16x9"}},
        {{std::nullopt, std::nullopt, "0:1"}},
    };
    for (const auto& q : bad) {
        const auto r = handle_render(ckpt, q[0], q[1], q[2]);
        EXPECT_EQ(r.status, 400);
        EXPECT_EQ(r.content_type, "application/json");
        EXPECT_TRUE(nlohmann::json::parse(r.body).contains("error")) << r.body;
    }
    EXPECT_EQ(handle_render(ckpt, "3", "#A0b0C0", "4:3").status, 200);
}

TEST(Service, IdenticalQueriesGiveIdenticalBytes) {
    const auto ckpt = service_checkpoint(true);
    const auto a = handle_render(ckpt, "4", "123456", "16:9").body;
    EXPECT_EQ(handle_render(ckpt, "4", "123456", "16:9").body, a);
    EXPECT_EQ(handle_render(service_checkpoint(true), "4", "123456", "16:9").body, a);
    EXPECT_NE(a.find("stroke-linecap=\"round\""), std::string::npos);
    EXPECT_NE(handle_render(ckpt, "4", "654321", "16:9").body, a);
}

TEST(Service, DefaultsComeFromTheCheckpoint) {
    const auto ckpt = service_checkpoint();
    const auto q = parse_render_query(ckpt, std::nullopt, std::nullopt, std::nullopt);
    EXPECT_EQ(q.tr, 6);
    EXPECT_EQ(q.bg, (Rgb{1, 1, 1}));
    EXPECT_EQ(q.aspect, (AspectRatio{1, 1}));
    EXPECT_EQ(parse_hex_rgb("#ff8000"), (Rgb{1.0, 128 / 255.0, 0.0}));
    EXPECT_FALSE(parse_hex_rgb("ff80"));
}

TEST(Service, MetaDescribesTheCheckpoint) {
    const auto m = nlohmann::json::parse(handle_meta(service_checkpoint()).body);
    std::set<std::string> keys;
    for (const auto& [k, _] : m.items()) keys.insert(k);
    EXPECT_EQ(keys, (std::set<std::string>{"aspect_choices", "conditioning", "n_shapes", "trained_palette", "version"}));
    EXPECT_EQ(m["n_shapes"], 6);
    EXPECT_EQ(m["conditioning"]["background"], true);
    EXPECT_EQ(m["conditioning"]["aspect"], true);
    EXPECT_EQ(m["trained_palette"][1]["hex"], "#000000");
    EXPECT_EQ(m["aspect_choices"], (nlohmann::json{"1:1", "16:9"}));
}

TEST(Service, HundredConcurrentRequests) {
    const auto ckpt = service_checkpoint();
    LiveServer live(ckpt);
    ASSERT_GT(live.port(), 0);
    constexpr int kRequests = 100;
    std::vector<std::string> bodies(kRequests), expected(kRequests);
    std::vector<int> statuses(kRequests, 0);
    std::vector<std::string> paths(kRequests);
    for (int i = 0; i < kRequests; ++i) {
        const int tr = 1 + i % 6;
        const std::string bg = i % 2 ? "000000" : "ffffff";
        const std::string aspect = i % 3 ? "1:1" : "16:9";
        paths[i] = "/render?tr=" + std::to_string(tr) + "&bg=" + bg + "&aspect=" + aspect;
        expected[i] = handle_render(ckpt, std::to_string(tr), bg, aspect).body;
    }
    std::vector<std::thread> clients;
    for (int i = 0; i < kRequests; ++i)
        clients.emplace_back([&, i] {
            httplib::Client c("127.0.0.1", live.port());
            c.set_read_timeout(std::chrono::seconds(30));
            if (auto res = c.Get(paths[i])) {
                statuses[i] = res->status;
                bodies[i] = res->body;
            } else {
                bodies[i] = httplib::to_string(res.error());
            }
        });
    for (auto& t : clients) t.join();
    for (int i = 0; i < kRequests; ++i) {
        EXPECT_EQ(statuses[i], 200) << paths[i];
        EXPECT_EQ(bodies[i], expected[i]) << paths[i];
    }
}

TEST(Service, HttpErrorsAndMeta) {
    LiveServer live(service_checkpoint());
    httplib::Client c("127.0.0.1", live.port());
    auto bad = c.Get("/render?tr=0");
    ASSERT_TRUE(bad);
    EXPECT_EQ(bad->status, 400);
    auto meta = c.Get("/meta");
    ASSERT_TRUE(meta);
    EXPECT_EQ(meta->status, 200);
    EXPECT_EQ(meta->get_header_value("Access-Control-Allow-Origin"), "*");
    EXPECT_EQ(nlohmann::json::parse(meta->body)["n_shapes"], 6);
    auto svg = c.Get("/render?tr=2");
    ASSERT_TRUE(svg);
    EXPECT_EQ(svg->get_header_value("Content-Type"), "image/svg+xml");
    auto missing = c.Get("/nothing");
    ASSERT_TRUE(missing);
    EXPECT_EQ(missing->status, 404);
}
