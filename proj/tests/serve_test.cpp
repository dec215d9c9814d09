#include <chrono>
#include <filesystem>
#include <thread>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <gtest/gtest.h>
#include <json.hpp>

#include "paysim/error.hpp"
#include "paysim/media.hpp"
#include "paysim/server.hpp"

using namespace paysim;
namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;
using namespace std::chrono_literals;

namespace {

const std::filesystem::path kScenarios{PAYSIM_SCENARIO_DIR};

class Controller {
public:
    explicit Controller(std::uint16_t port) : ws_(io_) {
        tcp::resolver resolver(io_);
        asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
        ws_.handshake("127.0.0.1", "/");
    }

    /// Reads until a text reply arrives, reassembling video on the way.
    nlohmann::json request(const nlohmann::json& msg) {
        ws_.text(true);
        ws_.write(asio::buffer(msg.dump()));
        for (;;) {
            if (auto text = read_one()) return nlohmann::json::parse(*text);
        }
    }

    /// Reads one message; returns its text for text messages and feeds binary
    /// packets into the reassembler.
    std::optional<std::string> read_one() {
        beast::flat_buffer buffer;
        ws_.read(buffer);
        const std::string data = beast::buffers_to_string(buffer.data());
        if (ws_.got_text()) return data;
        const Bytes wire(data.begin(), data.end());
        if (auto frame = receiver_.push(decode_packet(wire))) frames.push_back(std::move(*frame));
        return std::nullopt;
    }

    void close() { ws_.close(websocket::close_code::normal); }

    std::vector<Frame> frames;

private:
    asio::io_context io_;
    websocket::stream<tcp::socket> ws_;
    Reassembler receiver_;
};

ServeOptions fast_options() {
    ServeOptions opts;
    opts.port = 0;
    opts.time_scale = 4.0;
    return opts;
}

}  // namespace

TEST(Serve, ControllerReceivesReassemblableStream) {
    LiveServer server(load_scenario(kScenarios / "nominal.json"), fast_options());
    server.start();
    ASSERT_NE(server.port(), 0);
    Controller ctl(server.port());

    const auto deadline = std::chrono::steady_clock::now() + 20s;
    while (ctl.frames.size() < 12 && std::chrono::steady_clock::now() < deadline) ctl.read_one();
    ASSERT_GE(ctl.frames.size(), 12u);
    for (const auto& f : ctl.frames) {
        const auto card = read_test_card(f.payload);
        ASSERT_TRUE(card);
        EXPECT_EQ(card->frame_id, f.frame_id);
        EXPECT_EQ(card->source, VideoSource::PiDesktop);
        EXPECT_EQ(f.payload.size(), f.frame_id % 2 == 0 ? 8333u : 4167u);
    }

    const auto sw = ctl.request({{"type", "switch"}, {"source", "RGB_MAIN"}});
    EXPECT_EQ(sw["ok"], true);
    EXPECT_EQ(sw["source"], "RGB_MAIN");
    bool saw_rgb = false;
    while (!saw_rgb && std::chrono::steady_clock::now() < deadline) {
        ctl.read_one();
        if (!ctl.frames.empty()) saw_rgb = read_test_card(ctl.frames.back().payload)->source == VideoSource::RgbMain;
    }
    EXPECT_TRUE(saw_rgb);

    const auto click = ctl.request({{"type", "click"}, {"u", 0.5}, {"v", 0.5}});
    EXPECT_EQ(click["ok"], true);
    EXPECT_EQ(click["x"], 320);
    EXPECT_EQ(click["y"], 240);

    bool landed = false;
    while (!landed && std::chrono::steady_clock::now() < deadline) {
        ctl.read_one();
        for (const auto& p : server.snapshot().clicks) landed = landed || p == PixelPoint{320, 240};
    }
    EXPECT_TRUE(landed);
    EXPECT_EQ(server.snapshot().source, VideoSource::RgbMain);
    EXPECT_EQ(server.snapshot().state, "STREAMING");

    const auto bad = ctl.request({{"type", "click"}, {"u", 3.0}, {"v", 0.5}});
    EXPECT_EQ(bad["ok"], false);
    EXPECT_NE(bad["error"].get<std::string>().find("OutOfBounds"), std::string::npos);
    const auto unknown = ctl.request({{"type", "zoom"}});
    EXPECT_EQ(unknown["ok"], false);

    ctl.close();
    server.stop();
}

TEST(Serve, PortInUseIsReported) {
    LiveServer first(load_scenario(kScenarios / "nominal.json"), fast_options());
    ServeOptions opts = fast_options();
    opts.port = first.port();
    try {
        LiveServer second(load_scenario(kScenarios / "nominal.json"), opts);
        FAIL() << "second server bound the same port";
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::PortInUse);
    }
}

TEST(Serve, StopWithoutClientsReturns) {
    LiveServer server(load_scenario(kScenarios / "cold-boot.json"), fast_options());
    server.start();
    std::this_thread::sleep_for(50ms);
    server.stop();
    server.stop();
    SUCCEED();
}
