#pragma once

// Live controller session over WebSocket. Downstream messages are binary
// VideoPacket frames exactly as they reach the controller; upstream messages
// are JSON text:
//
//   {"type": "click", "u": 0.5, "v": 0.5}
//       -> {"type": "click", "ok": true, "x": 320, "y": 240}
//   {"type": "switch", "source": "RGB_MAIN"}
//       -> {"type": "switch", "ok": true, "source": "RGB_MAIN"}
//
// Rejected requests answer with "ok": false and an "error" string.

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "paysim/media.hpp"
#include "paysim/scenario.hpp"
#include "paysim/skyport_app.hpp"

namespace paysim {

struct ServeOptions {
    std::string bind_address = "127.0.0.1";
    /// 0 picks a free port.
    std::uint16_t port = 8765;
    /// Sim-seconds per wall-second.
    double time_scale = 1.0;
};

struct LiveSnapshot {
    double sim_ms = 0.0;
    std::uint64_t packets_sent = 0;
    std::uint64_t frames_captured = 0;
    std::size_t clients = 0;
    VideoSource source = VideoSource::PiDesktop;
    std::vector<PixelPoint> clicks;
    std::string state;
};

class LiveServer {
public:
    /// Binds immediately; throws PortInUse if the port is taken.
    LiveServer(Scenario scenario, ServeOptions options);
    ~LiveServer();
    LiveServer(const LiveServer&) = delete;
    LiveServer& operator=(const LiveServer&) = delete;

    std::uint16_t port() const;
    /// Serves on the calling thread until stop().
    void run();
    /// Serves on a background thread.
    void start();
    /// Safe from any thread; joins the background thread if there is one.
    void stop();
    LiveSnapshot snapshot() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace paysim
