#pragma once

// Payload-side application bound to the E-port: UART control plus two USB
// bulk pipes (RGB on pipe 0, stereo on pipe 1).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "paysim/channel.hpp"
#include "paysim/control_protocol.hpp"
#include "paysim/drone.hpp"
#include "paysim/event_log.hpp"

namespace paysim {

struct TopicPlan {
    Topic topic = Topic::Pose;
    double frequency_hz = 10.0;
};

struct EportConfig {
    std::string serial_device = "onboard-serial";
    std::string high_bw_device = "usb-bulk";
    GadgetDescriptor descriptor{0x1D6B, 0x0104, 2};
    HighBandwidth high_bw = HighBandwidth::Bulk;
    std::vector<TopicPlan> topic_plan;
    std::vector<CameraSource> video_plan;
    LinkProfile serial_link{921600.0, 1.0, 0.0, 21};
};

struct FeedCounters {
    std::uint64_t frames_received = 0;
    std::uint64_t frames_dropped = 0;
    std::uint64_t duplicates = 0;
    std::optional<std::uint64_t> last_frame_id;
    SimTime last_timestamp;

    bool operator==(const FeedCounters&) const = default;
};

struct FeedHealth {
    FeedCounters rgb;
    FeedCounters stereo;
    /// Frames whose embedded source did not match the pipe they arrived on.
    std::uint64_t misrouted = 0;

    const FeedCounters& feed(CameraSource s) const { return s == CameraSource::RgbMain ? rgb : stereo; }
    FeedCounters& feed(CameraSource s) { return s == CameraSource::RgbMain ? rgb : stereo; }
    bool operator==(const FeedHealth&) const = default;
};

/// Request/reply over a pair of serial channels. Lost messages are retried
/// up to three times with the same sequence number.
class ControlClient {
public:
    ControlClient(Drone& drone, SessionId session, const std::string& device, const LinkProfile& link);

    Bytes call(control::MessageType type, ByteView payload);

    /// Round trip of the most recent successful call.
    double last_round_trip_ms() const { return last_rtt_ms_; }
    std::uint64_t retries() const { return retries_; }

private:
    Drone* drone_;
    SessionId session_;
    SerialChannel uplink_;
    SerialChannel downlink_;
    double last_rtt_ms_ = 0.0;
    std::uint64_t retries_ = 0;
};

class EportApp {
public:
    /// Negotiates the E-port, activates both bulk pipes and applies the topic
    /// and video plans. Throws NegotiationFailed or BulkProvisionFailed.
    static EportApp start(const EportConfig& config, Drone& drone, EventLog* log = nullptr);

    EportApp(EportApp&&) noexcept = default;
    EportApp& operator=(EportApp&&) noexcept = default;

    /// Drains the feeds up to `until`. Throws PipeFaulted if any pipe faulted;
    /// counters then stay as they were after the last successful poll.
    const FeedHealth& poll_feeds(SimTime until);
    /// Ends the video plan now, drains up to `until` or the last frame still
    /// in flight, whichever is later, and counts every frame that never
    /// arrived as dropped.
    const FeedHealth& close_feeds(SimTime until);

    std::vector<TelemetrySample> poll_telemetry(SimTime until);
    SubscriptionId subscribe(Topic topic, double frequency_hz);

    DroneState command_velocity(const VelocityCommand& cmd, double duration_s);
    GimbalAttitude command_gimbal(const GimbalAttitude& attitude);

    /// Releases the session and negotiates again with fresh pipes. A FAULTED
    /// pipe is only recoverable this way.
    void restart();
    void stop();

    SessionId session() const { return session_; }
    bool running() const { return running_; }
    const FeedHealth& health() const { return health_; }
    const EportConfig& config() const { return config_; }
    std::span<BulkPipe> pipes() { return drone_->bulk_pipes(session_); }
    ControlClient& control() { return *control_; }

private:
    EportApp(const EportConfig& config, Drone& drone, EventLog* log);
    void bring_up();
    void ingest(std::optional<CameraSource> expected, const Delivery& d);
    void log(std::string_view event, const nlohmann::ordered_json& fields = nlohmann::ordered_json::object());

    EportConfig config_;
    Drone* drone_;
    EventLog* log_;
    SessionId session_{};
    std::optional<ControlClient> control_;
    std::vector<SubscriptionId> subscriptions_;
    FeedHealth health_;
    bool running_ = false;
};

}  // namespace paysim
