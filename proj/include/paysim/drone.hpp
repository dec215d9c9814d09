#pragma once

// Mock drone with two payload ports. Every request handler consults the
// per-port capability table before touching state or emitting data.

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paysim/channel.hpp"
#include "paysim/media.hpp"
#include "paysim/sim_time.hpp"

namespace paysim {

enum class PortKind : std::uint8_t { Eport, Skyport };

enum class Capability : std::uint8_t {
    PowerTelemetry,
    FlightPayloadControl,
    SensorAccess,
    CameraFeeds,
    StreamToController,
};

inline constexpr std::array<PortKind, 2> kAllPorts{PortKind::Eport, PortKind::Skyport};
inline constexpr std::array<Capability, 5> kAllCapabilities{
    Capability::PowerTelemetry, Capability::FlightPayloadControl, Capability::SensorAccess,
    Capability::CameraFeeds, Capability::StreamToController};

/// Per-port functionality of the payload SDK.
///
///              power/telem  control  sensors  camera feeds  stream to controller
///   E-port          y          y        y          y                n
///   SkyPort V2      y          n        y          n                y
class CapabilityMatrix {
public:
    static constexpr bool allows(PortKind port, Capability cap) noexcept {
        return kTable[static_cast<std::size_t>(port)][static_cast<std::size_t>(cap)];
    }

private:
    static constexpr bool kTable[2][5] = {
        {true, true, true, true, false},
        {true, false, true, false, true},
    };
};

constexpr bool check_capability(PortKind port, Capability cap) noexcept {
    return CapabilityMatrix::allows(port, cap);
}

/// High-bandwidth transport a session negotiated alongside its UART.
enum class HighBandwidth : std::uint8_t { Bulk, Network };

enum class Topic : std::uint8_t { Pose, Gps, AltitudeAgl, ObstacleDistance, GimbalAttitude };

enum class CameraSource : std::uint8_t { RgbMain, StereoDown };

std::string_view to_string(PortKind port) noexcept;
std::string_view to_string(Capability cap) noexcept;
std::string_view to_string(HighBandwidth hb) noexcept;
std::string_view to_string(Topic topic) noexcept;
std::string_view to_string(CameraSource source) noexcept;
std::optional<Topic> parse_topic(std::string_view name) noexcept;
std::optional<CameraSource> parse_camera_source(std::string_view name) noexcept;
std::optional<HighBandwidth> parse_high_bandwidth(std::string_view name) noexcept;

constexpr VideoSource video_source_of(CameraSource s) noexcept {
    return s == CameraSource::RgbMain ? VideoSource::RgbMain : VideoSource::StereoDown;
}

/// Number of values per sample: POSE 6 (x y z roll pitch yaw), GPS 3
/// (lat deg, lon deg, alt m), ALTITUDE_AGL 1, OBSTACLE_DISTANCE 1,
/// GIMBAL_ATTITUDE 3 (pitch roll yaw).
std::size_t topic_arity(Topic topic) noexcept;

struct Vec3 {
    double x = 0.0, y = 0.0, z = 0.0;
    bool operator==(const Vec3&) const = default;
};

struct GimbalAttitude {
    double pitch = 0.0, roll = 0.0, yaw = 0.0;
    bool operator==(const GimbalAttitude&) const = default;
};

inline constexpr double kGimbalPitchMin = -1.5707963267948966;  // -pi/2
inline constexpr double kGimbalPitchMax = 0.5235987755982988;   // +pi/6
inline constexpr double kMaxTopicRateHz = 200.0;
inline constexpr double kControlStepHz = 50.0;

struct DroneState {
    Vec3 position;
    Vec3 velocity;
    double yaw = 0.0;
    GimbalAttitude gimbal;
    double uptime_s = 0.0;

    bool operator==(const DroneState&) const = default;
};

struct VelocityCommand {
    double vx = 0.0, vy = 0.0, vz = 0.0;
    double yaw_rate = 0.0;
};

struct TelemetrySample {
    Topic topic = Topic::Pose;
    SimTime timestamp;
    std::vector<double> values;

    bool operator==(const TelemetrySample&) const = default;
};

struct TelemetryOverrides {
    double initial_altitude_agl_m = 0.0;
    double climb_rate_mps = 0.5;
    double obstacle_distance_m = 10.0;
    double home_lat_deg = 64.1283;
    double home_lon_deg = -21.8278;
    double home_alt_m = 0.0;
};

struct DroneProfile {
    std::string name;
    std::uint32_t bulk_pipe_count = 2;

    static DroneProfile m350() { return {"M350", 2}; }
    static DroneProfile m30() { return {"M30", 1}; }
};

struct CameraConfig {
    double fps = 24.0;
    std::size_t rgb_frame_bytes = 16384;
    std::size_t stereo_frame_bytes = 8192;
};

struct DroneConfig {
    DroneProfile profile = DroneProfile::m350();
    DroneState initial_state;
    TelemetryOverrides telemetry;
    /// Identity the drone accepts on each port; unset means any valid identity.
    std::optional<GadgetDescriptor> expected_eport_gadget;
    std::optional<GadgetDescriptor> expected_skyport_gadget;
    LinkProfile bulk_link{480e6, 1.0, 0.0, 11};
    LinkProfile eport_network_link{100e6, 2.0, 0.0, 12};
    LinkProfile skyport_network_link{100e6, 20.0, 0.0, 13};
    CameraConfig cameras;
};

enum class SessionId : std::uint32_t {};
enum class SubscriptionId : std::uint32_t {};

class Drone {
public:
    Drone(DroneConfig config, const SimClock& clock);

    /// Binds an application to a port. Negotiating the SkyPort faults every
    /// ACTIVE E-port bulk pipe.
    SessionId negotiate(PortKind port, const GadgetDescriptor& descriptor, HighBandwidth high_bw);
    void release(SessionId session);

    PortKind port_of(SessionId session) const;
    HighBandwidth transport_of(SessionId session) const;
    std::optional<SessionId> session_on(PortKind port) const;

    /// Bulk pipes provisioned for a BULK session (empty otherwise).
    std::span<BulkPipe> bulk_pipes(SessionId session);
    /// READY -> ACTIVE for every pipe of the session.
    void activate_bulk(SessionId session);
    /// The session's network channel, or nullptr for BULK sessions. On the
    /// E-port it carries drone-to-payload data; on the SkyPort it carries
    /// payload-to-controller video.
    NetworkChannel* network_channel(SessionId session);

    SubscriptionId subscribe(SessionId session, Topic topic, double frequency_hz);
    /// Samples due in (last poll, until]; the first falls one period after subscribing.
    std::vector<TelemetrySample> poll_telemetry(SubscriptionId subscription, SimTime until);

    /// RGB flows on bulk pipe 0, stereo on bulk pipe 1, or on the network
    /// channel for RGB over a NETWORK session.
    void request_video(SessionId session, CameraSource source);
    /// Emits every camera frame captured up to `until` onto its transport.
    void pump_video(SimTime until);
    /// Emits frames due up to now, then ends the stream; no further ids are used.
    void stop_video(SessionId session, CameraSource source);
    std::uint64_t frames_emitted(SessionId session, CameraSource source) const;

    DroneState command_velocity(SessionId session, const VelocityCommand& cmd, double duration_s);
    GimbalAttitude command_gimbal(SessionId session, const GimbalAttitude& attitude);
    DroneState state() const { return state_at(clock_.now()); }
    DroneState state_at(SimTime t) const;

    /// SkyPort video path to the operator's controller.
    std::optional<SimTime> forward_to_controller(SessionId session, Bytes wire, SimTime send_ts);
    std::vector<Delivery> controller_inbox(SimTime until);
    std::optional<SimTime> controller_last_delivery() const;
    double controller_serialization_ms(SessionId session, std::size_t bytes) const;

    /// Serves one control request from the session's UART; returns the reply payload.
    Bytes handle_control(SessionId session, const SerialFrame& request);

    const DroneConfig& config() const { return config_; }
    const SimClock& clock() const { return clock_; }

private:
    struct CameraStream {
        CameraSource source;
        SimTime start;
        std::uint64_t slot = 0;
        std::uint64_t next_id = 0;
        bool halted = false;
    };
    struct Session {
        PortKind port;
        GadgetDescriptor descriptor;
        HighBandwidth high_bw;
        std::vector<BulkPipe> pipes;
        std::optional<NetworkChannel> network;
        std::vector<CameraStream> streams;
        std::optional<std::uint16_t> last_control_seq;
        Bytes last_reply;
    };
    struct Subscription {
        SessionId session;
        Topic topic;
        double frequency_hz;
        SimTime start;
        std::uint64_t next_k = 1;
    };

    Session& session(SessionId id);
    const Session& session(SessionId id) const;
    void require(const Session& s, Capability cap, std::string_view what) const;
    void record_state(DroneState s);
    std::vector<double> sample_values(Topic topic, SimTime t) const;
    Bytes dispatch_control(SessionId id, const SerialFrame& request);

    DroneConfig config_;
    const SimClock& clock_;
    std::map<std::uint32_t, Session> sessions_;
    std::map<std::uint32_t, Subscription> subscriptions_;
    std::vector<std::pair<SimTime, DroneState>> history_;
    std::uint32_t next_session_ = 1;
    std::uint32_t next_subscription_ = 1;
};

}  // namespace paysim
