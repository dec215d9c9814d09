#pragma once

// Payload-side application bound to the SkyPort: renders the desktop, runs the
// encoder model, chops frames into packets for the controller and turns
// controller taps into desktop clicks.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "paysim/channel.hpp"
#include "paysim/drone.hpp"
#include "paysim/event_log.hpp"
#include "paysim/media.hpp"

namespace paysim {

/// Encoder model for the desktop stream. In deterministic mode frame sizes
/// are fixed so that every KEY+DELTA pair spends exactly two frames' worth
/// of the bitrate budget.
struct EncoderModel {
    double bitrate_bps = 1.2e6;
    double fps = 24.0;
    double key_to_delta_size_ratio = 2.0;
    double encode_delay_ms = 280.0;
    bool deterministic = true;
    std::uint64_t seed = 0;
    /// Relative size jitter applied in non-deterministic mode.
    double jitter = 0.1;

    void validate() const;
    double frame_interval_ms() const { return 1000.0 / fps; }
    std::size_t pair_budget_bytes() const;
    std::size_t delta_frame_bytes() const;
    std::size_t key_frame_bytes() const;
};

/// GOP period 2: even ids are KEY, odd ids DELTA.
constexpr FrameType gop_frame_type(std::uint64_t frame_id) noexcept {
    return frame_id % 2 == 0 ? FrameType::Key : FrameType::Delta;
}

struct EncodedFrame {
    Frame frame;
    SimTime available_at;
};

/// Deterministic-mode frame: test-card payload sized by the GOP rule,
/// available encode_delay_ms after capture.
EncodedFrame next_frame(const EncoderModel& encoder, std::uint64_t frame_id, SimTime now);

/// Stateful encoder: enforces consecutive frame ids and owns the jitter RNG.
class FrameEncoder {
public:
    explicit FrameEncoder(const EncoderModel& model);

    EncodedFrame encode(SimTime now, const TestCardHeader& content);
    std::uint64_t next_id() const { return next_id_; }
    const EncoderModel& model() const { return model_; }

private:
    EncoderModel model_;
    std::mt19937_64 rng_;
    std::uint64_t next_id_ = 0;
};

struct TransmissionRecord {
    std::uint64_t frame_id = 0;
    std::uint32_t index = 0;
    std::uint32_t count = 0;
    std::size_t wire_bytes = 0;
    SimTime send_ts;
    std::optional<SimTime> delivered_at;
};

/// Chops frames and transmits packets back to back toward the controller.
/// A packet goes out once its frame is available and the previous packet
/// has left the interface.
class PacketSender {
public:
    explicit PacketSender(std::size_t max_packet_bytes = kDefaultMaxPacketBytes);

    /// Throws CapabilityViolation unless the session's port can stream to the controller.
    std::vector<TransmissionRecord> send_stream(Drone& drone, SessionId session, std::span<const EncodedFrame> frames);

    SimTime tx_free() const { return tx_free_; }
    std::size_t max_packet_bytes() const { return max_packet_bytes_; }

private:
    std::size_t max_packet_bytes_;
    SimTime tx_free_;
};

inline std::vector<TransmissionRecord> send_stream(Drone& drone, SessionId session,
                                                   std::span<const EncodedFrame> frames,
                                                   std::size_t max_packet_bytes = kDefaultMaxPacketBytes) {
    PacketSender sender(max_packet_bytes);
    return sender.send_stream(drone, session, frames);
}

struct PixelPoint {
    int x = 0;
    int y = 0;
    bool operator==(const PixelPoint&) const = default;
};

/// Normalised controller coordinates to desktop pixels, rounding half away
/// from zero. Throws OutOfBounds outside [0, 1].
PixelPoint map_click(double u, double v);

struct ClickEvent {
    PixelPoint at;
    SimTime time;
    bool operator==(const ClickEvent&) const = default;
};

/// The payload desktop as seen by the stream: a test card with a cursor.
class DesktopModel {
public:
    void click(PixelPoint at, SimTime time);
    const std::vector<ClickEvent>& clicks() const { return clicks_; }
    PixelPoint cursor() const { return cursor_; }

    VideoSource source() const { return source_; }
    void set_source(VideoSource source) { source_ = source; }

private:
    std::vector<ClickEvent> clicks_;
    PixelPoint cursor_{kDesktopWidth / 2, kDesktopHeight / 2};
    VideoSource source_ = VideoSource::PiDesktop;
};

struct SkyportConfig {
    std::string serial_device = "usb-serial-0";
    std::string high_bw_device = "eth0";
    GadgetDescriptor descriptor{0x1D6B, 0x0105, 1};
    EncoderModel encoder;
    std::size_t max_packet_bytes = kDefaultMaxPacketBytes;
    LinkProfile serial_link{115200.0, 5.0, 0.0, 31};
};

class SkyportApp {
public:
    /// Negotiates the SkyPort over UART + network.
    static SkyportApp start(const SkyportConfig& config, Drone& drone, EventLog* log = nullptr);

    SkyportApp(SkyportApp&&) noexcept = default;
    SkyportApp& operator=(SkyportApp&&) noexcept = default;

    /// Renders and encodes the next desktop frame at `now`.
    EncodedFrame capture(SimTime now);
    std::vector<TransmissionRecord> stream(std::span<const EncodedFrame> frames);

    /// Controller-to-payload UART; the drone relays pilot taps here.
    SerialChannel& uart_inbound() { return uart_inbound_; }
    /// Applies every click delivered on the UART up to `until`.
    std::vector<ClickEvent> service_uart(SimTime until);

    DesktopModel& desktop() { return desktop_; }
    const DesktopModel& desktop() const { return desktop_; }
    SessionId session() const { return session_; }
    const SkyportConfig& config() const { return config_; }
    const PacketSender& sender() const { return sender_; }

private:
    SkyportApp(const SkyportConfig& config, Drone& drone, EventLog* log);

    SkyportConfig config_;
    Drone* drone_;
    EventLog* log_;
    SessionId session_{};
    FrameEncoder encoder_;
    PacketSender sender_;
    DesktopModel desktop_;
    SerialChannel uart_inbound_;
};

/// Serial payload of a relayed tap: u:f64 | v:f64.
Bytes encode_click(double u, double v);

}  // namespace paysim
