#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string_view>
#include <variant>
#include <vector>

#include "paysim/channel.hpp"
#include "paysim/sim_time.hpp"

namespace paysim {

/// GOP-2 stream: only intra and forward-predicted frames exist.
enum class FrameType : std::uint8_t { Key = 0, Delta = 1 };

/// What a frame shows. PiDesktop is the payload's own desktop; the others
/// are drone camera feeds.
enum class VideoSource : std::uint8_t { PiDesktop = 0, RgbMain = 1, StereoDown = 2 };

std::string_view to_string(FrameType type) noexcept;
std::string_view to_string(VideoSource source) noexcept;
std::optional<VideoSource> parse_video_source(std::string_view name) noexcept;

inline constexpr std::uint16_t kDesktopWidth = 640;
inline constexpr std::uint16_t kDesktopHeight = 480;

struct Frame {
    std::uint64_t frame_id = 0;
    FrameType frame_type = FrameType::Key;
    std::uint16_t width = kDesktopWidth;
    std::uint16_t height = kDesktopHeight;
    Bytes payload;
    SimTime capture_ts;

    bool operator==(const Frame&) const = default;
};

struct VideoPacket {
    std::uint64_t frame_id = 0;
    std::uint32_t index = 0;
    std::uint32_t count = 1;
    FrameType frame_type = FrameType::Key;
    Bytes payload;
    SimTime send_ts;

    bool operator==(const VideoPacket&) const = default;
};

inline constexpr std::size_t kPacketHeaderBytes = 15;
inline constexpr std::size_t kDefaultMaxPacketBytes = 8192;

/// frame_id:u64 | index:u16 | count:u16 | frame_type:u8 | payload_len:u16 | payload,
/// all big-endian. Throws PayloadTooLarge when index/count/payload exceed u16.
Bytes encode_packet(const VideoPacket& packet);
/// Inverse of encode_packet (send_ts is not on the wire). Throws MalformedFrame.
VideoPacket decode_packet(ByteView wire);

/// Splits a frame into max(1, ceil(len / max_packet_bytes)) packets, all full
/// size except possibly the last.
std::vector<VideoPacket> chop(const Frame& frame, std::size_t max_packet_bytes);

struct Incomplete {
    std::uint64_t frame_id = 0;
    std::uint32_t have = 0;
    std::uint32_t count = 0;
};

using ReassemblyResult = std::variant<Frame, Incomplete>;

/// Rebuilds a frame from packets given in any order; duplicates are ignored.
/// Throws MixedFrames if frame ids differ and InconsistentPackets if packets
/// disagree on count/type or carry conflicting payloads for one index. The
/// wire carries no dimensions or timestamp: the result has desktop
/// dimensions and a zero capture_ts.
ReassemblyResult reassemble(std::span<const VideoPacket> packets);

/// Streaming receiver: collects packets of many frames and releases each frame
/// once it is complete. Frames are released at most once. A packet that
/// contradicts the ones already held is rejected with the same errors as
/// reassemble() and is not kept.
class Reassembler {
public:
    std::optional<Frame> push(VideoPacket packet);

    std::size_t pending_frames() const { return partial_.size(); }
    std::uint64_t completed() const { return completed_; }

private:
    std::map<std::uint64_t, std::vector<VideoPacket>> partial_;
    std::map<std::uint64_t, bool> done_;
    std::uint64_t completed_ = 0;
};

// ---------------------------------------------------------------------------
// Synthetic test card carried at the start of every frame payload
// ---------------------------------------------------------------------------

struct TestCardHeader {
    VideoSource source = VideoSource::PiDesktop;
    std::uint64_t frame_id = 0;
    SimTime capture_ts;
    std::uint16_t cursor_x = 0;
    std::uint16_t cursor_y = 0;

    bool operator==(const TestCardHeader&) const = default;
};

/// "TC" | version:u8 | source:u8 | frame_id:u64 | capture_ts_ms:f64 | cursor_x:u16 | cursor_y:u16
inline constexpr std::size_t kTestCardHeaderBytes = 24;

/// Header followed by a deterministic filler pattern, exactly `size` bytes.
/// A payload shorter than the header carries a truncated header.
Bytes render_test_card(const TestCardHeader& header, std::size_t size);
std::optional<TestCardHeader> read_test_card(ByteView payload) noexcept;

}  // namespace paysim
