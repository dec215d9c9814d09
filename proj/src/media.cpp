#include "paysim/media.hpp"

#include <algorithm>
#include <limits>
#include <string>

#include "paysim/bytes.hpp"
#include "paysim/error.hpp"

namespace paysim {

std::string_view to_string(FrameType type) noexcept {
    return type == FrameType::Key ? "KEY" : "DELTA";
}

std::string_view to_string(VideoSource source) noexcept {
    switch (source) {
        case VideoSource::PiDesktop: return "PI_DESKTOP";
        case VideoSource::RgbMain: return "RGB_MAIN";
        case VideoSource::StereoDown: return "STEREO_DOWN";
    }
    return "?";
}

std::optional<VideoSource> parse_video_source(std::string_view name) noexcept {
    if (name == "PI_DESKTOP") return VideoSource::PiDesktop;
    if (name == "RGB_MAIN") return VideoSource::RgbMain;
    if (name == "STEREO_DOWN") return VideoSource::StereoDown;
    return std::nullopt;
}

Bytes encode_packet(const VideoPacket& packet) {
    constexpr auto kMax = std::numeric_limits<std::uint16_t>::max();
    if (packet.payload.size() > kMax || packet.count > kMax || packet.index > kMax) {
        throw Error(ErrorCode::PayloadTooLarge, "packet does not fit the u16 wire header");
    }
    ByteWriter w;
    w.u64(packet.frame_id)
        .u16(static_cast<std::uint16_t>(packet.index))
        .u16(static_cast<std::uint16_t>(packet.count))
        .u8(static_cast<std::uint8_t>(packet.frame_type))
        .u16(static_cast<std::uint16_t>(packet.payload.size()))
        .bytes(packet.payload);
    return w.take();
}

VideoPacket decode_packet(ByteView wire) {
    ByteReader r(wire);
    VideoPacket p;
    p.frame_id = r.u64();
    p.index = r.u16();
    p.count = r.u16();
    const std::uint8_t type = r.u8();
    if (type > 1) throw Error(ErrorCode::MalformedFrame, "unknown frame type " + std::to_string(type));
    p.frame_type = static_cast<FrameType>(type);
    const std::uint16_t len = r.u16();
    if (r.remaining() != len) throw Error(ErrorCode::MalformedFrame, "payload_len does not match packet size");
    const auto body = r.bytes(len);
    p.payload.assign(body.begin(), body.end());
    if (p.count == 0 || p.index >= p.count) throw Error(ErrorCode::MalformedFrame, "packet index out of range");
    return p;
}

std::vector<VideoPacket> chop(const Frame& frame, std::size_t max_packet_bytes) {
    if (max_packet_bytes == 0) throw Error(ErrorCode::InvalidArgument, "max_packet_bytes must be >= 1");
    const std::size_t len = frame.payload.size();
    const std::size_t count = std::max<std::size_t>(1, (len + max_packet_bytes - 1) / max_packet_bytes);
    if (count > std::numeric_limits<std::uint32_t>::max()) {
        throw Error(ErrorCode::PayloadTooLarge, "frame needs too many packets");
    }

    std::vector<VideoPacket> packets;
    packets.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
        const std::size_t begin = i * max_packet_bytes;
        const std::size_t end = std::min(len, begin + max_packet_bytes);
        VideoPacket p;
        p.frame_id = frame.frame_id;
        p.index = static_cast<std::uint32_t>(i);
        p.count = static_cast<std::uint32_t>(count);
        p.frame_type = frame.frame_type;
        p.payload.assign(frame.payload.begin() + static_cast<std::ptrdiff_t>(begin),
                         frame.payload.begin() + static_cast<std::ptrdiff_t>(end));
        packets.push_back(std::move(p));
    }
    return packets;
}

ReassemblyResult reassemble(std::span<const VideoPacket> packets) {
    if (packets.empty()) return Incomplete{};

    const VideoPacket& first = packets.front();
    std::vector<const VideoPacket*> slots;
    for (const auto& p : packets) {
        if (p.frame_id != first.frame_id) {
            throw Error(ErrorCode::MixedFrames, "packets belong to frames " + std::to_string(first.frame_id) +
                                                      " and " + std::to_string(p.frame_id));
        }
        if (p.count != first.count || p.frame_type != first.frame_type || p.count == 0 || p.index >= p.count) {
            throw Error(ErrorCode::InconsistentPackets, "packet metadata disagrees within frame " +
                                                            std::to_string(p.frame_id));
        }
    }
    slots.assign(first.count, nullptr);
    std::uint32_t have = 0;
    for (const auto& p : packets) {
        auto& slot = slots[p.index];
        if (slot == nullptr) {
            slot = &p;
            ++have;
        } else if (slot->payload != p.payload) {
            throw Error(ErrorCode::InconsistentPackets, "conflicting duplicate of packet " + std::to_string(p.index));
        }
    }
    if (have < first.count) return Incomplete{first.frame_id, have, first.count};

    Frame frame;
    frame.frame_id = first.frame_id;
    frame.frame_type = first.frame_type;
    std::size_t total = 0;
    for (const auto* s : slots) total += s->payload.size();
    frame.payload.reserve(total);
    for (const auto* s : slots) frame.payload.insert(frame.payload.end(), s->payload.begin(), s->payload.end());
    return frame;
}

std::optional<Frame> Reassembler::push(VideoPacket packet) {
    const std::uint64_t id = packet.frame_id;
    if (done_.contains(id)) return std::nullopt;
    auto& parts = partial_[id];
    parts.push_back(std::move(packet));
    ReassemblyResult result;
    try {
        result = reassemble(parts);
    } catch (const Error&) {
        parts.pop_back();
        if (parts.empty()) partial_.erase(id);
        throw;
    }
    if (auto* frame = std::get_if<Frame>(&result)) {
        partial_.erase(id);
        done_[id] = true;
        ++completed_;
        return std::move(*frame);
    }
    return std::nullopt;
}

namespace {

constexpr std::uint8_t kTestCardVersion = 1;

}  // namespace

Bytes render_test_card(const TestCardHeader& header, std::size_t size) {
    ByteWriter w;
    w.u8('T').u8('C').u8(kTestCardVersion).u8(static_cast<std::uint8_t>(header.source));
    w.u64(header.frame_id).f64(header.capture_ts.ms()).u16(header.cursor_x).u16(header.cursor_y);
    Bytes out = w.take();
    out.resize(size);
    for (std::size_t i = kTestCardHeaderBytes; i < size; ++i) {
        out[i] = static_cast<std::uint8_t>((header.frame_id + i) & 0xFF);
    }
    return out;
}

std::optional<TestCardHeader> read_test_card(ByteView payload) noexcept {
    if (payload.size() < kTestCardHeaderBytes) return std::nullopt;
    if (payload[0] != 'T' || payload[1] != 'C' || payload[2] != kTestCardVersion || payload[3] > 2) {
        return std::nullopt;
    }
    ByteReader r(payload.subspan(4));
    TestCardHeader h;
    h.source = static_cast<VideoSource>(payload[3]);
    h.frame_id = r.u64();
    h.capture_ts = SimTime::from_ms(r.f64());
    h.cursor_x = r.u16();
    h.cursor_y = r.u16();
    return h;
}

}  // namespace paysim
