#include "paysim/skyport_app.hpp"

#include <algorithm>
#include <cmath>

#include "paysim/bytes.hpp"
#include "paysim/control_protocol.hpp"
#include "paysim/error.hpp"

namespace paysim {

void EncoderModel::validate() const {
    if (!(bitrate_bps > 0.0) || !(fps > 0.0)) {
        throw Error(ErrorCode::InvalidArgument, "encoder bitrate and fps must be positive");
    }
    if (!(key_to_delta_size_ratio >= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "key_to_delta_size_ratio must be >= 1");
    }
    if (!(encode_delay_ms >= 0.0)) throw Error(ErrorCode::InvalidArgument, "encode_delay_ms must be >= 0");
    if (!(jitter >= 0.0 && jitter < 1.0)) throw Error(ErrorCode::InvalidArgument, "jitter must lie in [0, 1)");
}

std::size_t EncoderModel::pair_budget_bytes() const {
    return static_cast<std::size_t>(std::llround(2.0 * bitrate_bps / 8.0 / fps));
}

std::size_t EncoderModel::delta_frame_bytes() const {
    return static_cast<std::size_t>(
        std::llround(static_cast<double>(pair_budget_bytes()) / (key_to_delta_size_ratio + 1.0)));
}

std::size_t EncoderModel::key_frame_bytes() const { return pair_budget_bytes() - delta_frame_bytes(); }

namespace {

std::size_t gop_size(const EncoderModel& encoder, std::uint64_t frame_id) {
    return gop_frame_type(frame_id) == FrameType::Key ? encoder.key_frame_bytes() : encoder.delta_frame_bytes();
}

EncodedFrame make_frame(const EncoderModel& encoder, const TestCardHeader& content, std::size_t size, SimTime now) {
    EncodedFrame out;
    out.frame.frame_id = content.frame_id;
    out.frame.frame_type = gop_frame_type(content.frame_id);
    out.frame.capture_ts = now;
    TestCardHeader header = content;
    header.capture_ts = now;
    out.frame.payload = render_test_card(header, size);
    out.available_at = now + encoder.encode_delay_ms;
    return out;
}

}  // namespace

EncodedFrame next_frame(const EncoderModel& encoder, std::uint64_t frame_id, SimTime now) {
    encoder.validate();
    TestCardHeader content;
    content.frame_id = frame_id;
    return make_frame(encoder, content, gop_size(encoder, frame_id), now);
}

FrameEncoder::FrameEncoder(const EncoderModel& model) : model_(model), rng_(model.seed) { model_.validate(); }

EncodedFrame FrameEncoder::encode(SimTime now, const TestCardHeader& content) {
    TestCardHeader header = content;
    header.frame_id = next_id_;
    std::size_t size = gop_size(model_, next_id_);
    if (!model_.deterministic) {
        const double u = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
        const double scale = 1.0 + model_.jitter * (2.0 * u - 1.0);
        size = static_cast<std::size_t>(std::llround(static_cast<double>(size) * scale));
    }
    ++next_id_;
    return make_frame(model_, header, size, now);
}

PacketSender::PacketSender(std::size_t max_packet_bytes) : max_packet_bytes_(max_packet_bytes) {
    if (max_packet_bytes_ == 0 || max_packet_bytes_ > 65535) {
        throw Error(ErrorCode::InvalidArgument, "max_packet_bytes must lie in [1, 65535] on the wire");
    }
}

std::vector<TransmissionRecord> PacketSender::send_stream(Drone& drone, SessionId session,
                                                          std::span<const EncodedFrame> frames) {
    if (!check_capability(drone.port_of(session), Capability::StreamToController)) {
        throw Error(ErrorCode::CapabilityViolation,
                    "send_stream needs STREAM_TO_CONTROLLER, which " + std::string(to_string(drone.port_of(session))) +
                        " lacks");
    }
    std::vector<TransmissionRecord> log;
    for (const auto& encoded : frames) {
        auto packets = chop(encoded.frame, max_packet_bytes_);
        for (auto& packet : packets) {
            packet.send_ts = std::max(encoded.available_at, tx_free_);
            Bytes wire = encode_packet(packet);
            TransmissionRecord rec{packet.frame_id, packet.index, packet.count, wire.size(), packet.send_ts, {}};
            tx_free_ = packet.send_ts + drone.controller_serialization_ms(session, wire.size());
            rec.delivered_at = drone.forward_to_controller(session, std::move(wire), packet.send_ts);
            log.push_back(rec);
        }
    }
    return log;
}

PixelPoint map_click(double u, double v) {
    if (!(u >= 0.0 && u <= 1.0) || !(v >= 0.0 && v <= 1.0)) {
        throw Error(ErrorCode::OutOfBounds, "click coordinates must lie in [0, 1]");
    }
    return {static_cast<int>(std::round(u * (kDesktopWidth - 1))),
            static_cast<int>(std::round(v * (kDesktopHeight - 1)))};
}

void DesktopModel::click(PixelPoint at, SimTime time) {
    clicks_.push_back({at, time});
    cursor_ = at;
}

Bytes encode_click(double u, double v) {
    ByteWriter w;
    w.f64(u).f64(v);
    return w.take();
}

SkyportApp::SkyportApp(const SkyportConfig& config, Drone& drone, EventLog* log)
    : config_(config),
      drone_(&drone),
      log_(log),
      encoder_(config.encoder),
      sender_(config.max_packet_bytes),
      uart_inbound_(config.serial_device + ":rx", config.serial_link) {}

SkyportApp SkyportApp::start(const SkyportConfig& config, Drone& drone, EventLog* log) {
    SkyportApp app(config, drone, log);
    try {
        app.session_ = drone.negotiate(PortKind::Skyport, config.descriptor, HighBandwidth::Network);
    } catch (const Error& e) {
        throw Error(ErrorCode::NegotiationFailed, std::string(to_string(e.code())) + ": " + e.detail());
    }
    if (log) {
        log->emit(drone.clock().now(), "skyport", "negotiated",
                  {{"port", "SKYPORT"}, {"serial", config.serial_device}, {"high_bw", config.high_bw_device}});
    }
    return app;
}

EncodedFrame SkyportApp::capture(SimTime now) {
    TestCardHeader content;
    content.source = desktop_.source();
    content.cursor_x = static_cast<std::uint16_t>(desktop_.cursor().x);
    content.cursor_y = static_cast<std::uint16_t>(desktop_.cursor().y);
    return encoder_.encode(now, content);
}

std::vector<TransmissionRecord> SkyportApp::stream(std::span<const EncodedFrame> frames) {
    return sender_.send_stream(*drone_, session_, frames);
}

std::vector<ClickEvent> SkyportApp::service_uart(SimTime until) {
    std::vector<ClickEvent> applied;
    for (const auto& d : uart_inbound_.queue().pop_until(until)) {
        SerialDecoder decoder;
        decoder.feed(d.bytes);
        while (auto frame = decoder.next()) {
            if (frame->msg_type != static_cast<std::uint8_t>(control::MessageType::Click)) continue;
            ByteReader r(frame->payload);
            const double u = r.f64();
            const double v = r.f64();
            try {
                const PixelPoint at = map_click(u, v);
                desktop_.click(at, d.at);
                applied.push_back({at, d.at});
                if (log_) log_->emit(d.at, "skyport", "click", {{"x", at.x}, {"y", at.y}});
            } catch (const Error& e) {
                if (log_) log_->emit(d.at, "skyport", "click_rejected", {{"reason", e.detail()}});
            }
        }
    }
    return applied;
}

}  // namespace paysim
