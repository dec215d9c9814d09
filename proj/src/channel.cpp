#include "paysim/channel.hpp"

#include <algorithm>
#include <cmath>

#include "paysim/error.hpp"

namespace paysim {

namespace {

constexpr std::array<std::uint16_t, 256> make_crc_table() {
    std::array<std::uint16_t, 256> table{};
    for (std::uint32_t i = 0; i < 256; ++i) {
        std::uint16_t crc = static_cast<std::uint16_t>(i << 8);
        for (int bit = 0; bit < 8; ++bit) {
            crc = (crc & 0x8000) ? static_cast<std::uint16_t>((crc << 1) ^ 0x1021)
                                 : static_cast<std::uint16_t>(crc << 1);
        }
        table[i] = crc;
    }
    return table;
}

constexpr auto kCrcTable = make_crc_table();

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>((p[0] << 8) | p[1]);
}

std::uint16_t frame_crc(std::uint8_t msg_type, std::uint16_t seq, ByteView payload) {
    const std::array<std::uint8_t, 3> head{msg_type, static_cast<std::uint8_t>(seq >> 8),
                                           static_cast<std::uint8_t>(seq & 0xFF)};
    return crc16_ccitt_false(payload, crc16_ccitt_false(head));
}

}  // namespace

std::uint16_t crc16_ccitt_false(ByteView data, std::uint16_t crc) noexcept {
    for (std::uint8_t byte : data) {
        crc = static_cast<std::uint16_t>((crc << 8) ^ kCrcTable[((crc >> 8) ^ byte) & 0xFF]);
    }
    return crc;
}

Bytes encode_serial(std::uint8_t msg_type, std::uint16_t seq, ByteView payload) {
    if (payload.size() > kMaxSerialPayload) {
        throw Error(ErrorCode::PayloadTooLarge,
                    "serial payload of " + std::to_string(payload.size()) + " bytes exceeds 65535");
    }
    const auto length = static_cast<std::uint16_t>(payload.size());
    const std::uint16_t crc = frame_crc(msg_type, seq, payload);

    Bytes out;
    out.reserve(payload.size() + kSerialOverheadBytes);
    out.push_back(kSerialStartOfFrame);
    out.push_back(static_cast<std::uint8_t>(length >> 8));
    out.push_back(static_cast<std::uint8_t>(length & 0xFF));
    out.push_back(msg_type);
    out.push_back(static_cast<std::uint8_t>(seq >> 8));
    out.push_back(static_cast<std::uint8_t>(seq & 0xFF));
    out.insert(out.end(), payload.begin(), payload.end());
    out.push_back(static_cast<std::uint8_t>(crc >> 8));
    out.push_back(static_cast<std::uint8_t>(crc & 0xFF));
    return out;
}

SerialFrame decode_serial(ByteView bytes) {
    if (bytes.size() < kSerialOverheadBytes) {
        throw Error(ErrorCode::MalformedFrame, "serial frame shorter than 8 bytes");
    }
    if (bytes[0] != kSerialStartOfFrame) {
        throw Error(ErrorCode::MalformedFrame, "missing start-of-frame byte");
    }
    const std::size_t length = read_u16(&bytes[1]);
    if (bytes.size() != length + kSerialOverheadBytes) {
        throw Error(ErrorCode::MalformedFrame, "length field does not match frame size");
    }
    SerialFrame frame;
    frame.msg_type = bytes[3];
    frame.seq = read_u16(&bytes[4]);
    const auto payload = bytes.subspan(kSerialHeaderBytes, length);
    const std::uint16_t expected = read_u16(&bytes[kSerialHeaderBytes + length]);
    if (frame_crc(frame.msg_type, frame.seq, payload) != expected) {
        throw Error(ErrorCode::ChecksumMismatch, "serial frame crc mismatch");
    }
    frame.payload.assign(payload.begin(), payload.end());
    return frame;
}

void SerialDecoder::feed(ByteView bytes) {
    buffer_.insert(buffer_.end(), bytes.begin(), bytes.end());
}

std::optional<SerialFrame> SerialDecoder::next() {
    for (;;) {
        while (!buffer_.empty() && buffer_.front() != kSerialStartOfFrame) {
            buffer_.pop_front();
            ++discarded_bytes_;
        }
        if (buffer_.size() < kSerialOverheadBytes) return std::nullopt;

        const std::size_t length = (static_cast<std::size_t>(buffer_[1]) << 8) | buffer_[2];
        const std::size_t total = length + kSerialOverheadBytes;
        if (buffer_.size() < total) return std::nullopt;

        const Bytes candidate(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(total));
        try {
            SerialFrame frame = decode_serial(candidate);
            buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(total));
            return frame;
        } catch (const Error&) {
            // Skip this start byte and hunt for the next one.
            ++checksum_failures_;
            ++discarded_bytes_;
            buffer_.pop_front();
        }
    }
}

void LinkProfile::validate() const {
    if (!(bandwidth_bps > 0.0) || !std::isfinite(bandwidth_bps)) {
        throw Error(ErrorCode::InvalidArgument, "bandwidth_bps must be positive");
    }
    if (!(latency_ms >= 0.0) || !std::isfinite(latency_ms)) {
        throw Error(ErrorCode::InvalidArgument, "latency_ms must be nonnegative");
    }
    if (!(loss_rate >= 0.0 && loss_rate <= 1.0)) {
        throw Error(ErrorCode::InvalidArgument, "loss_rate must lie in [0, 1]");
    }
}

Link::Link(const LinkProfile& profile) : profile_(profile), rng_(profile.seed) {
    profile_.validate();
}

std::optional<SimTime> Link::transmit(std::size_t byte_count, SimTime now) {
    // 53-bit uniform in [0, 1); avoids implementation-defined distributions.
    const double draw = static_cast<double>(rng_() >> 11) * 0x1.0p-53;
    if (draw < profile_.loss_rate) {
        ++dropped_;
        return std::nullopt;
    }
    ++transmitted_;
    return now + (profile_.latency_ms + serialization_ms(byte_count));
}

std::optional<SimTime> DeliveryQueue::push(Bytes bytes, SimTime now) {
    const auto at = link_.transmit(bytes.size(), now);
    if (!at) return std::nullopt;
    auto pos = std::upper_bound(pending_.begin(), pending_.end(), *at,
                                [](SimTime t, const Delivery& d) { return t < d.at; });
    pending_.insert(pos, Delivery{*at, std::move(bytes)});
    return at;
}

std::vector<Delivery> DeliveryQueue::pop_until(SimTime until) {
    std::vector<Delivery> out;
    while (!pending_.empty() && pending_.front().at <= until) {
        out.push_back(std::move(pending_.front()));
        pending_.pop_front();
    }
    return out;
}

std::optional<SimTime> DeliveryQueue::last_delivery() const {
    if (pending_.empty()) return std::nullopt;
    return pending_.back().at;
}

std::optional<SimTime> SerialChannel::send(std::uint8_t msg_type, ByteView payload, SimTime now) {
    Bytes wire = encode_serial(msg_type, next_seq_, payload);
    ++next_seq_;
    return queue_.push(std::move(wire), now);
}

std::optional<SimTime> SerialChannel::send_frame(const SerialFrame& frame, SimTime now) {
    return queue_.push(encode_serial(frame), now);
}

std::vector<SerialFrame> SerialChannel::receive(SimTime until) {
    for (const auto& d : queue_.pop_until(until)) decoder_.feed(d.bytes);
    std::vector<SerialFrame> frames;
    while (auto f = decoder_.next()) frames.push_back(std::move(*f));
    return frames;
}

std::string_view to_string(PipeState state) noexcept {
    switch (state) {
        case PipeState::Unprovisioned: return "UNPROVISIONED";
        case PipeState::Ready: return "READY";
        case PipeState::Active: return "ACTIVE";
        case PipeState::Faulted: return "FAULTED";
    }
    return "?";
}

void GadgetDescriptor::validate() const {
    if (vendor_id == 0 || product_id == 0) {
        throw Error(ErrorCode::InvalidDescriptor, "vendor_id and product_id must be nonzero");
    }
    if (bulk_pipe_count == 0) {
        throw Error(ErrorCode::InvalidDescriptor, "bulk_pipe_count must be at least 1");
    }
}

namespace {

LinkProfile with_seed(LinkProfile p, std::uint64_t seed) {
    p.seed = seed;
    return p;
}

LinkProfile lossless(LinkProfile p) {
    p.loss_rate = 0.0;
    return p;
}

}  // namespace

BulkPipe::BulkPipe(std::uint32_t id, const LinkProfile& profile)
    : id_(id),
      queues_{DeliveryQueue(lossless(profile)),
              DeliveryQueue(with_seed(profile, derive_seed(profile.seed, 2ULL * id))),
              DeliveryQueue(with_seed(profile, derive_seed(profile.seed, 2ULL * id + 1)))} {}

void BulkPipe::mark_ready() {
    if (state_ != PipeState::Unprovisioned) {
        throw Error(ErrorCode::PipeNotActive, "pipe already provisioned");
    }
    state_ = PipeState::Ready;
}

void BulkPipe::activate() {
    if (state_ == PipeState::Active) return;
    if (state_ != PipeState::Ready) {
        throw Error(ErrorCode::PipeNotActive,
                    "cannot activate pipe " + std::to_string(id_) + " in state " + std::string(to_string(state_)));
    }
    state_ = PipeState::Active;
}

void BulkPipe::fault() {
    state_ = PipeState::Faulted;
    for (auto& q : queues_) q.clear();
}

void BulkPipe::reset() {
    for (auto& q : queues_) q.clear();
    state_ = PipeState::Ready;
}

DeliveryQueue& BulkPipe::queue(EndpointRole endpoint) { return queues_[static_cast<std::size_t>(endpoint)]; }
const DeliveryQueue& BulkPipe::queue(EndpointRole endpoint) const {
    return queues_[static_cast<std::size_t>(endpoint)];
}

std::optional<SimTime> BulkPipe::write(EndpointRole endpoint, Bytes bytes, SimTime now) {
    const bool allowed = endpoint == EndpointRole::Management
                             ? (state_ == PipeState::Ready || state_ == PipeState::Active)
                             : state_ == PipeState::Active;
    if (!allowed) {
        throw Error(ErrorCode::PipeNotActive,
                    "write to pipe " + std::to_string(id_) + " in state " + std::string(to_string(state_)));
    }
    return queue(endpoint).push(std::move(bytes), now);
}

std::vector<Delivery> BulkPipe::read(EndpointRole endpoint, SimTime until) {
    if (state_ == PipeState::Faulted || state_ == PipeState::Unprovisioned) return {};
    return queue(endpoint).pop_until(until);
}

std::optional<SimTime> BulkPipe::last_delivery(EndpointRole endpoint) const {
    return queue(endpoint).last_delivery();
}

std::vector<BulkPipe> provision_bulk_pipes(const GadgetDescriptor& descriptor, const LinkProfile& profile) {
    descriptor.validate();
    std::vector<BulkPipe> pipes;
    pipes.reserve(descriptor.bulk_pipe_count);
    for (std::uint32_t i = 0; i < descriptor.bulk_pipe_count; ++i) {
        pipes.emplace_back(i, profile);
        pipes.back().mark_ready();
    }
    return pipes;
}

}  // namespace paysim
