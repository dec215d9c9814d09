#pragma once

// Transports between the payload computer and the drone: a framed serial
// channel (UART-like), USB bulk pipes with a management/input/output endpoint
// triple, and a plain network channel. All of them are passive and resolve
// delivery times against the simulated clock.

#include <array>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "paysim/sim_time.hpp"

namespace paysim {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

// ---------------------------------------------------------------------------
// Serial framing
// ---------------------------------------------------------------------------

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
std::uint16_t crc16_ccitt_false(ByteView data, std::uint16_t crc = 0xFFFF) noexcept;

inline constexpr std::uint8_t kSerialStartOfFrame = 0xAA;
inline constexpr std::size_t kSerialHeaderBytes = 6;  // sof, length, msg_type, seq
inline constexpr std::size_t kSerialOverheadBytes = kSerialHeaderBytes + 2;
inline constexpr std::size_t kMaxSerialPayload = 65535;

struct SerialFrame {
    std::uint8_t msg_type = 0;
    std::uint16_t seq = 0;
    Bytes payload;

    bool operator==(const SerialFrame&) const = default;
};

/// 0xAA | length:u16 BE | msg_type:u8 | seq:u16 BE | payload | crc:u16 BE.
/// The CRC covers msg_type, seq and payload.
Bytes encode_serial(std::uint8_t msg_type, std::uint16_t seq, ByteView payload);
inline Bytes encode_serial(const SerialFrame& frame) {
    return encode_serial(frame.msg_type, frame.seq, frame.payload);
}

/// Decodes exactly one frame occupying the whole buffer. Throws MalformedFrame
/// or ChecksumMismatch; never returns a partial frame.
SerialFrame decode_serial(ByteView bytes);

/// Incremental decoder for a byte stream. Resynchronises on the next start
/// byte after garbage or a failed checksum.
class SerialDecoder {
public:
    void feed(ByteView bytes);
    std::optional<SerialFrame> next();

    std::size_t checksum_failures() const { return checksum_failures_; }
    std::size_t discarded_bytes() const { return discarded_bytes_; }

private:
    std::deque<std::uint8_t> buffer_;
    std::size_t checksum_failures_ = 0;
    std::size_t discarded_bytes_ = 0;
};

// ---------------------------------------------------------------------------
// Links
// ---------------------------------------------------------------------------

struct LinkProfile {
    double bandwidth_bps = 100e6;
    double latency_ms = 0.0;
    double loss_rate = 0.0;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Seeded loss process plus latency/serialization arithmetic. One uniform draw
/// per transmission from mt19937_64, dropped iff draw < loss_rate.
class Link {
public:
    explicit Link(const LinkProfile& profile);

    /// Delivery time, or nullopt when the loss process drops the message.
    std::optional<SimTime> transmit(std::size_t byte_count, SimTime now);

    double serialization_ms(std::size_t byte_count) const {
        return static_cast<double>(byte_count) * 8.0 / profile_.bandwidth_bps * 1000.0;
    }

    const LinkProfile& profile() const { return profile_; }
    std::uint64_t transmitted() const { return transmitted_; }
    std::uint64_t dropped() const { return dropped_; }

private:
    LinkProfile profile_;
    std::mt19937_64 rng_;
    std::uint64_t transmitted_ = 0;
    std::uint64_t dropped_ = 0;
};

struct Delivery {
    SimTime at;
    Bytes bytes;
};

/// Messages in flight over one link direction, released in delivery order.
class DeliveryQueue {
public:
    explicit DeliveryQueue(const LinkProfile& profile) : link_(profile) {}

    std::optional<SimTime> push(Bytes bytes, SimTime now);
    std::vector<Delivery> pop_until(SimTime until);
    void clear() { pending_.clear(); }

    bool empty() const { return pending_.empty(); }
    std::optional<SimTime> last_delivery() const;
    Link& link() { return link_; }
    const Link& link() const { return link_; }

private:
    Link link_;
    std::deque<Delivery> pending_;  // sorted by delivery time
};

/// One direction of a UART-like channel carrying framed messages.
class SerialChannel {
public:
    SerialChannel(std::string name, const LinkProfile& profile)
        : name_(std::move(name)), queue_(profile) {}

    /// Frames and transmits; the sequence number increments per call, dropped or not.
    std::optional<SimTime> send(std::uint8_t msg_type, ByteView payload, SimTime now);
    /// Sends a prebuilt frame as is (retransmissions keep their sequence number).
    std::optional<SimTime> send_frame(const SerialFrame& frame, SimTime now);
    std::uint16_t allocate_seq() { return next_seq_++; }
    std::vector<SerialFrame> receive(SimTime until);

    const std::string& name() const { return name_; }
    std::uint16_t next_seq() const { return next_seq_; }
    const SerialDecoder& decoder() const { return decoder_; }
    DeliveryQueue& queue() { return queue_; }

private:
    std::string name_;
    DeliveryQueue queue_;
    SerialDecoder decoder_;
    std::uint16_t next_seq_ = 0;
};

/// Plain datagram channel (Ethernet, RNDIS network-over-USB).
class NetworkChannel {
public:
    NetworkChannel(std::string name, const LinkProfile& profile)
        : name_(std::move(name)), queue_(profile) {}

    std::optional<SimTime> send(Bytes bytes, SimTime now) { return queue_.push(std::move(bytes), now); }
    std::vector<Delivery> receive(SimTime until) { return queue_.pop_until(until); }

    const std::string& name() const { return name_; }
    DeliveryQueue& queue() { return queue_; }
    const DeliveryQueue& queue() const { return queue_; }

private:
    std::string name_;
    DeliveryQueue queue_;
};

// ---------------------------------------------------------------------------
// USB bulk gadget
// ---------------------------------------------------------------------------

/// Endpoint roles of one FunctionFS instance. Input carries data into the
/// payload computer (drone to payload), Output carries data out of it.
enum class EndpointRole : std::uint8_t { Management, Input, Output };
enum class PipeState : std::uint8_t { Unprovisioned, Ready, Active, Faulted };

std::string_view to_string(PipeState state) noexcept;

struct GadgetDescriptor {
    std::uint16_t vendor_id = 0;
    std::uint16_t product_id = 0;
    std::uint32_t bulk_pipe_count = 0;

    /// Throws InvalidDescriptor on zero identifiers or zero pipe count.
    void validate() const;
    bool same_identity(const GadgetDescriptor& other) const {
        return vendor_id == other.vendor_id && product_id == other.product_id;
    }
};

class BulkPipe {
public:
    BulkPipe(std::uint32_t id, const LinkProfile& profile);

    std::uint32_t id() const { return id_; }
    PipeState state() const { return state_; }
    static constexpr std::array<EndpointRole, 3> endpoints() {
        return {EndpointRole::Management, EndpointRole::Input, EndpointRole::Output};
    }

    void mark_ready();
    /// READY -> ACTIVE. Throws PipeNotActive from UNPROVISIONED or FAULTED.
    void activate();
    /// Drops everything in flight; the pipe stays silent until reset().
    void fault();
    void reset();

    /// Data endpoints accept writes only while ACTIVE; management accepts
    /// them while READY or ACTIVE. Rejected writes throw PipeNotActive.
    std::optional<SimTime> write(EndpointRole endpoint, Bytes bytes, SimTime now);
    std::vector<Delivery> read(EndpointRole endpoint, SimTime until);

    std::optional<SimTime> last_delivery(EndpointRole endpoint) const;

private:
    DeliveryQueue& queue(EndpointRole endpoint);
    const DeliveryQueue& queue(EndpointRole endpoint) const;

    std::uint32_t id_;
    PipeState state_ = PipeState::Unprovisioned;
    std::array<DeliveryQueue, 3> queues_;
};

/// One READY pipe per FunctionFS instance the descriptor declares. Pipe i's
/// input endpoint draws its loss process from derive_seed(seed, 2i), output
/// from derive_seed(seed, 2i + 1); management traffic is lossless.
std::vector<BulkPipe> provision_bulk_pipes(const GadgetDescriptor& descriptor, const LinkProfile& profile);

}  // namespace paysim
