#pragma once

// Request/reply messages carried in SerialFrame payloads on the low-bandwidth
// control channel. A reply echoes the request sequence number so a retried
// request is answered from the drone's reply cache instead of re-executing.

#include <cstdint>
#include <optional>
#include <string>

#include "paysim/channel.hpp"
#include "paysim/error.hpp"

namespace paysim::control {

enum class MessageType : std::uint8_t {
    Subscribe = 0x01,
    RequestVideo = 0x02,
    CommandVelocity = 0x03,
    CommandGimbal = 0x04,
    Click = 0x05,
    Reply = 0x80,
};

struct Reply {
    std::uint16_t request_seq = 0;
    std::optional<ErrorCode> error;  // nullopt on success
    std::string message;
    Bytes body;
};

Bytes encode_reply(const Reply& reply);
Reply decode_reply(ByteView payload);

/// Throws the carried error, if any.
void raise_if_error(const Reply& reply);

}  // namespace paysim::control
