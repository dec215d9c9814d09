#include "paysim/control_protocol.hpp"

#include "paysim/bytes.hpp"

namespace paysim::control {

Bytes encode_reply(const Reply& reply) {
    ByteWriter w;
    w.u16(reply.request_seq);
    w.u8(reply.error ? static_cast<std::uint8_t>(static_cast<std::uint8_t>(*reply.error) + 1) : 0);
    w.str(reply.message);
    w.bytes(reply.body);
    return w.take();
}

Reply decode_reply(ByteView payload) {
    ByteReader r(payload);
    Reply reply;
    reply.request_seq = r.u16();
    const std::uint8_t status = r.u8();
    if (status != 0) {
        if (status - 1 > static_cast<int>(ErrorCode::Io)) {
            throw Error(ErrorCode::MalformedFrame, "unknown reply status");
        }
        reply.error = static_cast<ErrorCode>(status - 1);
    }
    reply.message = r.str();
    const auto body = r.rest();
    reply.body.assign(body.begin(), body.end());
    return reply;
}

void raise_if_error(const Reply& reply) {
    if (reply.error) throw Error(*reply.error, reply.message);
}

}  // namespace paysim::control
