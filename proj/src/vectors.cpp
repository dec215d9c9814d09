#include "paysim/vectors.hpp"

#include <algorithm>
#include <random>

#include <json.hpp>

#include "paysim/error.hpp"
#include "paysim/media.hpp"
#include "paysim/skyport_app.hpp"

namespace paysim {

namespace {

using nlohmann::ordered_json;

std::string hex(ByteView bytes) {
    static constexpr char kDigits[] = "0123456789abcdef";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (auto b : bytes) {
        s.push_back(kDigits[b >> 4]);
        s.push_back(kDigits[b & 0xF]);
    }
    return s;
}

Frame sample_frame(std::uint64_t id, std::size_t size) {
    Frame f;
    f.frame_id = id;
    f.frame_type = gop_frame_type(id);
    f.payload = render_test_card({VideoSource::PiDesktop, id, SimTime::from_ms(41.6 * static_cast<double>(id)), 320, 240},
                                 size);
    return f;
}

ordered_json run_case(std::string name, const std::vector<VideoPacket>& packets) {
    ordered_json c;
    c["name"] = std::move(name);
    c["packets"] = ordered_json::array();
    for (const auto& p : packets) c["packets"].push_back(hex(encode_packet(p)));
    try {
        const auto result = reassemble(packets);
        if (const auto* f = std::get_if<Frame>(&result)) {
            c["expect"] = {{"kind", "frame"},
                           {"frame_id", f->frame_id},
                           {"frame_type", to_string(f->frame_type)},
                           {"payload_len", f->payload.size()},
                           {"payload_hex", hex(f->payload)}};
        } else {
            const auto& inc = std::get<Incomplete>(result);
            c["expect"] = {{"kind", "incomplete"}, {"frame_id", inc.frame_id}, {"have", inc.have}, {"count", inc.count}};
        }
    } catch (const Error& e) {
        c["expect"] = {{"kind", "error"}, {"code", to_string(e.code())}};
    }
    return c;
}

}  // namespace

std::string conformance_vectors_json() {
    std::mt19937_64 rng(0xC0FFEE);
    ordered_json doc;
    doc["version"] = 1;
    doc["header_bytes"] = kPacketHeaderBytes;
    doc["cases"] = ordered_json::array();
    auto& cases = doc["cases"];

    cases.push_back(run_case("empty_frame", chop(sample_frame(0, 0), 1024)));
    cases.push_back(run_case("single_packet", chop(sample_frame(1, 600), 1024)));
    cases.push_back(run_case("in_order", chop(sample_frame(2, 5000), 1024)));

    auto shuffled = chop(sample_frame(3, 5000), 700);
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    cases.push_back(run_case("shuffled", shuffled));

    auto dupes = chop(sample_frame(4, 3000), 1000);
    dupes.push_back(dupes[1]);
    dupes.insert(dupes.begin(), dupes[2]);
    cases.push_back(run_case("duplicates", dupes));

    auto missing = chop(sample_frame(5, 4000), 1000);
    missing.erase(missing.begin() + 2);
    cases.push_back(run_case("missing_packet", missing));

    auto mixed = chop(sample_frame(6, 2000), 1000);
    const auto other = chop(sample_frame(7, 2000), 1000);
    mixed.push_back(other[0]);
    cases.push_back(run_case("mixed_frames", mixed));

    auto inconsistent = chop(sample_frame(8, 3000), 1000);
    inconsistent[1].count = 4;
    inconsistent[1].index = 3;
    cases.push_back(run_case("inconsistent_count", inconsistent));

    auto conflicting = chop(sample_frame(9, 2000), 1000);
    auto bad = conflicting[0];
    bad.payload[30] ^= 0xFF;
    conflicting.push_back(bad);
    cases.push_back(run_case("conflicting_duplicate", conflicting));

    EncoderModel encoder;
    cases.push_back(run_case("nominal_key", chop(next_frame(encoder, 10, SimTime::from_ms(416.6)).frame, 8192)));
    cases.push_back(run_case("nominal_delta", chop(next_frame(encoder, 11, SimTime::from_ms(458.3)).frame, 8192)));

    doc["clicks"] = ordered_json::array();
    for (auto [u, v] : {std::pair{0.5, 0.5}, {0.0, 0.0}, {1.0, 1.0}, {0.25, 0.75}, {0.999, 0.001}}) {
        const PixelPoint p = map_click(u, v);
        doc["clicks"].push_back({{"u", u}, {"v", v}, {"x", p.x}, {"y", p.y}});
    }
    return doc.dump(2) + "\n";
}

}  // namespace paysim
