#include "paysim/scenario.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "paysim/error.hpp"

namespace paysim {

using nlohmann::json;

std::string_view to_string(ScenarioEventType type) noexcept {
    switch (type) {
        case ScenarioEventType::SkyportStart: return "skyport_start";
        case ScenarioEventType::EportStart: return "eport_start";
        case ScenarioEventType::StreamStart: return "stream_start";
        case ScenarioEventType::StreamForce: return "stream_force";
    }
    return "?";
}

void Scenario::reseed(std::uint64_t s) {
    seed = s;
    drone.bulk_link.seed = derive_seed(s, 1);
    drone.eport_network_link.seed = derive_seed(s, 2);
    drone.skyport_network_link.seed = derive_seed(s, 3);
    if (eport) eport->serial_link.seed = derive_seed(s, 4);
    if (skyport) {
        skyport->serial_link.seed = derive_seed(s, 5);
        skyport->encoder.seed = derive_seed(s, 6);
    }
}

namespace {

class Parser {
public:
    explicit Parser(std::string_view origin) : origin_(origin) {}

    [[noreturn]] void fail(const std::string& path, const std::string& what) const {
        throw Error(ErrorCode::InvalidScenario, origin_ + ": field '" + path + "': " + what);
    }

    static std::string join(const std::string& path, std::string_view key) {
        return path.empty() ? std::string(key) : path + "." + std::string(key);
    }

    void object(const json& j, const std::string& path, std::initializer_list<std::string_view> allowed) const {
        if (!j.is_object()) fail(path, "expected an object");
        for (const auto& [key, value] : j.items()) {
            if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) fail(join(path, key), "unknown field");
        }
    }

    double number(const json& j, const std::string& path, std::string_view key, double fallback) const {
        auto it = j.find(std::string(key));
        if (it == j.end()) return fallback;
        if (!it->is_number()) fail(join(path, key), "expected a number");
        const double v = it->get<double>();
        if (!std::isfinite(v)) fail(join(path, key), "must be finite");
        return v;
    }

    double required_number(const json& j, const std::string& path, std::string_view key) const {
        if (!j.contains(std::string(key))) fail(join(path, key), "is required");
        return number(j, path, key, 0.0);
    }

    std::uint64_t unsigned_int(const json& j, const std::string& path, std::string_view key, std::uint64_t fallback,
                               std::uint64_t max = UINT64_MAX) const {
        auto it = j.find(std::string(key));
        if (it == j.end()) return fallback;
        if (!it->is_number_unsigned() && !(it->is_number_integer() && it->get<std::int64_t>() >= 0)) {
            fail(join(path, key), "expected a nonnegative integer");
        }
        const auto v = it->get<std::uint64_t>();
        if (v > max) fail(join(path, key), "must be at most " + std::to_string(max));
        return v;
    }

    std::string string(const json& j, const std::string& path, std::string_view key, std::string fallback) const {
        auto it = j.find(std::string(key));
        if (it == j.end()) return fallback;
        if (!it->is_string()) fail(join(path, key), "expected a string");
        return it->get<std::string>();
    }

    bool boolean(const json& j, const std::string& path, std::string_view key, bool fallback) const {
        auto it = j.find(std::string(key));
        if (it == j.end()) return fallback;
        if (!it->is_boolean()) fail(join(path, key), "expected true or false");
        return it->get<bool>();
    }

    const json* child(const json& j, std::string_view key) const {
        auto it = j.find(std::string(key));
        return it == j.end() ? nullptr : &*it;
    }

    void link(const json& j, const std::string& path, LinkProfile& out) const {
        object(j, path, {"bandwidth_bps", "latency_ms", "loss_rate"});
        out.bandwidth_bps = number(j, path, "bandwidth_bps", out.bandwidth_bps);
        out.latency_ms = number(j, path, "latency_ms", out.latency_ms);
        out.loss_rate = number(j, path, "loss_rate", out.loss_rate);
        if (!(out.bandwidth_bps > 0.0)) fail(join(path, "bandwidth_bps"), "must be positive");
        if (!(out.latency_ms >= 0.0)) fail(join(path, "latency_ms"), "must be nonnegative");
        if (!(out.loss_rate >= 0.0 && out.loss_rate <= 1.0)) fail(join(path, "loss_rate"), "must lie in [0, 1]");
    }

    void identity(const json& j, const std::string& path, GadgetDescriptor& out, bool with_pipes) const {
        if (with_pipes) {
            object(j, path, {"vendor_id", "product_id", "bulk_pipe_count"});
        } else {
            object(j, path, {"vendor_id", "product_id"});
        }
        out.vendor_id = static_cast<std::uint16_t>(unsigned_int(j, path, "vendor_id", out.vendor_id, 0xFFFF));
        out.product_id = static_cast<std::uint16_t>(unsigned_int(j, path, "product_id", out.product_id, 0xFFFF));
        if (with_pipes) {
            out.bulk_pipe_count =
                static_cast<std::uint32_t>(unsigned_int(j, path, "bulk_pipe_count", out.bulk_pipe_count, 64));
        }
        try {
            out.validate();
        } catch (const Error& e) {
            fail(path, e.detail());
        }
    }

    Scenario parse(const json& root) const;

private:
    void parse_eport(const json& j, Scenario& s) const;
    void parse_skyport(const json& j, Scenario& s) const;
    void parse_encoder(const json& j, EncoderModel& enc) const;
    void parse_schedule(const json& root, Scenario& s) const;

    std::string origin_;
};

void Parser::parse_encoder(const json& j, EncoderModel& enc) const {
    const std::string path = "encoder";
    object(j, path, {"bitrate_bps", "fps", "key_to_delta_size_ratio", "encode_delay_ms", "deterministic", "jitter"});
    enc.bitrate_bps = number(j, path, "bitrate_bps", enc.bitrate_bps);
    enc.fps = number(j, path, "fps", enc.fps);
    enc.key_to_delta_size_ratio = number(j, path, "key_to_delta_size_ratio", enc.key_to_delta_size_ratio);
    enc.encode_delay_ms = number(j, path, "encode_delay_ms", enc.encode_delay_ms);
    enc.deterministic = boolean(j, path, "deterministic", enc.deterministic);
    enc.jitter = number(j, path, "jitter", enc.jitter);
    try {
        enc.validate();
    } catch (const Error& e) {
        fail(path, e.detail());
    }
}

void Parser::parse_eport(const json& j, Scenario& s) const {
    const std::string path = "eport";
    object(j, path,
           {"serial_device", "high_bw_device", "high_bw", "vendor_id", "product_id", "bulk_pipe_count", "topics",
            "video"});
    EportConfig cfg;
    cfg.descriptor.bulk_pipe_count = s.drone.profile.bulk_pipe_count;
    cfg.serial_device = string(j, path, "serial_device", cfg.serial_device);
    cfg.high_bw_device = string(j, path, "high_bw_device", cfg.high_bw_device);
    const std::string hb = string(j, path, "high_bw", "BULK");
    const auto parsed_hb = parse_high_bandwidth(hb);
    if (!parsed_hb) fail(join(path, "high_bw"), "expected BULK or NETWORK, got '" + hb + "'");
    cfg.high_bw = *parsed_hb;

    json ids = json::object();
    for (auto key : {"vendor_id", "product_id", "bulk_pipe_count"}) {
        if (j.contains(key)) ids[key] = j[key];
    }
    identity(ids, path, cfg.descriptor, true);

    if (const json* topics = child(j, "topics")) {
        if (!topics->is_array()) fail(join(path, "topics"), "expected an array");
        for (std::size_t i = 0; i < topics->size(); ++i) {
            const std::string tp = join(path, "topics") + "[" + std::to_string(i) + "]";
            const json& t = (*topics)[i];
            object(t, tp, {"topic", "hz"});
            const std::string name = string(t, tp, "topic", "");
            const auto topic = parse_topic(name);
            if (!topic) fail(join(tp, "topic"), "unknown topic '" + name + "'");
            const double hz = required_number(t, tp, "hz");
            if (!(hz > 0.0 && hz <= kMaxTopicRateHz)) fail(join(tp, "hz"), "must lie in (0, 200]");
            cfg.topic_plan.push_back({*topic, hz});
        }
    }
    if (const json* video = child(j, "video")) {
        if (!video->is_array()) fail(join(path, "video"), "expected an array");
        for (std::size_t i = 0; i < video->size(); ++i) {
            const std::string vp = join(path, "video") + "[" + std::to_string(i) + "]";
            if (!(*video)[i].is_string()) fail(vp, "expected a camera source name");
            const auto source = parse_camera_source((*video)[i].get<std::string>());
            if (!source) fail(vp, "unknown camera source '" + (*video)[i].get<std::string>() + "'");
            cfg.video_plan.push_back(*source);
        }
    }
    s.eport = std::move(cfg);
}

void Parser::parse_skyport(const json& j, Scenario& s) const {
    const std::string path = "skyport";
    object(j, path, {"serial_device", "high_bw_device", "vendor_id", "product_id"});
    SkyportConfig cfg;
    cfg.serial_device = string(j, path, "serial_device", cfg.serial_device);
    cfg.high_bw_device = string(j, path, "high_bw_device", cfg.high_bw_device);
    json ids = json::object();
    for (auto key : {"vendor_id", "product_id"}) {
        if (j.contains(key)) ids[key] = j[key];
    }
    identity(ids, path, cfg.descriptor, false);
    s.skyport = std::move(cfg);
}

void Parser::parse_schedule(const json& root, Scenario& s) const {
    auto timed_array = [&](std::string_view key, auto&& each) {
        const json* arr = child(root, key);
        if (!arr) return;
        if (!arr->is_array()) fail(std::string(key), "expected an array");
        for (std::size_t i = 0; i < arr->size(); ++i) {
            const std::string p = std::string(key) + "[" + std::to_string(i) + "]";
            const json& e = (*arr)[i];
            if (!e.is_object()) fail(p, "expected an object");
            const double t = required_number(e, p, "t");
            if (t < 0.0) fail(join(p, "t"), "must be nonnegative");
            each(e, p, t);
        }
    };

    timed_array("events", [&](const json& e, const std::string& p, double t) {
        object(e, p, {"t", "type"});
        const std::string type = string(e, p, "type", "");
        ScenarioEventType kind;
        if (type == "skyport_start") {
            kind = ScenarioEventType::SkyportStart;
        } else if (type == "eport_start") {
            kind = ScenarioEventType::EportStart;
        } else if (type == "stream_start") {
            kind = ScenarioEventType::StreamStart;
        } else if (type == "stream_force") {
            kind = ScenarioEventType::StreamForce;
        } else {
            fail(join(p, "type"), "unknown event type '" + type + "'");
        }
        const bool needs_eport = kind == ScenarioEventType::EportStart;
        if (needs_eport && !s.eport) fail(join(p, "type"), "eport_start without an 'eport' section");
        if (!needs_eport && !s.skyport) fail(join(p, "type"), type + " without a 'skyport' section");
        const bool is_start = kind == ScenarioEventType::SkyportStart || kind == ScenarioEventType::EportStart;
        if (is_start && std::ranges::any_of(s.events, [&](const ScenarioEvent& x) { return x.type == kind; })) {
            fail(join(p, "type"), type + " appears more than once");
        }
        s.events.push_back({t, kind});
    });

    timed_array("clicks", [&](const json& e, const std::string& p, double t) {
        object(e, p, {"t", "u", "v"});
        if (!s.skyport) fail(p, "clicks need a 'skyport' section");
        s.clicks.push_back({t, required_number(e, p, "u"), required_number(e, p, "v")});
    });

    timed_array("switches", [&](const json& e, const std::string& p, double t) {
        object(e, p, {"t", "source"});
        if (!s.skyport) fail(p, "switches need a 'skyport' section");
        const std::string name = string(e, p, "source", "");
        const auto source = parse_video_source(name);
        if (!source) fail(join(p, "source"), "unknown video source '" + name + "'");
        s.switches.push_back({t, *source});
    });

    std::ranges::stable_sort(s.events, {}, &ScenarioEvent::t_s);
    std::ranges::stable_sort(s.clicks, {}, &ScenarioClick::t_s);
    std::ranges::stable_sort(s.switches, {}, &ScenarioSwitch::t_s);
}

Scenario Parser::parse(const json& root) const {
    object(root, "",
           {"name", "seed", "drone_profile", "duration_s", "uptime_at_start_s", "min_uptime_s", "links", "encoder",
            "max_packet_bytes", "eport", "skyport", "expected_gadget", "initial_state", "telemetry_overrides",
            "events", "clicks", "switches"});
    Scenario s;
    s.name = string(root, "", "name", "");
    if (!root.contains("seed")) fail("seed", "is required");
    const std::uint64_t seed = unsigned_int(root, "", "seed", 0);

    const std::string profile = string(root, "", "drone_profile", "M350");
    if (profile == "M350") {
        s.drone.profile = DroneProfile::m350();
    } else if (profile == "M30") {
        s.drone.profile = DroneProfile::m30();
    } else {
        fail("drone_profile", "expected M350 or M30, got '" + profile + "'");
    }

    s.duration_s = required_number(root, "", "duration_s");
    if (!(s.duration_s > 0.0)) fail("duration_s", "must be positive");
    s.uptime_at_start_s = number(root, "", "uptime_at_start_s", 0.0);
    if (s.uptime_at_start_s < 0.0) fail("uptime_at_start_s", "must be nonnegative");
    s.min_uptime_s = number(root, "", "min_uptime_s", kDefaultMinUptimeS);
    if (s.min_uptime_s < 0.0) fail("min_uptime_s", "must be nonnegative");

    if (const json* links = child(root, "links")) {
        object(*links, "links", {"bulk", "eport_network", "skyport_network", "eport_serial", "skyport_serial"});
        if (const json* l = child(*links, "bulk")) link(*l, "links.bulk", s.drone.bulk_link);
        if (const json* l = child(*links, "eport_network")) link(*l, "links.eport_network", s.drone.eport_network_link);
        if (const json* l = child(*links, "skyport_network")) {
            link(*l, "links.skyport_network", s.drone.skyport_network_link);
        }
    }

    if (const json* e = child(root, "eport")) parse_eport(*e, s);
    if (const json* k = child(root, "skyport")) parse_skyport(*k, s);

    if (const json* links = child(root, "links")) {
        if (const json* l = child(*links, "eport_serial")) {
            if (!s.eport) fail("links.eport_serial", "declared without an 'eport' section");
            link(*l, "links.eport_serial", s.eport->serial_link);
        }
        if (const json* l = child(*links, "skyport_serial")) {
            if (!s.skyport) fail("links.skyport_serial", "declared without a 'skyport' section");
            link(*l, "links.skyport_serial", s.skyport->serial_link);
        }
    }
    if (const json* enc = child(root, "encoder")) {
        if (!s.skyport) fail("encoder", "declared without a 'skyport' section");
        parse_encoder(*enc, s.skyport->encoder);
    }
    if (root.contains("max_packet_bytes")) {
        if (!s.skyport) fail("max_packet_bytes", "declared without a 'skyport' section");
        const auto max = unsigned_int(root, "", "max_packet_bytes", 0, 65535);
        if (max == 0) fail("max_packet_bytes", "must be at least 1");
        s.skyport->max_packet_bytes = static_cast<std::size_t>(max);
    }

    if (const json* g = child(root, "expected_gadget")) {
        object(*g, "expected_gadget", {"eport", "skyport"});
        if (const json* e = child(*g, "eport")) {
            GadgetDescriptor d{0, 0, 1};
            identity(*e, "expected_gadget.eport", d, false);
            s.drone.expected_eport_gadget = d;
        }
        if (const json* k = child(*g, "skyport")) {
            GadgetDescriptor d{0, 0, 1};
            identity(*k, "expected_gadget.skyport", d, false);
            s.drone.expected_skyport_gadget = d;
        }
    }

    if (const json* st = child(root, "initial_state")) {
        object(*st, "initial_state", {"position", "yaw", "uptime_s"});
        if (const json* pos = child(*st, "position")) {
            if (!pos->is_array() || pos->size() != 3 || !std::ranges::all_of(*pos, [](const json& v) {
                    return v.is_number();
                })) {
                fail("initial_state.position", "expected [x, y, z]");
            }
            s.drone.initial_state.position = {(*pos)[0].get<double>(), (*pos)[1].get<double>(),
                                              (*pos)[2].get<double>()};
        }
        s.drone.initial_state.yaw = number(*st, "initial_state", "yaw", 0.0);
        s.drone.initial_state.uptime_s = number(*st, "initial_state", "uptime_s", 0.0);
    }

    if (const json* t = child(root, "telemetry_overrides")) {
        const std::string p = "telemetry_overrides";
        object(*t, p,
               {"initial_altitude_agl_m", "climb_rate_mps", "obstacle_distance_m", "home_lat_deg", "home_lon_deg",
                "home_alt_m"});
        auto& o = s.drone.telemetry;
        o.initial_altitude_agl_m = number(*t, p, "initial_altitude_agl_m", o.initial_altitude_agl_m);
        o.climb_rate_mps = number(*t, p, "climb_rate_mps", o.climb_rate_mps);
        o.obstacle_distance_m = number(*t, p, "obstacle_distance_m", o.obstacle_distance_m);
        o.home_lat_deg = number(*t, p, "home_lat_deg", o.home_lat_deg);
        o.home_lon_deg = number(*t, p, "home_lon_deg", o.home_lon_deg);
        o.home_alt_m = number(*t, p, "home_alt_m", o.home_alt_m);
    }

    parse_schedule(root, s);
    s.reseed(seed);
    return s;
}

}  // namespace

Scenario parse_scenario(std::string_view json_text, std::string_view origin) {
    json root;
    try {
        root = json::parse(json_text);
    } catch (const json::parse_error& e) {
        const std::size_t byte = std::min<std::size_t>(e.byte == 0 ? 0 : e.byte - 1, json_text.size());
        const auto prefix = json_text.substr(0, byte);
        const auto line = std::ranges::count(prefix, '\n') + 1;
        const auto last_nl = prefix.rfind('\n');
        const auto column = last_nl == std::string_view::npos ? byte + 1 : byte - last_nl;
        throw Error(ErrorCode::InvalidScenario, std::string(origin) + ":" + std::to_string(line) + ":" +
                                                    std::to_string(column) + ": syntax error");
    }
    return Parser(origin).parse(root);
}

Scenario load_scenario(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::Io, path.string() + ": cannot open file");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_scenario(text.str(), path.string());
}

}  // namespace paysim
