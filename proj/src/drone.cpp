#include "paysim/drone.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "paysim/bytes.hpp"
#include "paysim/control_protocol.hpp"
#include "paysim/error.hpp"

namespace paysim {

std::string_view to_string(PortKind port) noexcept { return port == PortKind::Eport ? "EPORT" : "SKYPORT"; }

std::string_view to_string(Capability cap) noexcept {
    switch (cap) {
        case Capability::PowerTelemetry: return "POWER_TELEMETRY";
        case Capability::FlightPayloadControl: return "FLIGHT_PAYLOAD_CONTROL";
        case Capability::SensorAccess: return "SENSOR_ACCESS";
        case Capability::CameraFeeds: return "CAMERA_FEEDS";
        case Capability::StreamToController: return "STREAM_TO_CONTROLLER";
    }
    return "?";
}

std::string_view to_string(HighBandwidth hb) noexcept { return hb == HighBandwidth::Bulk ? "BULK" : "NETWORK"; }

std::string_view to_string(Topic topic) noexcept {
    switch (topic) {
        case Topic::Pose: return "POSE";
        case Topic::Gps: return "GPS";
        case Topic::AltitudeAgl: return "ALTITUDE_AGL";
        case Topic::ObstacleDistance: return "OBSTACLE_DISTANCE";
        case Topic::GimbalAttitude: return "GIMBAL_ATTITUDE";
    }
    return "?";
}

std::string_view to_string(CameraSource source) noexcept {
    return source == CameraSource::RgbMain ? "RGB_MAIN" : "STEREO_DOWN";
}

std::optional<Topic> parse_topic(std::string_view name) noexcept {
    for (auto t : {Topic::Pose, Topic::Gps, Topic::AltitudeAgl, Topic::ObstacleDistance, Topic::GimbalAttitude}) {
        if (to_string(t) == name) return t;
    }
    return std::nullopt;
}

std::optional<CameraSource> parse_camera_source(std::string_view name) noexcept {
    if (name == "RGB_MAIN") return CameraSource::RgbMain;
    if (name == "STEREO_DOWN") return CameraSource::StereoDown;
    return std::nullopt;
}

std::optional<HighBandwidth> parse_high_bandwidth(std::string_view name) noexcept {
    if (name == "BULK") return HighBandwidth::Bulk;
    if (name == "NETWORK") return HighBandwidth::Network;
    return std::nullopt;
}

std::size_t topic_arity(Topic topic) noexcept {
    switch (topic) {
        case Topic::Pose: return 6;
        case Topic::Gps: return 3;
        case Topic::AltitudeAgl: return 1;
        case Topic::ObstacleDistance: return 1;
        case Topic::GimbalAttitude: return 3;
    }
    return 0;
}

Drone::Drone(DroneConfig config, const SimClock& clock) : config_(std::move(config)), clock_(clock) {
    if (config_.profile.bulk_pipe_count == 0) {
        throw Error(ErrorCode::InvalidArgument, "drone profile needs at least one bulk pipe");
    }
    if (!(config_.cameras.fps > 0.0)) throw Error(ErrorCode::InvalidArgument, "camera fps must be positive");
    config_.bulk_link.validate();
    config_.eport_network_link.validate();
    config_.skyport_network_link.validate();
    DroneState initial = config_.initial_state;
    initial.uptime_s = 0.0;
    history_.emplace_back(clock_.now(), initial);
}

Drone::Session& Drone::session(SessionId id) {
    auto it = sessions_.find(static_cast<std::uint32_t>(id));
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no such session");
    return it->second;
}

const Drone::Session& Drone::session(SessionId id) const {
    auto it = sessions_.find(static_cast<std::uint32_t>(id));
    if (it == sessions_.end()) throw Error(ErrorCode::UnknownSession, "no such session");
    return it->second;
}

void Drone::require(const Session& s, Capability cap, std::string_view what) const {
    if (!check_capability(s.port, cap)) {
        throw Error(ErrorCode::CapabilityViolation, std::string(what) + " needs " + std::string(to_string(cap)) +
                                                         ", which " + std::string(to_string(s.port)) + " lacks");
    }
}

SessionId Drone::negotiate(PortKind port, const GadgetDescriptor& descriptor, HighBandwidth high_bw) {
    descriptor.validate();
    if (session_on(port)) throw Error(ErrorCode::PortBusy, std::string(to_string(port)) + " already bound");

    const auto& expected = port == PortKind::Eport ? config_.expected_eport_gadget : config_.expected_skyport_gadget;
    if (expected && !expected->same_identity(descriptor)) {
        throw Error(ErrorCode::IdentityMismatch, "gadget identity not recognised on " + std::string(to_string(port)));
    }
    for (const auto& [id, other] : sessions_) {
        if (other.descriptor.same_identity(descriptor)) {
            throw Error(ErrorCode::InvalidDescriptor, "gadget identity already in use by another session");
        }
    }
    if (port == PortKind::Skyport && high_bw != HighBandwidth::Network) {
        throw Error(ErrorCode::InvalidArgument, "SKYPORT high-bandwidth channel is network only");
    }
    if (high_bw == HighBandwidth::Bulk && descriptor.bulk_pipe_count > config_.profile.bulk_pipe_count) {
        throw Error(ErrorCode::BulkProvisionFailed,
                    config_.profile.name + " exposes " + std::to_string(config_.profile.bulk_pipe_count) +
                        " bulk pipe(s), descriptor asks for " + std::to_string(descriptor.bulk_pipe_count));
    }

    if (port == PortKind::Skyport) {
        // Negotiation reconfigures the high-bandwidth channel and breaks any
        // E-port bulk pipe that is already carrying data.
        pump_video(clock_.now());
        for (auto& [id, other] : sessions_) {
            if (other.port != PortKind::Eport) continue;
            for (auto& pipe : other.pipes) {
                if (pipe.state() == PipeState::Active) pipe.fault();
            }
        }
    }

    Session s{port, descriptor, high_bw, {}, std::nullopt, {}, std::nullopt, {}};
    if (high_bw == HighBandwidth::Bulk) {
        s.pipes = provision_bulk_pipes(descriptor, config_.bulk_link);
    } else {
        s.network.emplace(port == PortKind::Eport ? "rndis0" : "eth0",
                          port == PortKind::Eport ? config_.eport_network_link : config_.skyport_network_link);
    }
    const std::uint32_t id = next_session_++;
    sessions_.emplace(id, std::move(s));
    return SessionId{id};
}

void Drone::release(SessionId id) {
    session(id);
    std::erase_if(subscriptions_, [id](const auto& kv) { return kv.second.session == id; });
    sessions_.erase(static_cast<std::uint32_t>(id));
}

PortKind Drone::port_of(SessionId id) const { return session(id).port; }
HighBandwidth Drone::transport_of(SessionId id) const { return session(id).high_bw; }

std::optional<SessionId> Drone::session_on(PortKind port) const {
    for (const auto& [id, s] : sessions_) {
        if (s.port == port) return SessionId{id};
    }
    return std::nullopt;
}

std::span<BulkPipe> Drone::bulk_pipes(SessionId id) { return session(id).pipes; }

void Drone::activate_bulk(SessionId id) {
    auto& s = session(id);
    if (s.high_bw != HighBandwidth::Bulk) throw Error(ErrorCode::InvalidArgument, "session has no bulk pipes");
    for (auto& pipe : s.pipes) pipe.activate();
}

NetworkChannel* Drone::network_channel(SessionId id) {
    auto& s = session(id);
    return s.network ? &*s.network : nullptr;
}

SubscriptionId Drone::subscribe(SessionId id, Topic topic, double frequency_hz) {
    const auto& s = session(id);
    require(s, Capability::SensorAccess, "subscribe");
    if (!(frequency_hz > 0.0) || frequency_hz > kMaxTopicRateHz) {
        throw Error(ErrorCode::RateTooHigh, "topic rate must lie in (0, 200] Hz");
    }
    const std::uint32_t sub = next_subscription_++;
    subscriptions_.emplace(sub, Subscription{id, topic, frequency_hz, clock_.now()});
    return SubscriptionId{sub};
}

std::vector<TelemetrySample> Drone::poll_telemetry(SubscriptionId id, SimTime until) {
    auto it = subscriptions_.find(static_cast<std::uint32_t>(id));
    if (it == subscriptions_.end()) throw Error(ErrorCode::UnknownSession, "no such subscription");
    auto& sub = it->second;
    std::vector<TelemetrySample> out;
    for (;;) {
        const SimTime t = sub.start + static_cast<double>(sub.next_k) * 1000.0 / sub.frequency_hz;
        if (t > until) break;
        out.push_back(TelemetrySample{sub.topic, t, sample_values(sub.topic, t)});
        ++sub.next_k;
    }
    return out;
}

std::vector<double> Drone::sample_values(Topic topic, SimTime t) const {
    const DroneState s = state_at(t);
    const auto& tel = config_.telemetry;
    switch (topic) {
        case Topic::Pose:
            return {s.position.x, s.position.y, s.position.z, 0.0, 0.0, s.yaw};
        case Topic::Gps: {
            constexpr double kEarthRadius = 6378137.0;
            constexpr double kDeg = 180.0 / std::numbers::pi;
            const double lat0 = tel.home_lat_deg / kDeg;
            // Local frame: x north, y east, z up.
            return {tel.home_lat_deg + s.position.x / kEarthRadius * kDeg,
                    tel.home_lon_deg + s.position.y / (kEarthRadius * std::cos(lat0)) * kDeg,
                    tel.home_alt_m + s.position.z};
        }
        case Topic::AltitudeAgl:
            return {tel.initial_altitude_agl_m + tel.climb_rate_mps * t.seconds()};
        case Topic::ObstacleDistance:
            return {tel.obstacle_distance_m};
        case Topic::GimbalAttitude:
            return {s.gimbal.pitch, s.gimbal.roll, s.gimbal.yaw};
    }
    return {};
}

DroneState Drone::state_at(SimTime t) const {
    auto it = std::upper_bound(history_.begin(), history_.end(), t,
                               [](SimTime v, const auto& entry) { return v < entry.first; });
    DroneState s = it == history_.begin() ? history_.front().second : std::prev(it)->second;
    s.uptime_s = config_.initial_state.uptime_s + t.seconds();
    return s;
}

void Drone::record_state(DroneState s) {
    const SimTime now = clock_.now();
    if (!history_.empty() && history_.back().first == now) {
        history_.back().second = s;
    } else {
        history_.emplace_back(now, s);
    }
}

void Drone::request_video(SessionId id, CameraSource source) {
    auto& s = session(id);
    require(s, Capability::CameraFeeds, "request_video");
    if (source == CameraSource::StereoDown) {
        if (s.high_bw != HighBandwidth::Bulk) {
            throw Error(ErrorCode::StereoRequiresBulk, "stereo feeds are only served over USB bulk pipes");
        }
        if (s.pipes.size() < 2) {
            throw Error(ErrorCode::BulkProvisionFailed, "stereo needs a second bulk pipe");
        }
    }
    for (const auto& stream : s.streams) {
        if (stream.source == source) return;
    }
    s.streams.push_back(CameraStream{source, clock_.now()});
}

void Drone::pump_video(SimTime until) {
    const double period = 1000.0 / config_.cameras.fps;
    for (auto& [id, s] : sessions_) {
        for (auto& stream : s.streams) {
            const std::size_t size = std::max(kTestCardHeaderBytes, stream.source == CameraSource::RgbMain
                                                                         ? config_.cameras.rgb_frame_bytes
                                                                         : config_.cameras.stereo_frame_bytes);
            while (!stream.halted) {
                const SimTime t = stream.start + static_cast<double>(stream.slot) * period;
                if (t > until) break;
                ++stream.slot;
                if (s.high_bw == HighBandwidth::Network) {
                    Bytes payload = render_test_card({video_source_of(stream.source), stream.next_id, t}, size);
                    ++stream.next_id;
                    s.network->send(std::move(payload), t);
                    continue;
                }
                auto& pipe = s.pipes[stream.source == CameraSource::RgbMain ? 0 : 1];
                if (pipe.state() == PipeState::Faulted) {
                    stream.halted = true;
                    break;
                }
                if (pipe.state() != PipeState::Active) continue;
                Bytes payload = render_test_card({video_source_of(stream.source), stream.next_id, t}, size);
                ++stream.next_id;
                pipe.write(EndpointRole::Input, std::move(payload), t);
            }
        }
    }
}

void Drone::stop_video(SessionId id, CameraSource source) {
    pump_video(clock_.now());
    for (auto& stream : session(id).streams) {
        if (stream.source == source) stream.halted = true;
    }
}

std::uint64_t Drone::frames_emitted(SessionId id, CameraSource source) const {
    for (const auto& stream : session(id).streams) {
        if (stream.source == source) return stream.next_id;
    }
    return 0;
}

DroneState Drone::command_velocity(SessionId id, const VelocityCommand& cmd, double duration_s) {
    require(session(id), Capability::FlightPayloadControl, "command_velocity");
    if (!(duration_s >= 0.0) || !std::isfinite(duration_s)) {
        throw Error(ErrorCode::InvalidArgument, "duration must be a nonnegative number of seconds");
    }
    for (double v : {cmd.vx, cmd.vy, cmd.vz, cmd.yaw_rate}) {
        if (!std::isfinite(v)) throw Error(ErrorCode::OutOfRange, "velocity components must be finite");
    }
    DroneState s = state();
    constexpr double dt = 1.0 / kControlStepHz;
    const auto full_steps = static_cast<std::uint64_t>(std::floor(duration_s * kControlStepHz + 1e-9));
    const double remainder = duration_s - static_cast<double>(full_steps) * dt;
    auto step = [&](double h) {
        s.position.x += cmd.vx * h;
        s.position.y += cmd.vy * h;
        s.position.z += cmd.vz * h;
        s.yaw += cmd.yaw_rate * h;
    };
    for (std::uint64_t i = 0; i < full_steps; ++i) step(dt);
    if (remainder > 1e-12) step(remainder);
    s.velocity = {cmd.vx, cmd.vy, cmd.vz};
    record_state(s);
    return state();
}

GimbalAttitude Drone::command_gimbal(SessionId id, const GimbalAttitude& attitude) {
    require(session(id), Capability::FlightPayloadControl, "command_gimbal");
    if (!(attitude.pitch >= kGimbalPitchMin && attitude.pitch <= kGimbalPitchMax) ||
        !std::isfinite(attitude.roll) || !std::isfinite(attitude.yaw)) {
        throw Error(ErrorCode::OutOfRange, "gimbal pitch must lie in [-pi/2, +pi/6]");
    }
    DroneState s = state();
    s.gimbal = attitude;
    record_state(s);
    return s.gimbal;
}

std::optional<SimTime> Drone::forward_to_controller(SessionId id, Bytes wire, SimTime send_ts) {
    auto& s = session(id);
    require(s, Capability::StreamToController, "send_stream");
    return s.network->send(std::move(wire), send_ts);
}

std::vector<Delivery> Drone::controller_inbox(SimTime until) {
    auto sky = session_on(PortKind::Skyport);
    if (!sky) return {};
    return session(*sky).network->receive(until);
}

std::optional<SimTime> Drone::controller_last_delivery() const {
    auto sky = session_on(PortKind::Skyport);
    if (!sky) return std::nullopt;
    return session(*sky).network->queue().last_delivery();
}

double Drone::controller_serialization_ms(SessionId id, std::size_t bytes) const {
    const auto& s = session(id);
    require(s, Capability::StreamToController, "send_stream");
    return s.network->queue().link().serialization_ms(bytes);
}

Bytes Drone::handle_control(SessionId id, const SerialFrame& request) {
    auto& s = session(id);
    if (s.last_control_seq && *s.last_control_seq == request.seq) return s.last_reply;

    control::Reply reply;
    reply.request_seq = request.seq;
    try {
        reply.body = dispatch_control(id, request);
    } catch (const Error& e) {
        reply.error = e.code();
        reply.message = e.detail();
    }
    Bytes encoded = control::encode_reply(reply);
    auto& fresh = session(id);
    fresh.last_control_seq = request.seq;
    fresh.last_reply = encoded;
    return encoded;
}

Bytes Drone::dispatch_control(SessionId id, const SerialFrame& request) {
    ByteReader r(request.payload);
    ByteWriter w;
    switch (static_cast<control::MessageType>(request.msg_type)) {
        case control::MessageType::Subscribe: {
            const auto topic = r.u8();
            const double hz = r.f64();
            if (topic > static_cast<std::uint8_t>(Topic::GimbalAttitude)) {
                throw Error(ErrorCode::InvalidArgument, "unknown topic");
            }
            w.u32(static_cast<std::uint32_t>(subscribe(id, static_cast<Topic>(topic), hz)));
            break;
        }
        case control::MessageType::RequestVideo: {
            const auto source = r.u8();
            if (source > 1) throw Error(ErrorCode::InvalidArgument, "unknown camera source");
            request_video(id, static_cast<CameraSource>(source));
            break;
        }
        case control::MessageType::CommandVelocity: {
            VelocityCommand cmd{r.f64(), r.f64(), r.f64(), r.f64()};
            const double duration = r.f64();
            const DroneState s = command_velocity(id, cmd, duration);
            for (double v : {s.position.x, s.position.y, s.position.z, s.velocity.x, s.velocity.y, s.velocity.z,
                             s.yaw, s.gimbal.pitch, s.gimbal.roll, s.gimbal.yaw, s.uptime_s}) {
                w.f64(v);
            }
            break;
        }
        case control::MessageType::CommandGimbal: {
            GimbalAttitude a{r.f64(), r.f64(), r.f64()};
            const auto applied = command_gimbal(id, a);
            w.f64(applied.pitch).f64(applied.roll).f64(applied.yaw);
            break;
        }
        default:
            throw Error(ErrorCode::InvalidArgument, "unsupported control message " + std::to_string(request.msg_type));
    }
    return w.take();
}

}  // namespace paysim
