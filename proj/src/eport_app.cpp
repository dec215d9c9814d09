#include "paysim/eport_app.hpp"

#include <algorithm>

#include "paysim/bytes.hpp"
#include "paysim/error.hpp"

namespace paysim {

namespace {

constexpr int kControlAttempts = 3;
constexpr double kControlTimeoutMs = 100.0;

LinkProfile reverse_direction(LinkProfile p) {
    p.seed = derive_seed(p.seed, 1);
    return p;
}

}  // namespace

ControlClient::ControlClient(Drone& drone, SessionId session, const std::string& device, const LinkProfile& link)
    : drone_(&drone),
      session_(session),
      uplink_(device + ":tx", link),
      downlink_(device + ":rx", reverse_direction(link)) {}

Bytes ControlClient::call(control::MessageType type, ByteView payload) {
    const SimTime start = drone_->clock().now();
    const SerialFrame request{static_cast<std::uint8_t>(type), uplink_.allocate_seq(), Bytes(payload.begin(), payload.end())};

    SimTime t = start;
    for (int attempt = 0; attempt < kControlAttempts; ++attempt) {
        if (attempt > 0) ++retries_;
        const auto up = uplink_.send_frame(request, t);
        if (!up) {
            t = t + kControlTimeoutMs;
            continue;
        }
        std::optional<SimTime> down;
        for (const auto& frame : uplink_.receive(*up)) {
            down = downlink_.send(static_cast<std::uint8_t>(control::MessageType::Reply),
                                  drone_->handle_control(session_, frame), *up);
        }
        if (!down) {
            t = t + kControlTimeoutMs;
            continue;
        }
        for (const auto& frame : downlink_.receive(*down)) {
            const auto reply = control::decode_reply(frame.payload);
            if (reply.request_seq != request.seq) continue;
            last_rtt_ms_ = *down - start;
            control::raise_if_error(reply);
            return reply.body;
        }
        t = t + kControlTimeoutMs;
    }
    throw Error(ErrorCode::LinkTimeout, "no reply after " + std::to_string(kControlAttempts) + " attempts");
}

EportApp::EportApp(const EportConfig& config, Drone& drone, EventLog* log)
    : config_(config), drone_(&drone), log_(log) {}

EportApp EportApp::start(const EportConfig& config, Drone& drone, EventLog* log) {
    EportApp app(config, drone, log);
    app.bring_up();
    return app;
}

void EportApp::log(std::string_view event, const nlohmann::ordered_json& fields) {
    if (log_) log_->emit(drone_->clock().now(), "eport", event, fields);
}

void EportApp::bring_up() {
    const bool wants_stereo = std::ranges::find(config_.video_plan, CameraSource::StereoDown) != config_.video_plan.end();
    if (config_.high_bw == HighBandwidth::Bulk && wants_stereo && config_.descriptor.bulk_pipe_count < 2) {
        throw Error(ErrorCode::BulkProvisionFailed,
                    "stereo needs two FunctionFS instances, descriptor declares " +
                        std::to_string(config_.descriptor.bulk_pipe_count));
    }

    try {
        session_ = drone_->negotiate(PortKind::Eport, config_.descriptor, config_.high_bw);
    } catch (const Error& e) {
        throw Error(ErrorCode::NegotiationFailed, std::string(to_string(e.code())) + ": " + e.detail());
    }
    running_ = true;
    log("negotiated", {{"port", "EPORT"},
                       {"serial", config_.serial_device},
                       {"high_bw", to_string(config_.high_bw)},
                       {"vendor_id", config_.descriptor.vendor_id},
                       {"product_id", config_.descriptor.product_id}});

    if (config_.high_bw == HighBandwidth::Bulk) {
        try {
            drone_->activate_bulk(session_);
        } catch (const Error& e) {
            stop();
            throw Error(ErrorCode::BulkProvisionFailed, e.detail());
        }
        log("bulk_active", {{"pipes", drone_->bulk_pipes(session_).size()}});
    }

    control_.emplace(*drone_, session_, config_.serial_device, config_.serial_link);
    try {
        for (const auto& plan : config_.topic_plan) subscribe(plan.topic, plan.frequency_hz);
        for (auto source : config_.video_plan) {
            ByteWriter w;
            w.u8(static_cast<std::uint8_t>(source));
            control_->call(control::MessageType::RequestVideo, w.take());
            log("video_requested", {{"source", to_string(source)}});
        }
    } catch (...) {
        stop();
        throw;
    }
}

SubscriptionId EportApp::subscribe(Topic topic, double frequency_hz) {
    ByteWriter w;
    w.u8(static_cast<std::uint8_t>(topic)).f64(frequency_hz);
    const Bytes body = control_->call(control::MessageType::Subscribe, w.take());
    ByteReader r(body);
    const SubscriptionId id{r.u32()};
    subscriptions_.push_back(id);
    log("subscribed", {{"topic", to_string(topic)}, {"hz", frequency_hz}});
    return id;
}

void EportApp::ingest(std::optional<CameraSource> expected, const Delivery& d) {
    const auto header = read_test_card(d.bytes);
    if (!header || header->source == VideoSource::PiDesktop) {
        ++health_.misrouted;
        return;
    }
    const CameraSource source =
        header->source == VideoSource::RgbMain ? CameraSource::RgbMain : CameraSource::StereoDown;
    if (expected && *expected != source) {
        ++health_.misrouted;
        return;
    }
    auto& counters = health_.feed(source);
    const std::uint64_t next = counters.last_frame_id ? *counters.last_frame_id + 1 : 0;
    if (header->frame_id < next) {
        ++counters.duplicates;
        return;
    }
    counters.frames_dropped += header->frame_id - next;
    ++counters.frames_received;
    counters.last_frame_id = header->frame_id;
    counters.last_timestamp = header->capture_ts;
}

const FeedHealth& EportApp::poll_feeds(SimTime until) {
    if (!running_) throw Error(ErrorCode::UnknownSession, "E-port application is not running");
    drone_->pump_video(until);

    auto pipes = drone_->bulk_pipes(session_);
    for (const auto& pipe : pipes) {
        if (pipe.state() == PipeState::Faulted) {
            log("pipe_faulted", {{"pipe", pipe.id()}});
            throw Error(ErrorCode::PipeFaulted, "bulk pipe " + std::to_string(pipe.id()) + " is FAULTED");
        }
    }
    for (auto& pipe : pipes) {
        const CameraSource expected = pipe.id() == 0 ? CameraSource::RgbMain : CameraSource::StereoDown;
        for (const auto& d : pipe.read(EndpointRole::Input, until)) ingest(expected, d);
    }
    if (auto* net = drone_->network_channel(session_)) {
        for (const auto& d : net->receive(until)) ingest(std::nullopt, d);
    }
    return health_;
}

const FeedHealth& EportApp::close_feeds(SimTime until) {
    for (auto source : config_.video_plan) drone_->stop_video(session_, source);
    SimTime drain = until;
    for (const auto& pipe : drone_->bulk_pipes(session_)) {
        drain = std::max(drain, pipe.last_delivery(EndpointRole::Input).value_or(drain));
    }
    if (const auto* net = drone_->network_channel(session_)) drain = std::max(drain, net->queue().last_delivery().value_or(drain));
    poll_feeds(drain);
    for (auto source : config_.video_plan) {
        auto& counters = health_.feed(source);
        const std::uint64_t emitted = drone_->frames_emitted(session_, source);
        const std::uint64_t seen = counters.last_frame_id ? *counters.last_frame_id + 1 : 0;
        if (emitted > seen) counters.frames_dropped += emitted - seen;
        log("feed_closed", {{"source", to_string(source)},
                            {"received", counters.frames_received},
                            {"dropped", counters.frames_dropped}});
    }
    return health_;
}

std::vector<TelemetrySample> EportApp::poll_telemetry(SimTime until) {
    std::vector<TelemetrySample> out;
    for (auto id : subscriptions_) {
        auto samples = drone_->poll_telemetry(id, until);
        out.insert(out.end(), std::make_move_iterator(samples.begin()), std::make_move_iterator(samples.end()));
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const TelemetrySample& a, const TelemetrySample& b) { return a.timestamp < b.timestamp; });
    return out;
}

DroneState EportApp::command_velocity(const VelocityCommand& cmd, double duration_s) {
    ByteWriter w;
    w.f64(cmd.vx).f64(cmd.vy).f64(cmd.vz).f64(cmd.yaw_rate).f64(duration_s);
    const Bytes body = control_->call(control::MessageType::CommandVelocity, w.take());
    ByteReader r(body);
    DroneState s;
    s.position = {r.f64(), r.f64(), r.f64()};
    s.velocity = {r.f64(), r.f64(), r.f64()};
    s.yaw = r.f64();
    s.gimbal = {r.f64(), r.f64(), r.f64()};
    s.uptime_s = r.f64();
    return s;
}

GimbalAttitude EportApp::command_gimbal(const GimbalAttitude& attitude) {
    ByteWriter w;
    w.f64(attitude.pitch).f64(attitude.roll).f64(attitude.yaw);
    const Bytes body = control_->call(control::MessageType::CommandGimbal, w.take());
    ByteReader r(body);
    return {r.f64(), r.f64(), r.f64()};
}

void EportApp::restart() {
    stop();
    health_ = {};
    subscriptions_.clear();
    bring_up();
    log("restarted");
}

void EportApp::stop() {
    if (!running_) return;
    drone_->release(session_);
    control_.reset();
    running_ = false;
    log("stopped");
}

}  // namespace paysim
