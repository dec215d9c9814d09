#include "paysim/simulation.hpp"

#include <algorithm>
#include <cmath>

#include "paysim/control_protocol.hpp"
#include "paysim/error.hpp"

namespace paysim {

namespace {

constexpr double kFeedPollPeriodMs = 1000.0;

nlohmann::ordered_json counters_json(const FeedCounters& c) {
    return {{"received", c.frames_received}, {"dropped", c.frames_dropped}, {"duplicates", c.duplicates}};
}

}  // namespace

Simulation::Simulation(Scenario scenario, RunOptions options)
    : scenario_(std::move(scenario)),
      options_(options),
      scheduler_(clock_),
      drone_(scenario_.drone, clock_),
      orchestrator_(scenario_.min_uptime_s) {
    trace_.push_back(orchestrator_.state());
    schedule_scenario();
}

void Simulation::schedule_scenario() {
    auto at_s = [](double t_s) { return SimTime::from_s(t_s); };

    for (const auto& e : scenario_.events) {
        ++scenario_actions_left_;
        scheduler_.at(at_s(e.t_s), [this, type = e.type] {
            if (done_) return;
            switch (type) {
                case ScenarioEventType::SkyportStart: start_skyport(); break;
                case ScenarioEventType::EportStart: start_eport(); break;
                case ScenarioEventType::StreamStart: request_stream(false); break;
                case ScenarioEventType::StreamForce: request_stream(true); break;
            }
            scenario_action_done();
        });
    }
    for (const auto& c : scenario_.clicks) {
        ++scenario_actions_left_;
        scheduler_.at(at_s(c.t_s), [this, c] {
            if (done_) return;
            try {
                click(c.u, c.v);
            } catch (const Error& e) {
                log_.emit(now(), "cli", "click_rejected", {{"u", c.u}, {"v", c.v}, {"reason", e.what()}});
            }
            scenario_action_done();
        });
    }
    for (const auto& s : scenario_.switches) {
        ++scenario_actions_left_;
        scheduler_.at(at_s(s.t_s), [this, s] {
            if (done_) return;
            try {
                switch_source(s.source);
            } catch (const Error& e) {
                log_.emit(now(), "cli", "switch_rejected", {{"reason", e.what()}});
            }
            scenario_action_done();
        });
    }
    schedule_poll(SimTime::from_ms(kFeedPollPeriodMs));
    if (options_.until_s) {
        scheduler_.at(SimTime::from_s(*options_.until_s), [this] {
            if (!done_) finish();
        });
    }
    if (scenario_actions_left_ == 0) {
        finish_scheduled_ = true;
        scheduler_.at(SimTime{}, [this] {
            if (!done_) finish();
        });
    }
}

void Simulation::scenario_action_done() {
    --scenario_actions_left_;
    if (scenario_actions_left_ == 0 && phase_ == StreamPhase::Idle && !finish_scheduled_ && !done_) {
        finish_scheduled_ = true;
        scheduler_.at(now(), [this] {
            if (!done_) finish();
        });
    }
}

void Simulation::schedule_poll(SimTime at) {
    scheduler_.at(at, [this, at] {
        if (done_) return;
        poll_feeds();
        if (!done_) schedule_poll(at + kFeedPollPeriodMs);
    });
}

void Simulation::apply(OrchestratorEvent::Kind kind, std::optional<InterfaceSet> ifaces) {
    const SystemState before = orchestrator_.state();
    const SystemState& after = orchestrator_.apply({kind, payload_uptime_s(now()), std::move(ifaces)});
    trace_.push_back(after);
    log_.emit(now(), "orchestrator", "transition",
              {{"event", to_string(kind)}, {"from", to_string(before)}, {"to", to_string(after)}});
    if (after.is_fault() && !before.is_fault()) raise_fault(*after.reason, std::string(to_string(kind)));
}

void Simulation::raise_fault(FaultReason reason, const std::string& detail) {
    faults_.push_back(reason);
    log_.emit(now(), "orchestrator", "fault", {{"reason", to_string(reason)}, {"detail", detail}});
    finish();
}

void Simulation::start_skyport() {
    const auto& cfg = *scenario_.skyport;
    apply(OrchestratorEvent::Kind::SkyportStart, InterfaceSet{cfg.serial_device, cfg.high_bw_device});
    if (done_) return;
    try {
        skyport_.emplace(SkyportApp::start(cfg, drone_, &log_));
    } catch (const Error& e) {
        log_.emit(now(), "skyport", "start_failed", {{"error", e.what()}});
        apply(OrchestratorEvent::Kind::NegotiationFailed);
        return;
    }
    apply(OrchestratorEvent::Kind::SkyportReady);
}

void Simulation::start_eport() {
    const auto& cfg = *scenario_.eport;
    apply(OrchestratorEvent::Kind::EportStart, InterfaceSet{cfg.serial_device, cfg.high_bw_device});
    if (done_) return;
    try {
        eport_.emplace(EportApp::start(cfg, drone_, &log_));
    } catch (const Error& e) {
        log_.emit(now(), "eport", "start_failed", {{"error", e.what()}});
        apply(OrchestratorEvent::Kind::NegotiationFailed);
        return;
    }
    if (cfg.high_bw == HighBandwidth::Bulk) {
        apply(OrchestratorEvent::Kind::EportBulkActive);
        if (done_) return;
    }
    apply(OrchestratorEvent::Kind::EportReady);
}

void Simulation::request_stream(bool force) {
    if (phase_ == StreamPhase::Streaming || phase_ == StreamPhase::Complete) return;
    const auto kind = force ? OrchestratorEvent::Kind::StreamForce : OrchestratorEvent::Kind::StreamRequest;
    apply(kind);
    if (done_) return;

    if (orchestrator_.state().kind == SystemState::Kind::StreamGated) {
        if (gate_streaming(payload_uptime_s(now()), scenario_.min_uptime_s) == GateDecision::Allowed) {
            apply(kind);
            if (done_) return;
        }
    }
    if (orchestrator_.state().kind == SystemState::Kind::Streaming) {
        begin_streaming();
        return;
    }
    if (phase_ == StreamPhase::Gated) return;
    phase_ = StreamPhase::Gated;
    const double open_s = scenario_.min_uptime_s - scenario_.uptime_at_start_s;
    log_.emit(now(), "orchestrator", "stream_gated",
              {{"uptime_s", payload_uptime_s(now())}, {"opens_at_ms", open_s * 1000.0}});
    auto retry = [this](auto&& self, SimTime at) -> void {
        scheduler_.at(at, [this, self, at] {
            if (done_ || phase_ != StreamPhase::Gated) return;
            if (gate_streaming(payload_uptime_s(now()), scenario_.min_uptime_s) == GateDecision::Gated) {
                self(self, std::max(at, now()) + 1.0);
                return;
            }
            apply(OrchestratorEvent::Kind::StreamRequest);
            if (!done_ && orchestrator_.state().kind == SystemState::Kind::Streaming) begin_streaming();
        });
    };
    retry(retry, SimTime::from_s(open_s));
}

void Simulation::begin_streaming() {
    phase_ = StreamPhase::Streaming;
    stream_t0_ = now();
    const double fps = scenario_.skyport->encoder.fps;
    frames_planned_ = options_.endless ? UINT64_MAX
                                       : static_cast<std::uint64_t>(std::llround(scenario_.duration_s * fps));
    const auto planned = options_.endless ? std::int64_t{-1} : static_cast<std::int64_t>(frames_planned_);
    log_.emit(now(), "skyport", "streaming", {{"uptime_s", payload_uptime_s(now())}, {"frames_planned", planned}});
    if (frames_planned_ == 0) {
        phase_ = StreamPhase::Complete;
        finish_scheduled_ = true;
        scheduler_.at(now(), [this] {
            if (!done_) finish();
        });
        return;
    }
    capture(0);
}

void Simulation::capture(std::uint64_t k) {
    if (done_) return;
    const EncodedFrame encoded = skyport_->capture(now());
    frames_.push_back({encoded.frame.frame_id, encoded.frame.payload.size(), encoded.frame.capture_ts, std::nullopt});
    skyport_->stream(std::span(&encoded, 1));

    if (k + 1 < frames_planned_) {
        const double interval = scenario_.skyport->encoder.frame_interval_ms();
        const SimTime next = stream_t0_ + static_cast<double>(k + 1) * interval;
        scheduler_.at(next, [this, k] { capture(k + 1); });
        return;
    }
    phase_ = StreamPhase::Complete;
    finish_scheduled_ = true;
    const SimTime last = std::max(now(), drone_.controller_last_delivery().value_or(now()));
    scheduler_.at(last, [this] {
        if (!done_) finish();
    });
}

void Simulation::poll_feeds() {
    if (eport_ && eport_->running()) {
        try {
            const FeedHealth& h = eport_->poll_feeds(now());
            log_.emit(now(), "eport", "feed_stats",
                      {{"rgb", counters_json(h.rgb)}, {"stereo", counters_json(h.stereo)}, {"misrouted", h.misrouted}});
            const auto samples = eport_->poll_telemetry(now());
            log_.emit(now(), "eport", "telemetry", {{"samples", samples.size()}});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PipeFaulted) throw;
            raise_fault(FaultReason::BulkChannelBroken, e.detail());
            return;
        }
    }
    if (skyport_) {
        log_.emit(now(), "controller", "stream_stats",
                  {{"frames_sent", frames_.size()}, {"frames_completed", receiver_.completed()}});
    }
}

void Simulation::finish() {
    if (done_) return;
    done_ = true;
    drain();
    if (eport_ && eport_->running() && faults_.empty()) {
        try {
            const FeedHealth& h = eport_->close_feeds(now());
            log_.emit(now(), "eport", "feed_stats",
                      {{"rgb", counters_json(h.rgb)}, {"stereo", counters_json(h.stereo)}, {"misrouted", h.misrouted}});
        } catch (const Error& e) {
            if (e.code() != ErrorCode::PipeFaulted) throw;
            faults_.push_back(FaultReason::BulkChannelBroken);
            log_.emit(now(), "orchestrator", "fault", {{"reason", "BulkChannelBroken"}, {"detail", e.detail()}});
        }
    }
    log_.emit(now(), "cli", "run_complete",
              {{"state", to_string(orchestrator_.state())},
               {"frames_sent", frames_.size()},
               {"frames_completed", receiver_.completed()},
               {"malformed_packets", malformed_packets_}});
}

void Simulation::drain() {
    if (skyport_) skyport_->service_uart(now());
    for (auto& d : drone_.controller_inbox(now())) {
        std::optional<Frame> frame;
        try {
            VideoPacket packet = decode_packet(d.bytes);
            if (options_.keep_wire) wire_.push_back(std::move(d.bytes));
            frame = receiver_.push(std::move(packet));
        } catch (const Error&) {
            ++malformed_packets_;
            continue;
        }
        if (!frame || frame->frame_id >= frames_.size()) continue;
        auto& outcome = frames_[frame->frame_id];
        if (const auto card = read_test_card(frame->payload)) outcome.capture_ts = card->capture_ts;
        outcome.completed_at = d.at;
    }
}

void Simulation::step_until(SimTime t) {
    while (!done_ && !scheduler_.empty() && scheduler_.next_time() <= t) {
        scheduler_.run_until(scheduler_.next_time());
        if (!done_) drain();
    }
    if (!done_ && clock_.now() < t) {
        clock_.advance_to(t);
        drain();
    }
}

void Simulation::run() {
    while (!done_) {
        if (scheduler_.empty()) {
            finish();
            break;
        }
        step_until(scheduler_.next_time());
    }
}

PixelPoint Simulation::click(double u, double v) {
    if (!skyport_) throw Error(ErrorCode::UnknownSession, "SkyPort application is not running");
    const PixelPoint at = map_click(u, v);
    skyport_->uart_inbound().send(static_cast<std::uint8_t>(control::MessageType::Click), encode_click(u, v), now());
    log_.emit(now(), "controller", "tap", {{"u", u}, {"v", v}});
    return at;
}

void Simulation::switch_source(VideoSource source) {
    if (!skyport_) throw Error(ErrorCode::UnknownSession, "SkyPort application is not running");
    skyport_->desktop().set_source(source);
    log_.emit(now(), "skyport", "source_switched", {{"source", to_string(source)}});
}

std::vector<Bytes> Simulation::take_wire_packets() {
    std::vector<Bytes> out;
    out.swap(wire_);
    return out;
}

MetricsReport Simulation::report() const {
    if (frames_.empty()) {
        MetricsReport empty;
        empty.faults = faults_;
        return empty;
    }
    RunLog run;
    run.frames = frames_;
    run.faults = faults_;
    run.stream_duration_s = static_cast<double>(frames_.size()) / scenario_.skyport->encoder.fps;
    return collect_metrics(run);
}

}  // namespace paysim
