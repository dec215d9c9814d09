#include "paysim/quirks.hpp"

#include <random>

#include "paysim/drone.hpp"
#include "paysim/eport_app.hpp"
#include "paysim/error.hpp"
#include "paysim/orchestrator.hpp"
#include "paysim/skyport_app.hpp"

namespace paysim {

namespace {

using EK = OrchestratorEvent::Kind;

QuirkCheck check(std::string id, std::string name, bool passed, std::string detail) {
    return {std::move(id), std::move(name), passed, std::move(detail)};
}

OrchestratorEvent ev(EK kind, double uptime_s, std::optional<InterfaceSet> ifaces = std::nullopt) {
    return {kind, uptime_s, std::move(ifaces)};
}

std::vector<OrchestratorEvent> ready_chain(double uptime_s) {
    return {ev(EK::SkyportStart, uptime_s, InterfaceSet{"usb-serial-0", "eth0"}), ev(EK::SkyportReady, uptime_s),
            ev(EK::EportStart, uptime_s, InterfaceSet{"onboard-serial", "usb-bulk"}),
            ev(EK::EportBulkActive, uptime_s), ev(EK::EportReady, uptime_s)};
}

std::vector<QuirkCheck> uptime_gate() {
    std::vector<QuirkCheck> out;
    const bool at_179 = gate_streaming(179.0) == GateDecision::Gated;
    const bool at_180 = gate_streaming(180.0) == GateDecision::Allowed;
    out.push_back(check("Q1", "gate at 179 s", at_179, std::string(to_string(gate_streaming(179.0)))));
    out.push_back(check("Q1", "gate at 180 s", at_180, std::string(to_string(gate_streaming(180.0)))));

    auto last_state = [](double uptime, EK kind) {
        auto events = ready_chain(uptime);
        events.push_back(ev(kind, uptime));
        events.push_back(ev(kind, uptime));
        return enforce_order(events).back();
    };
    const SystemState early = last_state(179.0, EK::StreamRequest);
    const SystemState late = last_state(180.0, EK::StreamRequest);
    out.push_back(check("Q1", "stream request at 179 s stays gated",
                        early.kind == SystemState::Kind::StreamGated, to_string(early)));
    out.push_back(check("Q1", "stream request at 180 s streams", late.kind == SystemState::Kind::Streaming,
                        to_string(late)));
    const SystemState forced = last_state(179.0, EK::StreamForce);
    out.push_back(check("Q1", "forced stream at 179 s faults",
                        forced == SystemState::fault(FaultReason::GateViolation), to_string(forced)));
    return out;
}

std::vector<QuirkCheck> start_order() {
    std::vector<QuirkCheck> out;

    {
        const std::vector<OrchestratorEvent> events{ev(EK::EportStart, 200.0, InterfaceSet{"onboard-serial", "usb-bulk"}),
                                                    ev(EK::EportBulkActive, 200.0),
                                                    ev(EK::SkyportStart, 200.0, InterfaceSet{"usb-serial-0", "eth0"})};
        const auto trace = enforce_order(events);
        out.push_back(check("Q2", "E-port bulk before SkyPort faults the trace",
                            trace.back() == SystemState::fault(FaultReason::BulkChannelBroken),
                            to_string(trace.back())));
    }
    {
        const auto trace = enforce_order(ready_chain(200.0));
        bool clean = trace.back().kind == SystemState::Kind::EportReady;
        for (const auto& s : trace) clean = clean && !s.is_fault();
        out.push_back(check("Q2", "SkyPort first runs clean", clean, to_string(trace.back())));
    }

    EportConfig eport;
    eport.video_plan = {CameraSource::RgbMain, CameraSource::StereoDown};
    const SkyportConfig skyport;

    {
        SimClock clock;
        Drone drone(DroneConfig{}, clock);
        auto app = EportApp::start(eport, drone);
        clock.advance_to(SimTime::from_ms(500));
        app.poll_feeds(clock.now());
        SkyportApp::start(skyport, drone);
        bool all_faulted = !app.pipes().empty();
        for (const auto& pipe : app.pipes()) all_faulted = all_faulted && pipe.state() == PipeState::Faulted;
        bool raised = false;
        clock.advance_to(SimTime::from_ms(1000));
        try {
            app.poll_feeds(clock.now());
        } catch (const Error& e) {
            raised = e.code() == ErrorCode::PipeFaulted;
        }
        out.push_back(check("Q2", "SkyPort negotiation breaks active E-port pipes", all_faulted && raised,
                            all_faulted ? "pipes FAULTED" : "pipes still usable"));
    }
    {
        SimClock clock;
        Drone drone(DroneConfig{}, clock);
        SkyportApp::start(skyport, drone);
        auto app = EportApp::start(eport, drone);
        clock.advance_to(SimTime::from_s(2));
        const FeedHealth h = app.close_feeds(clock.now());
        const bool ok = h.rgb.frames_received > 0 && h.stereo.frames_received > 0 && h.rgb.frames_dropped == 0 &&
                        h.stereo.frames_dropped == 0;
        out.push_back(check("Q2", "reversed order delivers both feeds", ok,
                            "rgb " + std::to_string(h.rgb.frames_received) + ", stereo " +
                                std::to_string(h.stereo.frames_received)));
    }
    return out;
}

std::vector<QuirkCheck> stereo_requires_bulk() {
    std::vector<QuirkCheck> out;
    constexpr int kSchedules = 200;
    std::mt19937_64 rng(0x5eed0003);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * static_cast<double>(rng() >> 11) * 0x1.0p-53; };

    int stereo_rejected = 0;
    for (int i = 0; i < kSchedules; ++i) {
        DroneConfig cfg;
        cfg.profile = (rng() & 1) ? DroneProfile::m350() : DroneProfile::m30();
        cfg.eport_network_link.latency_ms = uniform(0.5, 30.0);
        cfg.eport_network_link.seed = rng();
        SimClock clock;
        Drone drone(cfg, clock);
        clock.advance_to(SimTime::from_ms(uniform(0.0, 10000.0)));
        if (rng() & 1) SkyportApp::start(SkyportConfig{}, drone);

        EportConfig eport;
        eport.high_bw = HighBandwidth::Network;
        eport.descriptor.bulk_pipe_count = cfg.profile.bulk_pipe_count;
        eport.serial_link.latency_ms = uniform(0.1, 10.0);
        eport.serial_link.seed = rng();
        if (rng() & 1) eport.topic_plan.push_back({Topic::Pose, uniform(1.0, 200.0)});
        switch (rng() % 3) {
            case 0: eport.video_plan = {CameraSource::StereoDown}; break;
            case 1: eport.video_plan = {CameraSource::RgbMain, CameraSource::StereoDown}; break;
            default: eport.video_plan = {CameraSource::StereoDown, CameraSource::RgbMain}; break;
        }
        try {
            EportApp::start(eport, drone);
        } catch (const Error& e) {
            if (e.code() == ErrorCode::StereoRequiresBulk) ++stereo_rejected;
        }
    }
    out.push_back(check("Q3", "stereo over NETWORK rejected in every schedule", stereo_rejected == kSchedules,
                        std::to_string(stereo_rejected) + "/" + std::to_string(kSchedules)));

    SimClock clock;
    Drone drone(DroneConfig{}, clock);
    EportConfig eport;
    eport.video_plan = {CameraSource::StereoDown};
    auto app = EportApp::start(eport, drone);
    clock.advance_to(SimTime::from_s(1));
    const FeedHealth h = app.close_feeds(clock.now());
    out.push_back(check("Q3", "stereo over BULK delivers frames", h.stereo.frames_received > 0 && h.misrouted == 0,
                        std::to_string(h.stereo.frames_received) + " stereo frames"));
    return out;
}

}  // namespace

std::vector<QuirkCheck> run_quirk_suite() {
    std::vector<QuirkCheck> all;
    for (auto&& group : {uptime_gate(), start_order(), stereo_requires_bulk()}) {
        all.insert(all.end(), group.begin(), group.end());
    }
    return all;
}

}  // namespace paysim
