#include <algorithm>
#include <random>

#include <gtest/gtest.h>
#include <json.hpp>

#include "paysim/error.hpp"
#include "paysim/orchestrator.hpp"

using namespace paysim;
using K = SystemState::Kind;
using E = OrchestratorEvent::Kind;

namespace {

OrchestratorEvent ev(E kind, double uptime = 0.0, std::optional<InterfaceSet> ifaces = std::nullopt) {
    return OrchestratorEvent{kind, uptime, std::move(ifaces)};
}

std::vector<OrchestratorEvent> ready_chain(double uptime) {
    return {ev(E::SkyportStart, 0, InterfaceSet{"usb-serial-0", "eth0"}),
            ev(E::SkyportReady),
            ev(E::EportStart, 0, InterfaceSet{"onboard-serial", "usb-bulk"}),
            ev(E::EportBulkActive),
            ev(E::EportReady),
            ev(E::StreamRequest, uptime),
            ev(E::StreamRequest, uptime)};
}

}  // namespace

TEST(Gate, ThresholdIsInclusive) {
    EXPECT_EQ(gate_streaming(179.999), GateDecision::Gated);
    EXPECT_EQ(gate_streaming(180.0), GateDecision::Allowed);
    EXPECT_EQ(gate_streaming(10.0, 5.0), GateDecision::Allowed);
    EXPECT_DOUBLE_EQ(kDefaultMinUptimeS, 180.0);
}

TEST(Orchestrator, NominalChainReachesStreaming) {
    const auto trace = enforce_order(ready_chain(240));
    const std::vector<K> expected{K::Boot,        K::SkyportStarting, K::SkyportReady, K::EportStarting,
                                  K::EportStarting, K::EportReady,  K::StreamGated,  K::Streaming};
    ASSERT_EQ(trace.size(), expected.size());
    for (std::size_t i = 0; i < trace.size(); ++i) EXPECT_EQ(trace[i].kind, expected[i]) << i;
}

TEST(Orchestrator, StreamingWaitsForUptime) {
    auto events = ready_chain(179.0);
    const auto trace = enforce_order(events);
    EXPECT_EQ(trace.back(), (SystemState{K::StreamGated, std::nullopt}));
    Orchestrator o;
    for (const auto& e : events) o.apply(e);
    EXPECT_EQ(o.apply(ev(E::StreamRequest, 180.0)).kind, K::Streaming);
}

TEST(Orchestrator, ForcedStreamBelowGateFaults) {
    auto events = ready_chain(240);
    events.pop_back();
    events.pop_back();
    events.push_back(ev(E::StreamForce, 179.0));
    EXPECT_EQ(enforce_order(events).back(), SystemState::fault(FaultReason::GateViolation));

    events.back() = ev(E::StreamForce, 200.0);
    events.push_back(ev(E::StreamForce, 200.0));
    EXPECT_EQ(enforce_order(events).back().kind, K::Streaming);
}

TEST(Orchestrator, EportBeforeSkyportBreaksBulkChannel) {
    const std::vector<OrchestratorEvent> bulk_first{ev(E::EportStart), ev(E::EportBulkActive), ev(E::SkyportStart)};
    EXPECT_EQ(enforce_order(bulk_first).back(), SystemState::fault(FaultReason::BulkChannelBroken));
    const std::vector<OrchestratorEvent> sky_late{ev(E::EportStart), ev(E::SkyportStart)};
    EXPECT_EQ(enforce_order(sky_late).back(), SystemState::fault(FaultReason::BulkChannelBroken));
    const std::vector<OrchestratorEvent> other{ev(E::EportStart), ev(E::EportReady)};
    EXPECT_EQ(enforce_order(other).back(), SystemState::fault(FaultReason::IllegalTransition));
}

TEST(Orchestrator, SharedSerialAdapterCrashes) {
    const std::vector<OrchestratorEvent> events{ev(E::SkyportStart, 0, InterfaceSet{"ttyUSB0", "eth0"}),
                                                ev(E::SkyportReady),
                                                ev(E::EportStart, 0, InterfaceSet{"ttyUSB0", "usb-bulk"})};
    EXPECT_EQ(enforce_order(events).back(), SystemState::fault(FaultReason::SharedSerialCrash));
}

TEST(Orchestrator, DecoupleCheckReportsEachSharing) {
    EXPECT_TRUE(decouple_check({"a", "b"}, {"c", "d"}).ok());
    const auto serial = decouple_check({"a", "b"}, {"a", "d"});
    EXPECT_TRUE(serial.shared_serial);
    EXPECT_FALSE(serial.shared_high_bw);
    const auto hb = decouple_check({"a", "b"}, {"c", "b"});
    EXPECT_FALSE(hb.shared_serial);
    EXPECT_TRUE(hb.shared_high_bw);
    EXPECT_FALSE(hb.ok());
}

TEST(Orchestrator, OutOfOrderEventsAreIllegal) {
    const std::vector<std::vector<OrchestratorEvent>> cases{
        {ev(E::SkyportReady)},
        {ev(E::StreamRequest, 500)},
        {ev(E::SkyportStart), ev(E::EportStart)},
        {ev(E::SkyportStart), ev(E::SkyportReady), ev(E::SkyportStart)},
    };
    for (const auto& c : cases) {
        EXPECT_EQ(enforce_order(c).back(), SystemState::fault(FaultReason::IllegalTransition));
    }
}

TEST(Orchestrator, FaultIsAbsorbingUntilRestart) {
    Orchestrator o;
    o.apply(ev(E::NegotiationFailed));
    EXPECT_EQ(o.state(), SystemState::fault(FaultReason::NegotiationFailed));
    for (const auto& e : ready_chain(240)) EXPECT_TRUE(o.apply(e).is_fault());
    EXPECT_EQ(o.apply(ev(E::Restart)), SystemState{});
    EXPECT_FALSE(o.skyport_ready());
    for (const auto& e : ready_chain(240)) o.apply(e);
    EXPECT_EQ(o.state().kind, K::Streaming);
}

TEST(Orchestrator, FuzzedSequencesStayWellFormed) {
    std::mt19937_64 rng(17);
    const std::vector<E> kinds{E::SkyportStart,  E::SkyportReady, E::EportStart, E::EportBulkActive,
                               E::EportReady,    E::StreamRequest, E::StreamForce, E::NegotiationFailed};
    for (int n = 0; n < 2000; ++n) {
        std::vector<OrchestratorEvent> events;
        for (std::size_t i = 0, len = 1 + rng() % 10; i < len; ++i) {
            events.push_back(ev(kinds[rng() % kinds.size()], static_cast<double>(rng() % 400)));
        }
        const auto trace = enforce_order(events);
        ASSERT_EQ(trace.size(), events.size() + 1);
        EXPECT_EQ(trace.front(), SystemState{});
        bool faulted = false;
        for (const auto& s : trace) {
            EXPECT_EQ(s.reason.has_value(), s.is_fault());
            if (faulted) {
                EXPECT_EQ(s, trace.back());
            }
            faulted = faulted || s.is_fault();
        }
    }
}

TEST(Orchestrator, Names) {
    EXPECT_EQ(to_string(SystemState{K::EportReady, std::nullopt}), "EPORT_READY");
    EXPECT_EQ(to_string(SystemState::fault(FaultReason::BulkChannelBroken)), "FAULT(BulkChannelBroken)");
    for (auto k : {E::SkyportStart, E::SkyportReady, E::EportStart, E::EportBulkActive, E::EportReady,
                   E::StreamRequest, E::StreamForce, E::NegotiationFailed, E::Restart}) {
        EXPECT_EQ(parse_event_kind(to_string(k)), k);
    }
    EXPECT_FALSE(parse_event_kind("launch"));
}

TEST(Metrics, NearestRankPercentiles) {
    RunLog run;
    for (int i = 1; i <= 20; ++i) {
        FrameOutcome f;
        f.frame_id = static_cast<std::uint64_t>(i);
        f.bytes = 100;
        f.capture_ts = SimTime::from_ms(i * 10.0);
        f.completed_at = f.capture_ts + static_cast<double>(21 - i);  // latencies 20..1
        run.frames.push_back(f);
    }
    run.stream_duration_s = 2.0;
    const auto r = collect_metrics(run);
    ASSERT_TRUE(r.latency_ms);
    EXPECT_DOUBLE_EQ(r.latency_ms->mean, 10.5);
    EXPECT_DOUBLE_EQ(r.latency_ms->p50, 10.0);  // rank ceil(0.5 * 20) = 10
    EXPECT_DOUBLE_EQ(r.latency_ms->p95, 19.0);  // rank ceil(0.95 * 20) = 19
    EXPECT_EQ(r.frames_sent, 20u);
    EXPECT_EQ(r.frames_delivered, 20u);
    EXPECT_DOUBLE_EQ(r.bitrate_bps, 20 * 100 * 8 / 2.0);
}

TEST(Metrics, SingleSampleAndDrops) {
    RunLog run;
    run.frames.push_back({0, 500, SimTime{}, SimTime::from_ms(7)});
    run.frames.push_back({1, 500, SimTime{}, std::nullopt});
    run.stream_duration_s = 1.0;
    const auto r = collect_metrics(run);
    EXPECT_DOUBLE_EQ(r.latency_ms->p50, 7.0);
    EXPECT_DOUBLE_EQ(r.latency_ms->p95, 7.0);
    EXPECT_EQ(r.frames_dropped, 1u);
    EXPECT_DOUBLE_EQ(r.bitrate_bps, 4000.0);
}

TEST(Metrics, EmptyRunThrows) {
    try {
        collect_metrics({});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::EmptyRun);
    }
}

TEST(Metrics, JsonShapeIsFixed) {
    RunLog run;
    run.frames.push_back({0, 500, SimTime{}, std::nullopt});
    run.stream_duration_s = 1.0;
    run.faults = {FaultReason::BulkChannelBroken};
    const std::string text = to_json(collect_metrics(run));
    ASSERT_FALSE(text.empty());
    EXPECT_EQ(text.back(), '\n');
    const auto j = nlohmann::ordered_json::parse(text);
    std::vector<std::string> keys;
    for (auto it = j.begin(); it != j.end(); ++it) keys.push_back(it.key());
    EXPECT_EQ(keys, (std::vector<std::string>{"latency_ms", "frames", "bitrate_bps", "faults"}));
    EXPECT_TRUE(j["latency_ms"]["mean"].is_null());
    EXPECT_TRUE(j["latency_ms"]["p95"].is_null());
    EXPECT_EQ(j["frames"]["sent"], 1);
    EXPECT_EQ(j["frames"]["delivered"], 0);
    EXPECT_EQ(j["frames"]["dropped"], 1);
    EXPECT_EQ(j["faults"], nlohmann::json::array({"BulkChannelBroken"}));
}
