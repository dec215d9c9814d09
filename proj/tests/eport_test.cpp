#include <algorithm>
#include <cmath>

#include <gtest/gtest.h>

#include "oracles.hpp"
#include "paysim/eport_app.hpp"
#include "paysim/error.hpp"

using namespace paysim;

namespace {

template <typename F>
ErrorCode code_of(F&& f) {
    try {
        f();
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "expected an Error";
    return ErrorCode::Io;
}

EportConfig both_feeds() {
    EportConfig cfg;
    cfg.video_plan = {CameraSource::RgbMain, CameraSource::StereoDown};
    cfg.topic_plan = {{Topic::Pose, 50.0}, {Topic::AltitudeAgl, 10.0}};
    return cfg;
}

}  // namespace

TEST(EportApp, StartActivatesPipesAndSubscribes) {
    SimClock clock;
    Drone drone({}, clock);
    EventLog log;
    auto app = EportApp::start(both_feeds(), drone, &log);
    EXPECT_TRUE(app.running());
    ASSERT_EQ(app.pipes().size(), 2u);
    for (const auto& pipe : app.pipes()) EXPECT_EQ(pipe.state(), PipeState::Active);
    clock.advance_to(SimTime::from_s(1));
    const auto samples = app.poll_telemetry(SimTime::from_s(1));
    EXPECT_EQ(samples.size(), 60u);
    for (std::size_t i = 1; i < samples.size(); ++i) EXPECT_LE(samples[i - 1].timestamp, samples[i].timestamp);
    EXPECT_FALSE(log.lines().empty());
    EXPECT_NE(log.lines().front().find("\"negotiated\""), std::string::npos);
}

TEST(EportApp, LosslessFeedsDeliverEveryFrame) {
    SimClock clock;
    Drone drone({}, clock);
    auto app = EportApp::start(both_feeds(), drone);
    clock.advance_to(SimTime::from_s(3));
    const auto& health = app.close_feeds(clock.now());
    for (auto src : {CameraSource::RgbMain, CameraSource::StereoDown}) {
        const auto emitted = drone.frames_emitted(app.session(), src);
        EXPECT_EQ(emitted, 73u);  // slots at k * 1000/24 ms for k = 0..72
        EXPECT_EQ(health.feed(src).frames_received, emitted);
        EXPECT_EQ(health.feed(src).frames_dropped, 0u);
    }
    EXPECT_EQ(health.misrouted, 0u);
}

TEST(EportApp, DropCountsReplaySeededLoss) {
    DroneConfig dc;
    dc.bulk_link.loss_rate = 0.1;
    dc.bulk_link.seed = 777;
    SimClock clock;
    Drone drone(dc, clock);
    auto app = EportApp::start(both_feeds(), drone);
    clock.advance_to(SimTime::from_s(20));
    const auto& health = app.close_feeds(clock.now());

    for (auto src : {CameraSource::RgbMain, CameraSource::StereoDown}) {
        const std::uint64_t pipe = src == CameraSource::RgbMain ? 0 : 1;
        const auto emitted = drone.frames_emitted(app.session(), src);
        const auto drops = oracle::bernoulli_drops(oracle::splitmix_stream_seed(777, 2 * pipe), 0.1, emitted);
        const auto expected = static_cast<std::uint64_t>(std::count(drops.begin(), drops.end(), true));
        EXPECT_GT(expected, 0u);
        EXPECT_EQ(health.feed(src).frames_dropped, expected);
        EXPECT_EQ(health.feed(src).frames_received, emitted - expected);
    }
}

TEST(EportApp, NetworkTransportCarriesRgbOnly) {
    SimClock clock;
    Drone drone({}, clock);
    EportConfig cfg;
    cfg.high_bw = HighBandwidth::Network;
    cfg.video_plan = {CameraSource::StereoDown};
    EXPECT_EQ(code_of([&] { EportApp::start(cfg, drone); }), ErrorCode::StereoRequiresBulk);
    EXPECT_FALSE(drone.session_on(PortKind::Eport));

    cfg.video_plan = {CameraSource::RgbMain};
    auto app = EportApp::start(cfg, drone);
    clock.advance_to(SimTime::from_s(1));
    const auto& health = app.close_feeds(clock.now());
    EXPECT_EQ(health.rgb.frames_received, 25u);
    EXPECT_EQ(health.rgb.frames_dropped, 0u);
}

TEST(EportApp, StereoNeedsTwoFunctionFsInstances) {
    SimClock clock;
    Drone drone({}, clock);
    EportConfig cfg = both_feeds();
    cfg.descriptor.bulk_pipe_count = 1;
    EXPECT_EQ(code_of([&] { EportApp::start(cfg, drone); }), ErrorCode::BulkProvisionFailed);
}

TEST(EportApp, NegotiationErrorsAreWrapped) {
    DroneConfig dc;
    dc.expected_eport_gadget = GadgetDescriptor{0x1234, 0x5678, 2};
    SimClock clock;
    Drone drone(dc, clock);
    EXPECT_EQ(code_of([&] { EportApp::start(both_feeds(), drone); }), ErrorCode::NegotiationFailed);
}

TEST(EportApp, SkyportNegotiationMakesPollFault) {
    SimClock clock;
    Drone drone({}, clock);
    auto app = EportApp::start(both_feeds(), drone);
    clock.advance_to(SimTime::from_s(1));
    app.poll_feeds(clock.now());
    const FeedHealth before = app.health();
    drone.negotiate(PortKind::Skyport, {0x1D6B, 0x0105, 1}, HighBandwidth::Network);
    clock.advance_to(SimTime::from_s(2));
    EXPECT_EQ(code_of([&] { app.poll_feeds(clock.now()); }), ErrorCode::PipeFaulted);
    EXPECT_EQ(app.health(), before);
}

TEST(EportApp, RestartRecoversFaultedPipes) {
    SimClock clock;
    Drone drone({}, clock);
    auto app = EportApp::start(both_feeds(), drone);
    for (auto& pipe : app.pipes()) pipe.fault();
    EXPECT_EQ(code_of([&] { app.poll_feeds(SimTime::from_s(1)); }), ErrorCode::PipeFaulted);
    app.restart();
    for (const auto& pipe : app.pipes()) EXPECT_EQ(pipe.state(), PipeState::Active);
    clock.advance_to(SimTime::from_s(1));
    EXPECT_NO_THROW(app.poll_feeds(clock.now()));
}

TEST(ControlClient, RoundTripCoversBothDirections) {
    SimClock clock;
    Drone drone({}, clock);
    auto app = EportApp::start({}, drone);
    const auto s = app.command_velocity({1.0, 0.0, 0.0, 0.0}, 2.0);
    EXPECT_NEAR(s.position.x, 2.0, 1e-9);
    // Request and reply frames each pay 1 ms latency plus their serialization.
    EXPECT_GT(app.control().last_round_trip_ms(), 2.0);
    EXPECT_LT(app.control().last_round_trip_ms(), 5.0);
    EXPECT_EQ(app.control().retries(), 0u);
}

TEST(ControlClient, DeadLinkTimesOut) {
    SimClock clock;
    Drone drone({}, clock);
    EportConfig cfg = both_feeds();
    cfg.serial_link.loss_rate = 1.0;
    EXPECT_EQ(code_of([&] { EportApp::start(cfg, drone); }), ErrorCode::LinkTimeout);
    EXPECT_FALSE(drone.session_on(PortKind::Eport));
}

TEST(ControlClient, LossyLinkRetriesWithoutReexecuting) {
    SimClock clock;
    Drone drone({}, clock);
    EportConfig cfg;
    cfg.serial_link.loss_rate = 0.3;
    cfg.serial_link.seed = 99;
    auto app = EportApp::start(cfg, drone);
    int ok = 0;
    int timeouts = 0;
    for (int i = 0; i < 200; ++i) {
        try {
            const auto s = app.command_velocity({0.5, 0.0, 0.0, 0.0}, 0.2);
            ++ok;
            EXPECT_NEAR(s.position.x, drone.state().position.x, 1e-12);
        } catch (const Error& e) {
            ASSERT_EQ(e.code(), ErrorCode::LinkTimeout);
            ++timeouts;
        }
    }
    // Each request moves the drone at most once however often it is retried.
    const double executed = drone.state().position.x / 0.1;
    EXPECT_NEAR(executed, std::round(executed), 1e-6);
    EXPECT_GE(std::round(executed), ok);
    EXPECT_LE(std::round(executed), 200);
    EXPECT_EQ(ok + timeouts, 200);
    EXPECT_GT(app.control().retries(), 0u);
    EXPECT_GT(ok, 150);
}

TEST(ControlClient, DroneErrorsPropagate) {
    SimClock clock;
    Drone drone({}, clock);
    auto app = EportApp::start({}, drone);
    EXPECT_EQ(code_of([&] { app.command_gimbal({1.0, 0.0, 0.0}); }), ErrorCode::OutOfRange);
    EXPECT_EQ(code_of([&] { app.subscribe(Topic::Pose, 500.0); }), ErrorCode::RateTooHigh);
    const auto applied = app.command_gimbal({-0.5, 0.0, 0.1});
    EXPECT_DOUBLE_EQ(applied.pitch, -0.5);
    EXPECT_DOUBLE_EQ(applied.yaw, 0.1);
}
