#include <filesystem>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

#include "paysim/error.hpp"
#include "paysim/scenario.hpp"
#include "paysim/simulation.hpp"

using namespace paysim;

namespace {

const std::filesystem::path kScenarios{PAYSIM_SCENARIO_DIR};

std::string parse_error(std::string_view text) {
    try {
        parse_scenario(text, "t.json");
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::InvalidScenario);
        return e.detail();
    }
    ADD_FAILURE() << "scenario was accepted";
    return {};
}

const char* kMinimal = R"({"seed": 1, "duration_s": 1,
  "skyport": {}, "events": [{"t": 0, "type": "skyport_start"}]})";

}  // namespace

TEST(ScenarioParse, MinimalDocumentUsesDefaults) {
    const auto s = parse_scenario(kMinimal);
    EXPECT_EQ(s.seed, 1u);
    EXPECT_DOUBLE_EQ(s.min_uptime_s, 180.0);
    EXPECT_EQ(s.drone.profile.name, "M350");
    EXPECT_TRUE(s.skyport);
    EXPECT_FALSE(s.eport);
    ASSERT_EQ(s.events.size(), 1u);
    EXPECT_EQ(s.events[0].type, ScenarioEventType::SkyportStart);
}

TEST(ScenarioParse, SyntaxErrorNamesLine) {
    const auto detail = parse_error("{\n  \"seed\": 1,\n  oops\n}");
    EXPECT_EQ(detail.rfind("t.json:3:", 0), 0u) << detail;
    EXPECT_NE(detail.find("syntax error"), std::string::npos);
}

TEST(ScenarioParse, SchemaErrorsNameTheField) {
    EXPECT_NE(parse_error(R"({"duration_s": 1})").find("'seed'"), std::string::npos);
    EXPECT_NE(parse_error(R"({"seed": 1})").find("'duration_s'"), std::string::npos);
    EXPECT_NE(parse_error(R"({"seed": 1, "duration_s": 0})").find("'duration_s'"), std::string::npos);
    EXPECT_NE(parse_error(R"({"seed": 1, "duration_s": 1, "colour": "red"})").find("'colour'"), std::string::npos);
    EXPECT_NE(parse_error(R"({"seed": 1, "duration_s": 1, "links": {"bulk": {"loss_rate": 2}}})")
                  .find("'links.bulk.loss_rate'"),
              std::string::npos);
    EXPECT_NE(parse_error(R"({"seed": 1, "duration_s": 1, "drone_profile": "M300"})").find("'drone_profile'"),
              std::string::npos);
    EXPECT_NE(parse_error(R"({"seed": 1, "duration_s": 1, "max_packet_bytes": 70000})").find("max_packet_bytes"),
              std::string::npos);
}

TEST(ScenarioParse, EventsNeedTheirSection) {
    const auto detail = parse_error(R"({"seed": 1, "duration_s": 1, "events": [{"t": 0, "type": "eport_start"}]})");
    EXPECT_NE(detail.find("events"), std::string::npos) << detail;
    parse_error(R"({"seed": 1, "duration_s": 1, "skyport": {}, "events": [
        {"t": 0, "type": "skyport_start"}, {"t": 1, "type": "skyport_start"}]})");
    parse_error(R"({"seed": 1, "duration_s": 1, "skyport": {}, "events": [{"t": 0, "type": "launch"}]})");
}

TEST(ScenarioParse, ReseedDerivesEveryStream) {
    auto a = parse_scenario(kMinimal);
    auto b = parse_scenario(kMinimal);
    a.reseed(5);
    b.reseed(5);
    EXPECT_EQ(a.seed, 5u);
    EXPECT_EQ(a.drone.bulk_link.seed, b.drone.bulk_link.seed);
    EXPECT_EQ(a.drone.bulk_link.seed, derive_seed(5, 1));
    EXPECT_EQ(a.drone.skyport_network_link.seed, derive_seed(5, 3));
    b.reseed(6);
    EXPECT_NE(a.drone.bulk_link.seed, b.drone.bulk_link.seed);
}

TEST(ScenarioParse, BundledScenariosLoad) {
    for (const char* name : {"nominal.json", "eport-first.json", "cold-boot.json", "m30-lossy.json"}) {
        EXPECT_NO_THROW(load_scenario(kScenarios / name)) << name;
    }
    try {
        load_scenario(kScenarios / "missing.json");
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::Io);
    }
}

TEST(SimulationRun, NominalDeliversEveryFrameAtBudget) {
    Simulation sim(load_scenario(kScenarios / "nominal.json"));
    sim.run();
    EXPECT_EQ(sim.exit_code(), 0);
    EXPECT_EQ(sim.orchestrator().state().kind, SystemState::Kind::Streaming);
    const auto r = sim.report();
    EXPECT_EQ(r.frames_sent, 240u);
    EXPECT_EQ(r.frames_delivered, 240u);
    ASSERT_TRUE(r.latency_ms);
    EXPECT_NEAR(r.latency_ms->mean, 300.5018, 1e-3);
    EXPECT_NEAR(r.bitrate_bps, 1.2e6, 1.2e4);
    EXPECT_TRUE(r.faults.empty());

    const auto* ep = sim.eport();
    ASSERT_TRUE(ep);
    EXPECT_EQ(ep->health().rgb.frames_dropped, 0u);
    EXPECT_GT(ep->health().rgb.frames_received, 0u);

    const auto& clicks = sim.skyport()->desktop().clicks();
    ASSERT_EQ(clicks.size(), 2u);
    EXPECT_EQ(clicks[0].at, (PixelPoint{320, 240}));
    EXPECT_EQ(clicks[1].at, map_click(0.1, 0.9));
}

TEST(SimulationRun, EportFirstFaults) {
    Simulation sim(load_scenario(kScenarios / "eport-first.json"));
    sim.run();
    EXPECT_EQ(sim.exit_code(), 2);
    ASSERT_FALSE(sim.faults().empty());
    EXPECT_EQ(sim.faults().front(), FaultReason::BulkChannelBroken);
    EXPECT_EQ(sim.orchestrator().state(), SystemState::fault(FaultReason::BulkChannelBroken));
    const auto j = nlohmann::json::parse(sim.report_json());
    EXPECT_EQ(j["faults"][0], "BulkChannelBroken");
}

TEST(SimulationRun, ColdBootWaitsForGate) {
    Simulation sim(load_scenario(kScenarios / "cold-boot.json"));
    sim.run();
    EXPECT_EQ(sim.exit_code(), 0);
    ASSERT_FALSE(sim.frames().empty());
    const double first_capture_uptime = sim.payload_uptime_s(sim.frames().front().capture_ts);
    EXPECT_GE(first_capture_uptime, sim.scenario().min_uptime_s);
    EXPECT_LT(first_capture_uptime, sim.scenario().min_uptime_s + 0.1);
    EXPECT_EQ(sim.report().frames_sent,
              static_cast<std::uint64_t>(std::llround(sim.scenario().duration_s * 24.0)));
}

TEST(SimulationRun, LossyLinkDropsSomeFrames) {
    Simulation sim(load_scenario(kScenarios / "m30-lossy.json"));
    sim.run();
    const auto r = sim.report();
    EXPECT_GT(r.frames_dropped, 0u);
    EXPECT_LT(r.frames_dropped, r.frames_sent / 5);
    EXPECT_EQ(r.frames_sent, r.frames_delivered + r.frames_dropped);
}

TEST(SimulationRun, ReplayIsByteIdentical) {
    for (const char* name : {"nominal.json", "eport-first.json", "cold-boot.json", "m30-lossy.json"}) {
        Simulation a(load_scenario(kScenarios / name));
        Simulation b(load_scenario(kScenarios / name));
        a.run();
        b.run();
        EXPECT_EQ(a.report_json(), b.report_json()) << name;
        EXPECT_EQ(a.log().text(), b.log().text()) << name;
    }
}

TEST(SimulationRun, DifferentSeedChangesLossyOutcome) {
    auto base = load_scenario(kScenarios / "m30-lossy.json");
    auto other = base;
    other.reseed(base.seed + 1);
    Simulation a(base), b(other);
    a.run();
    b.run();
    EXPECT_NE(a.log().text(), b.log().text());
}

TEST(SimulationRun, UntilStopsEarly) {
    Simulation sim(load_scenario(kScenarios / "nominal.json"), RunOptions{4.0, false, false});
    sim.run();
    EXPECT_TRUE(sim.done());
    EXPECT_LE(sim.now().seconds(), 4.0 + 1e-9);
    const auto r = sim.report();
    EXPECT_LT(r.frames_sent, 240u);
    EXPECT_GT(r.frames_sent, 0u);
}

TEST(SimulationRun, EventLogIsNdjson) {
    Simulation sim(load_scenario(kScenarios / "nominal.json"));
    sim.run();
    ASSERT_FALSE(sim.log().lines().empty());
    double last_t = -1.0;
    for (const auto& line : sim.log().lines()) {
        const auto j = nlohmann::ordered_json::parse(line);
        auto it = j.begin();
        ASSERT_EQ(it.key(), "t_ms");
        EXPECT_EQ((++it).key(), "app");
        EXPECT_EQ((++it).key(), "event");
        EXPECT_GE(j["t_ms"].get<double>(), last_t);
        last_t = j["t_ms"].get<double>();
    }
    EXPECT_NE(sim.log().lines().back().find("run_complete"), std::string::npos);
}

TEST(SimulationRun, ClickNeedsSkyport) {
    Simulation sim(parse_scenario(R"({"seed": 1, "duration_s": 1, "skyport": {},
        "events": [{"t": 1, "type": "skyport_start"}]})"));
    try {
        sim.click(0.5, 0.5);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), ErrorCode::UnknownSession);
    }
    sim.step_until(SimTime::from_s(1.5));
    EXPECT_EQ(sim.click(0.5, 0.5), (PixelPoint{320, 240}));
}
