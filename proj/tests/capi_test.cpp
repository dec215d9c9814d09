#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>
#include <json.hpp>

#include "oracles.hpp"
#include "paysim/paysim.h"

namespace {

const std::filesystem::path kScenarios{PAYSIM_SCENARIO_DIR};

std::string scenario_path(const char* name) { return (kScenarios / name).string(); }

struct Scenario {
    paysim_scenario* ptr = nullptr;
    explicit Scenario(const char* name) { EXPECT_EQ(paysim_scenario_load(scenario_path(name).c_str(), &ptr), PAYSIM_OK); }
    ~Scenario() { paysim_scenario_free(ptr); }
};

std::string run_to_string(const paysim_scenario* s, const paysim_run_options* opts, paysim_run_outcome* out) {
    char* text = nullptr;
    EXPECT_EQ(paysim_run_to_string(s, opts, &text, out), PAYSIM_OK) << paysim_last_error();
    std::string copy = text ? text : "";
    paysim_string_free(text);
    return copy;
}

std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST(CApi, VersionAndStatusNames) {
    EXPECT_GT(std::strlen(paysim_version()), 0u);
    EXPECT_STREQ(paysim_status_name(PAYSIM_OK), "Ok");
    EXPECT_STREQ(paysim_status_name(PAYSIM_ERR_PIPE_FAULTED), "PipeFaulted");
    EXPECT_STREQ(paysim_status_name(PAYSIM_ERR_IO), "Io");
}

TEST(CApi, NominalRun) {
    Scenario s("nominal.json");
    paysim_run_outcome out{};
    const auto dir = std::filesystem::temp_directory_path() / "paysim_capi_test";
    std::filesystem::create_directories(dir);
    const auto report = dir / "report.json";
    const auto events = dir / "events.ndjson";
    paysim_run_options opts{};
    opts.events_path = events.c_str();
    ASSERT_EQ(paysim_run(s.ptr, report.c_str(), &opts, &out), PAYSIM_OK) << paysim_last_error();
    EXPECT_EQ(out.exit_code, 0);
    EXPECT_EQ(out.frames_sent, 240u);
    EXPECT_EQ(out.frames_delivered, 240u);
    EXPECT_NEAR(out.mean_latency_ms, 300.5018, 1e-3);
    EXPECT_NEAR(out.bitrate_bps, 1.2e6, 1.2e4);

    const auto j = nlohmann::json::parse(slurp(report));
    EXPECT_EQ(j["frames"]["sent"], 240);
    EXPECT_EQ(slurp(report), run_to_string(s.ptr, nullptr, nullptr));

    std::istringstream lines(slurp(events));
    std::string line;
    int count = 0;
    while (std::getline(lines, line)) {
        EXPECT_TRUE(nlohmann::json::accept(line));
        ++count;
    }
    EXPECT_GT(count, 10);
}

TEST(CApi, FaultRunReportsExitTwo) {
    Scenario s("eport-first.json");
    paysim_run_outcome out{};
    const std::string report = run_to_string(s.ptr, nullptr, &out);
    EXPECT_EQ(out.exit_code, 2);
    EXPECT_TRUE(std::isnan(out.mean_latency_ms));
    EXPECT_NE(report.find("BulkChannelBroken"), std::string::npos);
}

TEST(CApi, SeedOverrideIsDeterministic) {
    Scenario s("m30-lossy.json");
    paysim_run_options opts{};
    opts.has_seed = 1;
    opts.seed = 12345;
    paysim_run_outcome a{}, b{}, c{};
    const auto ra = run_to_string(s.ptr, &opts, &a);
    const auto rb = run_to_string(s.ptr, &opts, &b);
    EXPECT_EQ(ra, rb);
    const auto rc = run_to_string(s.ptr, nullptr, &c);
    EXPECT_EQ(a.frames_sent, c.frames_sent);
}

TEST(CApi, UntilTruncatesRun) {
    Scenario s("nominal.json");
    paysim_run_options opts{};
    opts.has_until = 1;
    opts.until_s = 4.0;
    paysim_run_outcome out{};
    run_to_string(s.ptr, &opts, &out);
    EXPECT_GT(out.frames_sent, 0u);
    EXPECT_LT(out.frames_sent, 240u);
}

TEST(CApi, InvalidScenarioCarriesDiagnostic) {
    paysim_scenario* s = nullptr;
    const std::string bad = "{\"seed\": 1,\n \"duration_s\": -1}";
    EXPECT_EQ(paysim_scenario_load_string(bad.data(), bad.size(), &s), PAYSIM_ERR_INVALID_SCENARIO);
    EXPECT_EQ(s, nullptr);
    EXPECT_NE(std::string(paysim_last_error()).find("duration_s"), std::string::npos);
    EXPECT_EQ(paysim_scenario_load("/nonexistent/x.json", &s), PAYSIM_ERR_IO);
    EXPECT_EQ(paysim_scenario_load(nullptr, &s), PAYSIM_ERR_INVALID_ARGUMENT);
}

TEST(CApi, QuirkSuitePasses) {
    struct Seen {
        std::vector<std::string> ids;
        int failures = 0;
    } seen;
    int all = 0;
    ASSERT_EQ(paysim_quirks_run(
                  [](const char* id, const char*, int passed, const char*, void* user) {
                      auto* s = static_cast<Seen*>(user);
                      s->ids.emplace_back(id);
                      if (!passed) ++s->failures;
                  },
                  &seen, &all),
              PAYSIM_OK);
    EXPECT_EQ(all, 1);
    EXPECT_EQ(seen.failures, 0);
    EXPECT_GE(seen.ids.size(), 3u);
}

TEST(CApi, CapabilityTable) {
    EXPECT_EQ(paysim_check_capability(PAYSIM_PORT_EPORT, PAYSIM_CAP_CAMERA_FEEDS), 1);
    EXPECT_EQ(paysim_check_capability(PAYSIM_PORT_EPORT, PAYSIM_CAP_STREAM_TO_CONTROLLER), 0);
    EXPECT_EQ(paysim_check_capability(PAYSIM_PORT_SKYPORT, PAYSIM_CAP_FLIGHT_PAYLOAD_CONTROL), 0);
    EXPECT_EQ(paysim_check_capability(PAYSIM_PORT_SKYPORT, PAYSIM_CAP_STREAM_TO_CONTROLLER), 1);
}

TEST(CApi, ClickMapping) {
    int x = -1, y = -1;
    ASSERT_EQ(paysim_map_click(0.5, 0.5, &x, &y), PAYSIM_OK);
    EXPECT_EQ(x, 320);
    EXPECT_EQ(y, 240);
    EXPECT_EQ(paysim_map_click(1.5, 0.5, &x, &y), PAYSIM_ERR_OUT_OF_BOUNDS);
}

TEST(CApi, SerialHelpers) {
    const std::uint8_t check[] = {'1', '2', '3', '4', '5', '6', '7', '8', '9'};
    EXPECT_EQ(paysim_crc16(check, sizeof check), 0x29B1);

    std::uint8_t out[64];
    std::size_t len = 0;
    const std::uint8_t payload[] = {1, 2, 3};
    ASSERT_EQ(paysim_encode_serial(0x10, 0x0102, payload, 3, out, sizeof out, &len), PAYSIM_OK);
    ASSERT_EQ(len, 11u);
    EXPECT_EQ(out[0], 0xAA);
    const std::uint16_t crc = oracle::crc16_bitwise({0x10, 0x01, 0x02, 1, 2, 3});
    EXPECT_EQ(out[9], crc >> 8);
    EXPECT_EQ(out[10], crc & 0xFF);
    EXPECT_EQ(paysim_encode_serial(0x10, 0, payload, 3, out, 5, &len), PAYSIM_ERR_INVALID_ARGUMENT);
}

TEST(CApi, VectorsFile) {
    const auto path = std::filesystem::temp_directory_path() / "paysim_capi_vectors.json";
    ASSERT_EQ(paysim_vectors_write(path.c_str()), PAYSIM_OK) << paysim_last_error();
    const auto j = nlohmann::json::parse(slurp(path));
    EXPECT_EQ(j["version"], 1);
    EXPECT_EQ(j["header_bytes"], 15);
    EXPECT_GE(j["cases"].size(), 8u);
}

TEST(CApi, ServerStartsAndStops) {
    Scenario s("nominal.json");
    paysim_server* server = nullptr;
    ASSERT_EQ(paysim_server_start(s.ptr, "127.0.0.1", 0, 2.0, &server), PAYSIM_OK) << paysim_last_error();
    const std::uint16_t port = paysim_server_port(server);
    EXPECT_NE(port, 0);
    paysim_server* clash = nullptr;
    EXPECT_EQ(paysim_server_start(s.ptr, "127.0.0.1", port, 2.0, &clash), PAYSIM_ERR_PORT_IN_USE);
    paysim_server_stop(server);
}
