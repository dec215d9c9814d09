#pragma once

// Scenario files: JSON documents describing one simulated mission.
//
// Top-level keys (unknown keys are rejected):
//
//   name               string, optional
//   seed               u64, required; every link and the encoder derive their
//                      loss/jitter streams from it
//   drone_profile      "M350" (2 bulk pipes) or "M30" (1), default "M350"
//   duration_s         streamed sim-seconds once STREAMING, required, > 0
//   uptime_at_start_s  payload computer uptime at t = 0, default 0
//   min_uptime_s       streaming gate threshold, default 180
//   links              {bulk, eport_network, skyport_network, eport_serial,
//                       skyport_serial}: {bandwidth_bps, latency_ms, loss_rate}
//   encoder            {bitrate_bps, fps, key_to_delta_size_ratio,
//                       encode_delay_ms, deterministic, jitter}
//   max_packet_bytes   1..65535, default 8192
//   eport              {serial_device, high_bw_device, high_bw: "BULK"|"NETWORK",
//                       vendor_id, product_id, bulk_pipe_count,
//                       topics: [{topic, hz}], video: ["RGB_MAIN", "STEREO_DOWN"]}
//   skyport            {serial_device, high_bw_device, vendor_id, product_id}
//   expected_gadget    {eport: {vendor_id, product_id}, skyport: {...}}
//   initial_state      {position: [x,y,z], yaw, uptime_s}
//   telemetry_overrides {initial_altitude_agl_m, climb_rate_mps,
//                        obstacle_distance_m, home_lat_deg, home_lon_deg}
//   events             [{t, type}] with type one of skyport_start, eport_start,
//                      stream_start, stream_force; t in sim-seconds
//   clicks             [{t, u, v}] relayed to the SkyPort UART
//   switches           [{t, source}] desktop source changes

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "paysim/drone.hpp"
#include "paysim/eport_app.hpp"
#include "paysim/media.hpp"
#include "paysim/orchestrator.hpp"
#include "paysim/skyport_app.hpp"

namespace paysim {

enum class ScenarioEventType : std::uint8_t { SkyportStart, EportStart, StreamStart, StreamForce };

std::string_view to_string(ScenarioEventType type) noexcept;

struct ScenarioEvent {
    double t_s = 0.0;
    ScenarioEventType type = ScenarioEventType::SkyportStart;
};

struct ScenarioClick {
    double t_s = 0.0;
    double u = 0.0;
    double v = 0.0;
};

struct ScenarioSwitch {
    double t_s = 0.0;
    VideoSource source = VideoSource::PiDesktop;
};

struct Scenario {
    std::string name;
    std::uint64_t seed = 0;
    double duration_s = 10.0;
    double uptime_at_start_s = 0.0;
    double min_uptime_s = kDefaultMinUptimeS;

    DroneConfig drone;
    std::optional<EportConfig> eport;
    std::optional<SkyportConfig> skyport;

    std::vector<ScenarioEvent> events;  // sorted by time, stable
    std::vector<ScenarioClick> clicks;
    std::vector<ScenarioSwitch> switches;

    /// Re-derives every link and encoder seed from `seed`.
    void reseed(std::uint64_t seed);
};

/// Throws InvalidScenario; the detail names the line for syntax errors and
/// the field path for schema errors.
Scenario parse_scenario(std::string_view json_text, std::string_view origin = "<scenario>");
/// As parse_scenario; an unreadable file throws Io.
Scenario load_scenario(const std::filesystem::path& path);

}  // namespace paysim
