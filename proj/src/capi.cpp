#include "paysim/paysim.h"

#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <memory>
#include <string>

#include "paysim/channel.hpp"
#include "paysim/drone.hpp"
#include "paysim/error.hpp"
#include "paysim/quirks.hpp"
#include "paysim/scenario.hpp"
#include "paysim/server.hpp"
#include "paysim/simulation.hpp"
#include "paysim/skyport_app.hpp"
#include "paysim/vectors.hpp"

struct paysim_scenario {
    paysim::Scenario scenario;
};

struct paysim_server {
    std::unique_ptr<paysim::LiveServer> server;
};

namespace {

static_assert(static_cast<int>(paysim::ErrorCode::Io) + 1 == PAYSIM_ERR_IO);
static_assert(static_cast<int>(paysim::ErrorCode::InvalidScenario) + 1 == PAYSIM_ERR_INVALID_SCENARIO);

thread_local std::string g_last_error;

paysim_status fail(paysim_status status, std::string message) {
    g_last_error = std::move(message);
    return status;
}

template <typename F>
paysim_status guarded(F&& body) {
    g_last_error.clear();
    try {
        return body();
    } catch (const paysim::Error& e) {
        return fail(static_cast<paysim_status>(static_cast<int>(e.code()) + 1), e.what());
    } catch (const std::exception& e) {
        return fail(PAYSIM_ERR_INTERNAL, e.what());
    } catch (...) {
        return fail(PAYSIM_ERR_INTERNAL, "unknown failure");
    }
}

void write_file(const char* path, const std::string& text) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw paysim::Error(paysim::ErrorCode::Io, std::string("cannot open ") + path + " for writing");
    out << text;
    if (!out.flush()) throw paysim::Error(paysim::ErrorCode::Io, std::string("write to ") + path + " failed");
}

std::string execute(const paysim_scenario* handle, const paysim_run_options* options, paysim_run_outcome* outcome) {
    paysim::Scenario scenario = handle->scenario;
    paysim::RunOptions run;
    if (options && options->has_seed) scenario.reseed(options->seed);
    if (options && options->has_until) {
        if (!(options->until_s >= 0.0)) throw paysim::Error(paysim::ErrorCode::InvalidArgument, "until must be >= 0");
        run.until_s = options->until_s;
    }
    paysim::Simulation sim(std::move(scenario), run);
    sim.run();
    const paysim::MetricsReport report = sim.report();
    if (options && options->events_path) write_file(options->events_path, sim.log().text());
    if (outcome) {
        outcome->exit_code = sim.exit_code();
        outcome->frames_sent = report.frames_sent;
        outcome->frames_delivered = report.frames_delivered;
        outcome->mean_latency_ms =
            report.latency_ms ? report.latency_ms->mean : std::numeric_limits<double>::quiet_NaN();
        outcome->bitrate_bps = report.bitrate_bps;
    }
    return paysim::to_json(report);
}

}  // namespace

extern "C" {

const char* paysim_version(void) { return "0.3.0"; }

const char* paysim_last_error(void) { return g_last_error.c_str(); }

const char* paysim_status_name(paysim_status status) {
    if (status == PAYSIM_OK) return "Ok";
    if (status == PAYSIM_ERR_INTERNAL) return "Internal";
    if (status < PAYSIM_ERR_INVALID_ARGUMENT || status > PAYSIM_ERR_IO) return "Unknown";
    return paysim::to_string(static_cast<paysim::ErrorCode>(status - 1)).data();
}

paysim_status paysim_scenario_load(const char* path, paysim_scenario** out) {
    return guarded([&] {
        if (!path || !out) return fail(PAYSIM_ERR_INVALID_ARGUMENT, "path and out must not be NULL");
        *out = new paysim_scenario{paysim::load_scenario(path)};
        return PAYSIM_OK;
    });
}

paysim_status paysim_scenario_load_string(const char* json, size_t len, paysim_scenario** out) {
    return guarded([&] {
        if (!json || !out) return fail(PAYSIM_ERR_INVALID_ARGUMENT, "json and out must not be NULL");
        *out = new paysim_scenario{paysim::parse_scenario(std::string_view(json, len))};
        return PAYSIM_OK;
    });
}

void paysim_scenario_free(paysim_scenario* scenario) { delete scenario; }

paysim_status paysim_run(const paysim_scenario* scenario, const char* report_path, const paysim_run_options* options,
                         paysim_run_outcome* outcome) {
    return guarded([&] {
        if (!scenario || !report_path) return fail(PAYSIM_ERR_INVALID_ARGUMENT, "scenario and report path required");
        write_file(report_path, execute(scenario, options, outcome));
        return PAYSIM_OK;
    });
}

paysim_status paysim_run_to_string(const paysim_scenario* scenario, const paysim_run_options* options,
                                   char** report_json, paysim_run_outcome* outcome) {
    return guarded([&] {
        if (!scenario || !report_json) return fail(PAYSIM_ERR_INVALID_ARGUMENT, "scenario and output required");
        const std::string text = execute(scenario, options, outcome);
        auto* buffer = new char[text.size() + 1];
        std::memcpy(buffer, text.c_str(), text.size() + 1);
        *report_json = buffer;
        return PAYSIM_OK;
    });
}

void paysim_string_free(char* s) { delete[] s; }

paysim_status paysim_quirks_run(paysim_quirk_callback callback, void* user, int* all_passed) {
    return guarded([&] {
        bool ok = true;
        for (const auto& c : paysim::run_quirk_suite()) {
            ok = ok && c.passed;
            if (callback) callback(c.id.c_str(), c.name.c_str(), c.passed ? 1 : 0, c.detail.c_str(), user);
        }
        if (all_passed) *all_passed = ok ? 1 : 0;
        return PAYSIM_OK;
    });
}

paysim_status paysim_server_start(const paysim_scenario* scenario, const char* bind_address, uint16_t port,
                                  double time_scale, paysim_server** out) {
    return guarded([&] {
        if (!scenario || !out) return fail(PAYSIM_ERR_INVALID_ARGUMENT, "scenario and out must not be NULL");
        paysim::ServeOptions options;
        if (bind_address) options.bind_address = bind_address;
        options.port = port;
        options.time_scale = time_scale > 0.0 ? time_scale : 1.0;
        auto handle = std::make_unique<paysim_server>();
        handle->server = std::make_unique<paysim::LiveServer>(scenario->scenario, options);
        handle->server->start();
        *out = handle.release();
        return PAYSIM_OK;
    });
}

uint16_t paysim_server_port(const paysim_server* server) { return server ? server->server->port() : 0; }

void paysim_server_stop(paysim_server* server) {
    if (!server) return;
    server->server->stop();
    delete server;
}

paysim_status paysim_vectors_write(const char* path) {
    return guarded([&] {
        if (!path) return fail(PAYSIM_ERR_INVALID_ARGUMENT, "path must not be NULL");
        write_file(path, paysim::conformance_vectors_json());
        return PAYSIM_OK;
    });
}

int paysim_check_capability(paysim_port port, paysim_capability capability) {
    if (port < PAYSIM_PORT_EPORT || port > PAYSIM_PORT_SKYPORT) return 0;
    if (capability < PAYSIM_CAP_POWER_TELEMETRY || capability > PAYSIM_CAP_STREAM_TO_CONTROLLER) return 0;
    return paysim::check_capability(static_cast<paysim::PortKind>(port), static_cast<paysim::Capability>(capability))
               ? 1
               : 0;
}

paysim_status paysim_map_click(double u, double v, int* x, int* y) {
    return guarded([&] {
        if (!x || !y) return fail(PAYSIM_ERR_INVALID_ARGUMENT, "x and y must not be NULL");
        const auto p = paysim::map_click(u, v);
        *x = p.x;
        *y = p.y;
        return PAYSIM_OK;
    });
}

uint16_t paysim_crc16(const uint8_t* data, size_t len) {
    if (!data && len != 0) return 0;
    return paysim::crc16_ccitt_false(paysim::ByteView(data, len));
}

paysim_status paysim_encode_serial(uint8_t msg_type, uint16_t seq, const uint8_t* payload, size_t payload_len,
                                   uint8_t* out, size_t out_cap, size_t* out_len) {
    return guarded([&] {
        if ((!payload && payload_len) || !out_len) return fail(PAYSIM_ERR_INVALID_ARGUMENT, "bad buffer arguments");
        const auto frame = paysim::encode_serial(msg_type, seq, paysim::ByteView(payload, payload_len));
        *out_len = frame.size();
        if (!out || out_cap < frame.size()) {
            return fail(PAYSIM_ERR_INVALID_ARGUMENT, "output buffer needs " + std::to_string(frame.size()) + " bytes");
        }
        std::memcpy(out, frame.data(), frame.size());
        return PAYSIM_OK;
    });
}

}  // extern "C"
