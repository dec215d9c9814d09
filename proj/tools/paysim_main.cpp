#include <atomic>
#include <chrono>
#include <cmath>
#include <csignal>
#include <cstdio>
#include <string>
#include <thread>

#include <CLI11.hpp>

#include "paysim/paysim.h"

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

int report_failure(const char* what) {
    std::fprintf(stderr, "paysim: %s: %s\n", what, paysim_last_error());
    return 1;
}

struct ScenarioHandle {
    paysim_scenario* ptr = nullptr;
    ~ScenarioHandle() { paysim_scenario_free(ptr); }
};

int cmd_run(const std::string& scenario_path, const std::string& report_path, const std::string& events_path,
            CLI::Option* seed_opt, std::uint64_t seed, CLI::Option* until_opt, double until_s) {
    ScenarioHandle scenario;
    if (paysim_scenario_load(scenario_path.c_str(), &scenario.ptr) != PAYSIM_OK) {
        return report_failure("cannot load scenario");
    }
    paysim_run_options options{};
    options.has_seed = seed_opt->count() > 0;
    options.seed = seed;
    options.has_until = until_opt->count() > 0;
    options.until_s = until_s;
    options.events_path = events_path.empty() ? nullptr : events_path.c_str();

    paysim_run_outcome outcome{};
    if (paysim_run(scenario.ptr, report_path.c_str(), &options, &outcome) != PAYSIM_OK) {
        return report_failure("run failed");
    }
    if (std::isnan(outcome.mean_latency_ms)) {
        std::printf("frames %llu/%llu delivered, no latency sample\n",
                    static_cast<unsigned long long>(outcome.frames_delivered),
                    static_cast<unsigned long long>(outcome.frames_sent));
    } else {
        std::printf("frames %llu/%llu delivered, mean latency %.3f ms, bitrate %.0f bps\n",
                    static_cast<unsigned long long>(outcome.frames_delivered),
                    static_cast<unsigned long long>(outcome.frames_sent), outcome.mean_latency_ms,
                    outcome.bitrate_bps);
    }
    if (outcome.exit_code != 0) std::printf("run ended in FAULT, see %s\n", report_path.c_str());
    return outcome.exit_code;
}

int cmd_serve(const std::string& scenario_path, const std::string& bind, std::uint16_t port, double time_scale) {
    ScenarioHandle scenario;
    if (paysim_scenario_load(scenario_path.c_str(), &scenario.ptr) != PAYSIM_OK) {
        return report_failure("cannot load scenario");
    }
    paysim_server* server = nullptr;
    if (paysim_server_start(scenario.ptr, bind.c_str(), port, time_scale, &server) != PAYSIM_OK) {
        return report_failure("serve failed");
    }
    std::printf("serving ws://%s:%u (time scale %.2f), Ctrl-C to stop\n", bind.c_str(), paysim_server_port(server),
                time_scale);
    std::fflush(stdout);
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    paysim_server_stop(server);
    return 0;
}

void print_quirk(const char* id, const char* name, int passed, const char* detail, void*) {
    std::printf("%s %s: %s (%s)\n", passed ? "PASS" : "FAIL", id, name, detail);
}

int cmd_quirks() {
    int all_passed = 0;
    if (paysim_quirks_run(print_quirk, nullptr, &all_passed) != PAYSIM_OK) {
        return report_failure("quirk suite failed to run");
    }
    std::printf("%s\n", all_passed ? "quirk suite: PASS" : "quirk suite: FAIL");
    return all_passed ? 0 : 1;
}

int cmd_vectors(const std::string& out) {
    if (paysim_vectors_write(out.c_str()) != PAYSIM_OK) return report_failure("vectors");
    std::printf("wrote %s\n", out.c_str());
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Payload computer and drone link simulator"};
    app.set_version_flag("--version", paysim_version());
    app.require_subcommand(1);

    std::string scenario_path, report_path, events_path;
    std::uint64_t seed = 0;
    double until_s = 0.0;
    auto* run = app.add_subcommand("run", "Run a scenario deterministically and write a metrics report");
    run->add_option("--scenario", scenario_path, "Scenario JSON file")->required();
    run->add_option("--report", report_path, "Metrics report destination")->required();
    auto* seed_opt = run->add_option("--seed", seed, "Override the scenario seed");
    auto* until_opt = run->add_option("--until", until_s, "Stop after this many sim-seconds");
    run->add_option("--events", events_path, "Write the NDJSON event log here");

    std::string serve_scenario, bind = "127.0.0.1";
    std::uint16_t port = 8765;
    double time_scale = 1.0;
    auto* serve = app.add_subcommand("serve", "Serve a live controller session over WebSocket");
    serve->add_option("--scenario", serve_scenario, "Scenario JSON file")->required();
    serve->add_option("--port", port, "TCP port")->required();
    serve->add_option("--bind", bind, "Listen address");
    serve->add_option("--time-scale", time_scale, "Sim-seconds per wall-second")->check(CLI::PositiveNumber);

    auto* quirks = app.add_subcommand("quirks", "Run the built-in operational quirk suite");

    std::string vectors_out;
    auto* vectors = app.add_subcommand("vectors", "Write reassembly conformance vectors for controller clients");
    vectors->add_option("--out", vectors_out, "Destination JSON file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    if (*run) return cmd_run(scenario_path, report_path, events_path, seed_opt, seed, until_opt, until_s);
    if (*serve) return cmd_serve(serve_scenario, bind, port, time_scale);
    if (*quirks) return cmd_quirks();
    if (*vectors) return cmd_vectors(vectors_out);
    return 1;
}
