#pragma once

// Wires the drone, both payload applications, the orchestrator and the
// controller-side receiver together on one simulated clock. `run` drives it
// to completion; `serve` steps it against wall time.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "paysim/drone.hpp"
#include "paysim/eport_app.hpp"
#include "paysim/event_log.hpp"
#include "paysim/media.hpp"
#include "paysim/orchestrator.hpp"
#include "paysim/scenario.hpp"
#include "paysim/sim_time.hpp"
#include "paysim/skyport_app.hpp"

namespace paysim {

struct RunOptions {
    /// Hard stop in sim-seconds.
    std::optional<double> until_s;
    /// Stream until stopped instead of for duration_s (serve mode).
    bool endless = false;
    /// Keep the raw packets delivered to the controller for take_wire_packets().
    bool keep_wire = false;
};

class Simulation {
public:
    explicit Simulation(Scenario scenario, RunOptions options = {});
    Simulation(const Simulation&) = delete;
    Simulation& operator=(const Simulation&) = delete;

    /// Processes everything scheduled up to t, stopping early at the first fault.
    void step_until(SimTime t);
    /// Runs to completion or the first fault.
    void run();

    bool done() const { return done_; }
    SimTime now() const { return clock_.now(); }
    double payload_uptime_s(SimTime t) const { return scenario_.uptime_at_start_s + t.seconds(); }

    /// Relays a controller tap over the SkyPort UART at the current time.
    /// Returns the pixel the tap will land on. Throws OutOfBounds, or
    /// UnknownSession if the SkyPort application is not running.
    PixelPoint click(double u, double v);
    /// Changes what the streamed desktop shows. Throws UnknownSession if the
    /// SkyPort application is not running.
    void switch_source(VideoSource source);
    std::vector<Bytes> take_wire_packets();

    const Scenario& scenario() const { return scenario_; }
    const Orchestrator& orchestrator() const { return orchestrator_; }
    const std::vector<SystemState>& trace() const { return trace_; }
    const std::vector<FaultReason>& faults() const { return faults_; }
    const EventLog& log() const { return log_; }
    const std::vector<FrameOutcome>& frames() const { return frames_; }
    const SkyportApp* skyport() const { return skyport_ ? &*skyport_ : nullptr; }
    const EportApp* eport() const { return eport_ ? &*eport_ : nullptr; }
    const Drone& drone() const { return drone_; }

    MetricsReport report() const;
    std::string report_json() const { return to_json(report()); }
    /// 0 for a clean run, 2 once any fault was raised.
    int exit_code() const { return faults_.empty() ? 0 : 2; }

private:
    enum class StreamPhase : std::uint8_t { Idle, Gated, Streaming, Complete };

    void schedule_scenario();
    void schedule_poll(SimTime at);
    void scenario_action_done();
    void apply(OrchestratorEvent::Kind kind, std::optional<InterfaceSet> ifaces = std::nullopt);
    void raise_fault(FaultReason reason, const std::string& detail);

    void start_skyport();
    void start_eport();
    void request_stream(bool force);
    void begin_streaming();
    void capture(std::uint64_t k);
    void poll_feeds();
    void finish();
    void drain();

    Scenario scenario_;
    RunOptions options_;
    SimClock clock_;
    Scheduler scheduler_;
    EventLog log_;
    Drone drone_;
    Orchestrator orchestrator_;
    std::vector<SystemState> trace_;
    std::vector<FaultReason> faults_;

    std::optional<SkyportApp> skyport_;
    std::optional<EportApp> eport_;

    StreamPhase phase_ = StreamPhase::Idle;
    SimTime stream_t0_;
    std::uint64_t frames_planned_ = 0;
    std::size_t scenario_actions_left_ = 0;
    bool finish_scheduled_ = false;
    bool done_ = false;

    Reassembler receiver_;
    std::vector<FrameOutcome> frames_;
    std::uint64_t malformed_packets_ = 0;
    std::vector<Bytes> wire_;
};

}  // namespace paysim
