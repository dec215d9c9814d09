#pragma once

// Startup/health state machine for the two payload applications and the
// end-to-end metrics collected from a run.

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paysim/sim_time.hpp"

namespace paysim {

enum class GateDecision : std::uint8_t { Gated, Allowed };

inline constexpr double kDefaultMinUptimeS = 180.0;

/// The desktop streamer is only stable once the payload computer has been up
/// for min_uptime_s.
constexpr GateDecision gate_streaming(double uptime_s, double min_uptime_s = kDefaultMinUptimeS) noexcept {
    return uptime_s >= min_uptime_s ? GateDecision::Allowed : GateDecision::Gated;
}

enum class FaultReason : std::uint8_t {
    BulkChannelBroken,
    SharedSerialCrash,
    GateViolation,
    IllegalTransition,
    NegotiationFailed,
};

std::string_view to_string(FaultReason reason) noexcept;
std::string_view to_string(GateDecision decision) noexcept;

struct SystemState {
    enum class Kind : std::uint8_t {
        Boot,
        SkyportStarting,
        SkyportReady,
        EportStarting,
        EportReady,
        StreamGated,
        Streaming,
        Fault,
    };

    Kind kind = Kind::Boot;
    std::optional<FaultReason> reason;  // set iff kind == Fault

    static SystemState fault(FaultReason r) { return {Kind::Fault, r}; }
    bool is_fault() const { return kind == Kind::Fault; }
    bool operator==(const SystemState&) const = default;
};

std::string_view to_string(SystemState::Kind kind) noexcept;
/// "EPORT_READY", "FAULT(BulkChannelBroken)", ...
std::string to_string(const SystemState& state);

/// Serial adapter and high-bandwidth device one application uses.
struct InterfaceSet {
    std::string serial;
    std::string high_bw;
};

struct DecoupleResult {
    bool shared_serial = false;
    bool shared_high_bw = false;

    bool ok() const { return !shared_serial && !shared_high_bw; }
};

DecoupleResult decouple_check(const InterfaceSet& eport, const InterfaceSet& skyport);

struct OrchestratorEvent {
    enum class Kind : std::uint8_t {
        SkyportStart,
        SkyportReady,
        EportStart,
        EportBulkActive,
        EportReady,
        /// Ask to stream: EPORT_READY -> STREAM_GATED, then STREAMING once the gate allows.
        StreamRequest,
        /// Streamer launched regardless of the gate; below the threshold it faults.
        StreamForce,
        NegotiationFailed,
        Restart,
    };

    Kind kind;
    double uptime_s = 0.0;
    std::optional<InterfaceSet> interfaces;  // on SkyportStart / EportStart
};

std::string_view to_string(OrchestratorEvent::Kind kind) noexcept;
std::optional<OrchestratorEvent::Kind> parse_event_kind(std::string_view name) noexcept;

class Orchestrator {
public:
    explicit Orchestrator(double min_uptime_s = kDefaultMinUptimeS) : min_uptime_s_(min_uptime_s) {}

    /// Applies one event. FAULT is absorbing until a Restart event.
    const SystemState& apply(const OrchestratorEvent& event);

    const SystemState& state() const { return state_; }
    double min_uptime_s() const { return min_uptime_s_; }
    bool skyport_ready() const { return skyport_ready_; }

private:
    SystemState transition(const OrchestratorEvent& event);

    double min_uptime_s_;
    SystemState state_;
    bool skyport_ready_ = false;
    std::optional<InterfaceSet> skyport_ifaces_;
    std::optional<InterfaceSet> eport_ifaces_;
};

/// Replays time-ordered events; the trace starts with BOOT and holds one
/// state per event.
std::vector<SystemState> enforce_order(std::span<const OrchestratorEvent> events,
                                       double min_uptime_s = kDefaultMinUptimeS);

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct FrameOutcome {
    std::uint64_t frame_id = 0;
    std::size_t bytes = 0;
    SimTime capture_ts;
    std::optional<SimTime> completed_at;
};

struct RunLog {
    std::vector<FrameOutcome> frames;
    /// Streamed span in seconds (frames sent / fps).
    double stream_duration_s = 0.0;
    std::vector<FaultReason> faults;
};

struct LatencyStats {
    double mean = 0.0;
    double p50 = 0.0;
    double p95 = 0.0;
};

struct MetricsReport {
    std::optional<LatencyStats> latency_ms;  // absent when nothing was delivered
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_delivered = 0;
    std::uint64_t frames_dropped = 0;
    double bitrate_bps = 0.0;
    std::vector<FaultReason> faults;
};

/// Latency is frame completion at the receiver minus capture_ts; percentiles
/// use the nearest-rank method; bitrate counts delivered frame payload bytes
/// over the streamed span. Throws EmptyRun if no frame was sent.
MetricsReport collect_metrics(const RunLog& run);

/// Fixed field names: latency_ms{mean,p50,p95}, frames{sent,delivered,dropped},
/// bitrate_bps, faults[]. Pretty-printed with a trailing newline.
std::string to_json(const MetricsReport& report);

}  // namespace paysim
