#include "paysim/orchestrator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "paysim/error.hpp"

namespace paysim {

std::string_view to_string(FaultReason reason) noexcept {
    switch (reason) {
        case FaultReason::BulkChannelBroken: return "BulkChannelBroken";
        case FaultReason::SharedSerialCrash: return "SharedSerialCrash";
        case FaultReason::GateViolation: return "GateViolation";
        case FaultReason::IllegalTransition: return "IllegalTransition";
        case FaultReason::NegotiationFailed: return "NegotiationFailed";
    }
    return "?";
}

std::string_view to_string(GateDecision decision) noexcept {
    return decision == GateDecision::Allowed ? "ALLOWED" : "GATED";
}

std::string_view to_string(SystemState::Kind kind) noexcept {
    using K = SystemState::Kind;
    switch (kind) {
        case K::Boot: return "BOOT";
        case K::SkyportStarting: return "SKYPORT_STARTING";
        case K::SkyportReady: return "SKYPORT_READY";
        case K::EportStarting: return "EPORT_STARTING";
        case K::EportReady: return "EPORT_READY";
        case K::StreamGated: return "STREAM_GATED";
        case K::Streaming: return "STREAMING";
        case K::Fault: return "FAULT";
    }
    return "?";
}

std::string to_string(const SystemState& state) {
    std::string s(to_string(state.kind));
    if (state.reason) s += "(" + std::string(to_string(*state.reason)) + ")";
    return s;
}

namespace {

constexpr std::pair<OrchestratorEvent::Kind, std::string_view> kEventNames[] = {
    {OrchestratorEvent::Kind::SkyportStart, "skyport_start"},
    {OrchestratorEvent::Kind::SkyportReady, "skyport_ready"},
    {OrchestratorEvent::Kind::EportStart, "eport_start"},
    {OrchestratorEvent::Kind::EportBulkActive, "eport_bulk_active"},
    {OrchestratorEvent::Kind::EportReady, "eport_ready"},
    {OrchestratorEvent::Kind::StreamRequest, "stream_request"},
    {OrchestratorEvent::Kind::StreamForce, "stream_force"},
    {OrchestratorEvent::Kind::NegotiationFailed, "negotiation_failed"},
    {OrchestratorEvent::Kind::Restart, "restart"},
};

}  // namespace

std::string_view to_string(OrchestratorEvent::Kind kind) noexcept {
    for (const auto& [k, name] : kEventNames) {
        if (k == kind) return name;
    }
    return "?";
}

std::optional<OrchestratorEvent::Kind> parse_event_kind(std::string_view name) noexcept {
    for (const auto& [k, n] : kEventNames) {
        if (n == name) return k;
    }
    return std::nullopt;
}

DecoupleResult decouple_check(const InterfaceSet& eport, const InterfaceSet& skyport) {
    return {eport.serial == skyport.serial, eport.high_bw == skyport.high_bw};
}

const SystemState& Orchestrator::apply(const OrchestratorEvent& event) {
    state_ = transition(event);
    return state_;
}

SystemState Orchestrator::transition(const OrchestratorEvent& event) {
    using K = SystemState::Kind;
    using E = OrchestratorEvent::Kind;

    if (event.kind == E::Restart) {
        skyport_ready_ = false;
        skyport_ifaces_.reset();
        eport_ifaces_.reset();
        return {};
    }
    if (state_.is_fault()) return state_;
    if (event.kind == E::NegotiationFailed) return SystemState::fault(FaultReason::NegotiationFailed);

    const auto illegal = SystemState::fault(FaultReason::IllegalTransition);
    const bool eport_early = state_.kind == K::EportStarting && !skyport_ready_;

    if (eport_early) {
        // The E-port came up first. Any bulk traffic or a late SkyPort
        // negotiation breaks its high-bandwidth channel.
        if (event.kind == E::EportBulkActive || event.kind == E::SkyportStart) {
            return SystemState::fault(FaultReason::BulkChannelBroken);
        }
        return illegal;
    }

    switch (state_.kind) {
        case K::Boot:
            if (event.kind == E::SkyportStart) {
                skyport_ifaces_ = event.interfaces;
                return {K::SkyportStarting, std::nullopt};
            }
            if (event.kind == E::EportStart) {
                eport_ifaces_ = event.interfaces;
                return {K::EportStarting, std::nullopt};
            }
            return illegal;
        case K::SkyportStarting:
            if (event.kind == E::SkyportReady) {
                skyport_ready_ = true;
                return {K::SkyportReady, std::nullopt};
            }
            return illegal;
        case K::SkyportReady:
            if (event.kind == E::EportStart) {
                eport_ifaces_ = event.interfaces;
                if (skyport_ifaces_ && eport_ifaces_ && decouple_check(*eport_ifaces_, *skyport_ifaces_).shared_serial) {
                    return SystemState::fault(FaultReason::SharedSerialCrash);
                }
                return {K::EportStarting, std::nullopt};
            }
            return illegal;
        case K::EportStarting:
            if (event.kind == E::EportBulkActive) return state_;
            if (event.kind == E::EportReady) return {K::EportReady, std::nullopt};
            return illegal;
        case K::EportReady:
        case K::StreamGated:
            if (event.kind == E::StreamRequest || event.kind == E::StreamForce) {
                const bool allowed = gate_streaming(event.uptime_s, min_uptime_s_) == GateDecision::Allowed;
                if (event.kind == E::StreamForce && !allowed) return SystemState::fault(FaultReason::GateViolation);
                if (state_.kind == K::EportReady) return {K::StreamGated, std::nullopt};
                return allowed ? SystemState{K::Streaming, std::nullopt} : state_;
            }
            return illegal;
        case K::Streaming:
            if (event.kind == E::StreamRequest || event.kind == E::StreamForce) return state_;
            return illegal;
        case K::Fault:
            break;
    }
    return state_;
}

std::vector<SystemState> enforce_order(std::span<const OrchestratorEvent> events, double min_uptime_s) {
    Orchestrator orchestrator(min_uptime_s);
    std::vector<SystemState> trace{orchestrator.state()};
    for (const auto& e : events) trace.push_back(orchestrator.apply(e));
    return trace;
}

MetricsReport collect_metrics(const RunLog& run) {
    if (run.frames.empty()) throw Error(ErrorCode::EmptyRun, "no frames were sent");

    MetricsReport report;
    report.faults = run.faults;
    report.frames_sent = run.frames.size();

    std::vector<double> latencies;
    std::uint64_t delivered_bytes = 0;
    for (const auto& f : run.frames) {
        if (!f.completed_at) continue;
        latencies.push_back(*f.completed_at - f.capture_ts);
        delivered_bytes += f.bytes;
    }
    report.frames_delivered = latencies.size();
    report.frames_dropped = report.frames_sent - report.frames_delivered;
    if (run.stream_duration_s > 0.0) {
        report.bitrate_bps = static_cast<double>(delivered_bytes) * 8.0 / run.stream_duration_s;
    }
    if (!latencies.empty()) {
        std::vector<double> sorted = latencies;
        std::sort(sorted.begin(), sorted.end());
        auto nearest_rank = [&](double p) {
            const auto rank = static_cast<std::size_t>(std::ceil(p / 100.0 * static_cast<double>(sorted.size())));
            return sorted[std::clamp<std::size_t>(rank, 1, sorted.size()) - 1];
        };
        LatencyStats stats;
        stats.mean = std::accumulate(latencies.begin(), latencies.end(), 0.0) / static_cast<double>(latencies.size());
        stats.p50 = nearest_rank(50.0);
        stats.p95 = nearest_rank(95.0);
        report.latency_ms = stats;
    }
    return report;
}

std::string to_json(const MetricsReport& report) {
    nlohmann::ordered_json j;
    if (report.latency_ms) {
        j["latency_ms"] = {{"mean", report.latency_ms->mean},
                           {"p50", report.latency_ms->p50},
                           {"p95", report.latency_ms->p95}};
    } else {
        j["latency_ms"] = {{"mean", nullptr}, {"p50", nullptr}, {"p95", nullptr}};
    }
    j["frames"] = {{"sent", report.frames_sent},
                   {"delivered", report.frames_delivered},
                   {"dropped", report.frames_dropped}};
    j["bitrate_bps"] = report.bitrate_bps;
    j["faults"] = nlohmann::ordered_json::array();
    for (auto f : report.faults) j["faults"].push_back(std::string(to_string(f)));
    return j.dump(2) + "\n";
}

}  // namespace paysim
