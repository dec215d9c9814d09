#include "paysim/error.hpp"

namespace paysim {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::PayloadTooLarge: return "PayloadTooLarge";
        case ErrorCode::MalformedFrame: return "MalformedFrame";
        case ErrorCode::ChecksumMismatch: return "ChecksumMismatch";
        case ErrorCode::InvalidDescriptor: return "InvalidDescriptor";
        case ErrorCode::PipeNotActive: return "PipeNotActive";
        case ErrorCode::CapabilityViolation: return "CapabilityViolation";
        case ErrorCode::PortBusy: return "PortBusy";
        case ErrorCode::IdentityMismatch: return "IdentityMismatch";
        case ErrorCode::UnknownSession: return "UnknownSession";
        case ErrorCode::RateTooHigh: return "RateTooHigh";
        case ErrorCode::StereoRequiresBulk: return "StereoRequiresBulk";
        case ErrorCode::OutOfRange: return "OutOfRange";
        case ErrorCode::NegotiationFailed: return "NegotiationFailed";
        case ErrorCode::BulkProvisionFailed: return "BulkProvisionFailed";
        case ErrorCode::PipeFaulted: return "PipeFaulted";
        case ErrorCode::LinkTimeout: return "LinkTimeout";
        case ErrorCode::MixedFrames: return "MixedFrames";
        case ErrorCode::InconsistentPackets: return "InconsistentPackets";
        case ErrorCode::OutOfBounds: return "OutOfBounds";
        case ErrorCode::EmptyRun: return "EmptyRun";
        case ErrorCode::InvalidScenario: return "InvalidScenario";
        case ErrorCode::PortInUse: return "PortInUse";
        case ErrorCode::Io: return "Io";
    }
    return "Unknown";
}

}  // namespace paysim
