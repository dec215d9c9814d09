#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace paysim {

enum class ErrorCode {
    InvalidArgument,
    PayloadTooLarge,
    MalformedFrame,
    ChecksumMismatch,
    InvalidDescriptor,
    PipeNotActive,
    CapabilityViolation,
    PortBusy,
    IdentityMismatch,
    UnknownSession,
    RateTooHigh,
    StereoRequiresBulk,
    OutOfRange,
    NegotiationFailed,
    BulkProvisionFailed,
    PipeFaulted,
    LinkTimeout,
    MixedFrames,
    InconsistentPackets,
    OutOfBounds,
    EmptyRun,
    InvalidScenario,
    PortInUse,
    Io,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure raised by the simulator carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code), detail_(what) {}

    ErrorCode code() const noexcept { return code_; }
    const std::string& detail() const noexcept { return detail_; }

private:
    ErrorCode code_;
    std::string detail_;
};

}  // namespace paysim
