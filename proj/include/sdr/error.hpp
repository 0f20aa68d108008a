#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace sdr {

enum class ErrorCode {
    InvalidArgument,
    NonFinite,
    NotPositiveDefinite,
    ShapeMismatch,
    DivergedLoss,
    TooLarge,
    EmptyCandidates,
    MissingGroundTruth,
    MissingHead,
    CorruptFile,
    VersionMismatch,
    SpecInvalid,
    ManifestInvalid,
    ClassMissing,
    DecisionAborted,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Every failure in the engine surfaces as this exception; `code()` is the
/// machine-readable kind reported by the CLI.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message)
        : std::runtime_error(message), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] inline void fail(ErrorCode code, const std::string& message) {
    throw Error(code, message);
}

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace sdr
