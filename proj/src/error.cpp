#include "sdr/error.hpp"

namespace sdr {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::NonFinite: return "NonFinite";
        case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::DivergedLoss: return "DivergedLoss";
        case ErrorCode::TooLarge: return "TooLarge";
        case ErrorCode::EmptyCandidates: return "EmptyCandidates";
        case ErrorCode::MissingGroundTruth: return "MissingGroundTruth";
        case ErrorCode::MissingHead: return "MissingHead";
        case ErrorCode::CorruptFile: return "CorruptFile";
        case ErrorCode::VersionMismatch: return "VersionMismatch";
        case ErrorCode::SpecInvalid: return "SpecInvalid";
        case ErrorCode::ManifestInvalid: return "ManifestInvalid";
        case ErrorCode::ClassMissing: return "ClassMissing";
        case ErrorCode::DecisionAborted: return "DecisionAborted";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

}  // namespace sdr
