#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>

namespace bevcal {

enum class ErrorCode {
    TooFewPoints,
    DegenerateConfiguration,
    NumericalFailure,
    PointAtInfinity,
    FrameMismatch,
    SingularMatrix,
    VanishingAtInfinity,
    ImaginaryFocal,
    DegenerateHomography,
    BehindPlane,
    SamplingExhausted,
    ProjectionBehindCamera,
    PlacementExhausted,
    LengthMismatch,
    NoGroundTruth,
    InvalidArgument,
    IoFailure,
};

inline std::string_view to_string(ErrorCode code) noexcept;

/// Domain error raised by every toolkit operation. `index` is set when the
/// failure belongs to one element of a batch (e.g. warp_points).
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message,
          std::optional<std::size_t> index = std::nullopt)
        : std::runtime_error(std::string(to_string(code)) + ": " + message),
          code_(code),
          index_(index) {}

    ErrorCode code() const noexcept { return code_; }
    std::optional<std::size_t> index() const noexcept { return index_; }

private:
    ErrorCode code_;
    std::optional<std::size_t> index_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::TooFewPoints: return "TooFewPoints";
        case ErrorCode::DegenerateConfiguration: return "DegenerateConfiguration";
        case ErrorCode::NumericalFailure: return "NumericalFailure";
        case ErrorCode::PointAtInfinity: return "PointAtInfinity";
        case ErrorCode::FrameMismatch: return "FrameMismatch";
        case ErrorCode::SingularMatrix: return "SingularMatrix";
        case ErrorCode::VanishingAtInfinity: return "VanishingAtInfinity";
        case ErrorCode::ImaginaryFocal: return "ImaginaryFocal";
        case ErrorCode::DegenerateHomography: return "DegenerateHomography";
        case ErrorCode::BehindPlane: return "BehindPlane";
        case ErrorCode::SamplingExhausted: return "SamplingExhausted";
        case ErrorCode::ProjectionBehindCamera: return "ProjectionBehindCamera";
        case ErrorCode::PlacementExhausted: return "PlacementExhausted";
        case ErrorCode::LengthMismatch: return "LengthMismatch";
        case ErrorCode::NoGroundTruth: return "NoGroundTruth";
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::IoFailure: return "IoFailure";
    }
    return "Unknown";
}

}  // namespace bevcal
