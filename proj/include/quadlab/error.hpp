#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace quadlab {

enum class ErrorCode {
    invalid_argument,
    singular_attitude,
    infeasible_effort,
    attitude_diverged,
    free_fall,
    record_too_short,
    nonuniform_sampling,
    insufficient_coherence,
    no_stable_fit,
    missing_channel,
    malformed_row,
    header_mismatch,
    unknown_key,
    type_mismatch,
    missing_required,
    degenerate_bearing,
};

constexpr std::string_view to_string(ErrorCode code) {
    switch (code) {
    case ErrorCode::invalid_argument: return "InvalidArgument";
    case ErrorCode::singular_attitude: return "SingularAttitude";
    case ErrorCode::infeasible_effort: return "InfeasibleEffort";
    case ErrorCode::attitude_diverged: return "AttitudeDiverged";
    case ErrorCode::free_fall: return "FreeFall";
    case ErrorCode::record_too_short: return "RecordTooShort";
    case ErrorCode::nonuniform_sampling: return "NonuniformSampling";
    case ErrorCode::insufficient_coherence: return "InsufficientCoherence";
    case ErrorCode::no_stable_fit: return "NoStableFit";
    case ErrorCode::missing_channel: return "MissingChannel";
    case ErrorCode::malformed_row: return "MalformedRow";
    case ErrorCode::header_mismatch: return "HeaderMismatch";
    case ErrorCode::unknown_key: return "UnknownKey";
    case ErrorCode::type_mismatch: return "TypeMismatch";
    case ErrorCode::missing_required: return "MissingRequired";
    case ErrorCode::degenerate_bearing: return "DegenerateBearing";
    }
    return "Unknown";
}

/// Every failure raised by the library. The message is prefixed with the
/// error name so CLI output stays greppable.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline void require(bool condition, const std::string& what) {
    if (!condition) {
        throw Error(ErrorCode::invalid_argument, what);
    }
}

} // namespace quadlab
