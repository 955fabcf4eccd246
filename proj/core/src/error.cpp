#include "bsdelab/error.hpp"

namespace bsdelab {

std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::InvalidArgument: return "InvalidArgument";
        case ErrorCode::BadGrid: return "BadGrid";
        case ErrorCode::NonFiniteCoefficient: return "NonFiniteCoefficient";
        case ErrorCode::NonFiniteState: return "NonFiniteState";
        case ErrorCode::SingularBasis: return "SingularBasis";
        case ErrorCode::Blowup: return "Blowup";
        case ErrorCode::OverflowInExponent: return "OverflowInExponent";
        case ErrorCode::ShapeMismatch: return "ShapeMismatch";
        case ErrorCode::InsufficientHs: return "InsufficientHs";
        case ErrorCode::SingularVariation: return "SingularVariation";
        case ErrorCode::MissingDiagonal: return "MissingDiagonal";
        case ErrorCode::DomainError: return "DomainError";
        case ErrorCode::NoFeasibleR: return "NoFeasibleR";
        case ErrorCode::UnsupportedTerminal: return "UnsupportedTerminal";
        case ErrorCode::EmptyInput: return "EmptyInput";
        case ErrorCode::ConfigError: return "ConfigError";
        case ErrorCode::UnknownFixture: return "UnknownFixture";
        case ErrorCode::IoError: return "IoError";
    }
    return "Unknown";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(std::string(to_string(code)) + ": " + message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace bsdelab
