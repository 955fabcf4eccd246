#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace bsdelab {

enum class ErrorCode {
    InvalidArgument,
    BadGrid,
    NonFiniteCoefficient,
    NonFiniteState,
    SingularBasis,
    Blowup,
    OverflowInExponent,
    ShapeMismatch,
    InsufficientHs,
    SingularVariation,
    MissingDiagonal,
    DomainError,
    NoFeasibleR,
    UnsupportedTerminal,
    EmptyInput,
    ConfigError,
    UnknownFixture,
    IoError,
};

std::string_view to_string(ErrorCode code) noexcept;

// Every failure raised by the library carries a machine-readable code.
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& message);

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

[[noreturn]] void fail(ErrorCode code, const std::string& message);

inline void require(bool condition, ErrorCode code, const std::string& message) {
    if (!condition) fail(code, message);
}

}  // namespace bsdelab
