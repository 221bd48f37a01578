#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace rebal {

enum class ErrorCode {
    InvalidMatrix,
    NotPositiveDefinite,
    SingularK,
    NumericalFailure,
    InvalidInput,
    DegenerateStructure,
    GridTooCoarse,
    Bankruptcy,
    ConfigError,
};

std::string_view to_string(ErrorCode code) noexcept;

/// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

inline std::string_view to_string(ErrorCode code) noexcept {
    switch (code) {
    case ErrorCode::InvalidMatrix: return "InvalidMatrix";
    case ErrorCode::NotPositiveDefinite: return "NotPositiveDefinite";
    case ErrorCode::SingularK: return "SingularK";
    case ErrorCode::NumericalFailure: return "NumericalFailure";
    case ErrorCode::InvalidInput: return "InvalidInput";
    case ErrorCode::DegenerateStructure: return "DegenerateStructure";
    case ErrorCode::GridTooCoarse: return "GridTooCoarse";
    case ErrorCode::Bankruptcy: return "Bankruptcy";
    case ErrorCode::ConfigError: return "ConfigError";
    }
    return "Unknown";
}

} // namespace rebal
