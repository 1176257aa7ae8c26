#include "amff/error.hpp"

namespace amff {

const char* error_code_name(ErrorCode code) noexcept {
    switch (code) {
        case ErrorCode::Shape: return "E_SHAPE";
        case ErrorCode::Format: return "E_FORMAT";
        case ErrorCode::Numeric: return "E_NUMERIC";
        case ErrorCode::Value: return "E_VALUE";
        case ErrorCode::Io: return "E_IO";
    }
    return "E_UNKNOWN";
}

Error::Error(ErrorCode code, const std::string& message)
    : std::runtime_error(message), code_(code) {}

void fail(ErrorCode code, const std::string& message) { throw Error(code, message); }

}  // namespace amff
