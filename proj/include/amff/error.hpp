#pragma once

#include <stdexcept>
#include <string>

namespace amff {

enum class ErrorCode {
    Shape,    // dimension mismatch between tensors or records
    Format,   // malformed file contents
    Numeric,  // non-finite value or ill-defined numeric result
    Value,    // invalid argument or configuration
    Io,       // filesystem failure
};

/// Machine-parsable name, e.g. "E_SHAPE".
const char* error_code_name(ErrorCode code) noexcept;

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

}  // namespace amff
