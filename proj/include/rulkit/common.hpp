#pragma once

#include <stdexcept>
#include <string>

namespace rulkit {

// Error taxonomy mirrored one-to-one by the C API status codes.
enum class ErrorKind {
    kIo,          // file missing / unreadable / unwritable
    kParse,       // malformed input text
    kValidation,  // semantically invalid values or arguments
    kShape,       // tensor / arity mismatch
    kNumeric,     // NaN or Inf where finite values are required
    kInternal,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, std::string message)
        : std::runtime_error(std::move(message)), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void throw_io(std::string msg) { throw Error(ErrorKind::kIo, std::move(msg)); }
[[noreturn]] inline void throw_parse(std::string msg) { throw Error(ErrorKind::kParse, std::move(msg)); }
[[noreturn]] inline void throw_validation(std::string msg) { throw Error(ErrorKind::kValidation, std::move(msg)); }
[[noreturn]] inline void throw_shape(std::string msg) { throw Error(ErrorKind::kShape, std::move(msg)); }
[[noreturn]] inline void throw_numeric(std::string msg) { throw Error(ErrorKind::kNumeric, std::move(msg)); }

}  // namespace rulkit
