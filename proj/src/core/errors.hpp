#pragma once

#include <stdexcept>
#include <string>

namespace chirascope {

// Every failure raised by the core derives from Error; the kind selects the
// status code reported across the C boundary.
enum class ErrorKind {
    InvalidArgument,
    Io,
    Parse,
    NoAnalyzableLayers,
    LayerMismatch,
    NoReferences,
    UndefinedSimilarity,
};

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

}  // namespace chirascope
