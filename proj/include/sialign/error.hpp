#pragma once

#include <stdexcept>
#include <string>

namespace sialign {

// Error categories surfaced to callers and mapped to single-line CLI
// diagnostics. Each failure mode named in a module contract gets its
// own kind so callers can tell them apart.
enum class ErrorKind {
    io,              // missing file, unreadable/unwritable path
    format,          // malformed container (bad RIFF/SMF chunk, bad CSV)
    unsupported,     // well-formed but outside the supported subset
    shape,           // tensor/matrix dimension mismatch
    state,           // operation out of sequence (backward before forward)
    invalid_argument,
    fingerprint,     // checkpoint does not match the supplied architecture
    version,         // checkpoint format version mismatch
    corrupt,         // truncated or internally inconsistent file
    divergence,      // training produced a non-finite loss
};

const char* to_string(ErrorKind kind);

class Error : public std::runtime_error {
public:
    Error(ErrorKind kind, const std::string& message)
        : std::runtime_error(message), kind_(kind) {}

    ErrorKind kind() const { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void raise(ErrorKind kind, const std::string& message) {
    throw Error(kind, message);
}

inline const char* to_string(ErrorKind kind) {
    switch (kind) {
    case ErrorKind::io: return "io";
    case ErrorKind::format: return "format";
    case ErrorKind::unsupported: return "unsupported";
    case ErrorKind::shape: return "shape";
    case ErrorKind::state: return "state";
    case ErrorKind::invalid_argument: return "invalid-argument";
    case ErrorKind::fingerprint: return "fingerprint";
    case ErrorKind::version: return "version";
    case ErrorKind::corrupt: return "corrupt";
    case ErrorKind::divergence: return "divergence";
    }
    return "unknown";
}

} // namespace sialign
