#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace cosim {

// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

enum class WireErrorKind : uint8_t {
    kBadMagic,
    kUnknownTag,
    kOversizeFrame,
    kMalformedPayload,
    kInvariantViolation,
    kCompression,
};

const char* to_string(WireErrorKind kind);

// Raised by the codec. `field()` names the field or invariant that failed.
class WireError : public Error {
public:
    WireError(WireErrorKind kind, std::string field, const std::string& detail);

    WireErrorKind kind() const { return kind_; }
    const std::string& field() const { return field_; }

private:
    WireErrorKind kind_;
    std::string field_;
};

enum class TransportErrorKind : uint8_t {
    kClosed,
    kTimeout,
    kIo,
};

class TransportError : public Error {
public:
    TransportError(TransportErrorKind kind, const std::string& what)
        : Error(what), kind_(kind) {}

    TransportErrorKind kind() const { return kind_; }

private:
    TransportErrorKind kind_;
};

// Wrong message type/direction or an illegal state transition.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// A peer reported a window timestamp other than the one expected. Fatal.
class DesyncError : public ProtocolError {
public:
    DesyncError(uint64_t expected, uint64_t got, const std::string& context);

    uint64_t expected() const { return expected_; }
    uint64_t got() const { return got_; }

private:
    uint64_t expected_;
    uint64_t got_;
};

// Invalid configuration; `path()` points into the source document when known.
class ConfigError : public Error {
public:
    ConfigError(std::string path, const std::string& detail);

    const std::string& path() const { return path_; }

private:
    std::string path_;
};

// Channel data that cannot be applied to a network model.
class ChannelError : public Error {
public:
    using Error::Error;
};

// A packet manifest that violates its invariants or the simulator's state.
class ManifestError : public Error {
public:
    using Error::Error;
};

}  // namespace cosim
