#pragma once

#include <stdexcept>
#include <string>

namespace advpose {

// Error taxonomy used across the library. Every throwing path names its
// category so callers (and the CLI exit-code mapping) can dispatch on type.

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Bad arguments to a library call (wrong sizes, non-finite values, ...).
struct InvalidInput : Error {
    explicit InvalidInput(const std::string& msg) : Error("invalid input: " + msg) {}
};

// A file failed to parse; message carries line/field diagnostics.
struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("parse error: " + msg) {}
};

// A provider (encoder/scorer) violated its contract, e.g. embedding
// dimensions changed between calls.
struct ProviderError : Error {
    explicit ProviderError(const std::string& msg) : Error("provider error: " + msg) {}
};

// Remote endpoint unreachable after the configured retries.
struct ProviderUnavailable : ProviderError {
    explicit ProviderUnavailable(const std::string& msg) : ProviderError(msg) {}
};

// Malformed wire payload; message includes an excerpt of the offending body.
struct ProtocolError : ProviderError {
    explicit ProtocolError(const std::string& msg) : ProviderError(msg) {}
};

// The server does not implement the requested endpoint (HTTP 404). Lets
// callers fall back when an optional endpoint is absent.
struct EndpointMissing : ProtocolError {
    explicit EndpointMissing(const std::string& msg) : ProtocolError(msg) {}
};

// Internal invariant broke (e.g. covariance repair failed). Not expected
// to be reachable from valid inputs.
struct InternalError : Error {
    explicit InternalError(const std::string& msg) : Error("internal error: " + msg) {}
};

}  // namespace advpose
