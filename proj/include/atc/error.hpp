#pragma once

#include <stdexcept>
#include <string>
#include <utility>

namespace atc {

/// Error carrying a stable machine-readable code (e.g. "unsupported_language")
/// next to the human-readable message.
class Error : public std::runtime_error {
public:
    Error(std::string code, const std::string& message)
        : std::runtime_error(code + ": " + message), code_(std::move(code)) {}

    const std::string& code() const noexcept { return code_; }

private:
    std::string code_;
};

/// Transport-level failure talking to a backend. Safe to retry.
class TransportError : public Error {
public:
    TransportError(const std::string& message, int attempts)
        : Error("transport_failure", message + " (after " + std::to_string(attempts) + " attempts)"),
          attempts_(attempts) {}

    int attempts() const noexcept { return attempts_; }

private:
    int attempts_;
};

}  // namespace atc
