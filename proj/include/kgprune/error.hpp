#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace kgp {

enum class ErrorKind {
    MalformedId,
    NotFound,
    TransportError,
    QueryRefused,
    ParseError,
    IoError,
    FormatError,
    EmptySnapshot,
    MissingEmbedding,
    DegenerateInput,
    InsufficientData,
    NonFiniteLoss,
    DimensionMismatch,
    SchemaError,
    ValidationError,
    SeedUnembedded,
    UnknownJob,
    NotReady,
    UnsupportedFormat,
    Gone,
    PayloadTooLarge,
    JobFailed,
};

std::string_view to_string(ErrorKind kind) noexcept;

// Every failure raised by the library carries a kind so that callers
// (CLI exit codes, HTTP status mapping) can branch without string matching.
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

}  // namespace kgp
