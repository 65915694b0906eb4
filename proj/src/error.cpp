#include "kgprune/error.hpp"

namespace kgp {

std::string_view to_string(ErrorKind kind) noexcept {
    switch (kind) {
        case ErrorKind::MalformedId: return "MalformedId";
        case ErrorKind::NotFound: return "NotFound";
        case ErrorKind::TransportError: return "TransportError";
        case ErrorKind::QueryRefused: return "QueryRefused";
        case ErrorKind::ParseError: return "ParseError";
        case ErrorKind::IoError: return "IoError";
        case ErrorKind::FormatError: return "FormatError";
        case ErrorKind::EmptySnapshot: return "EmptySnapshot";
        case ErrorKind::MissingEmbedding: return "MissingEmbedding";
        case ErrorKind::DegenerateInput: return "DegenerateInput";
        case ErrorKind::InsufficientData: return "InsufficientData";
        case ErrorKind::NonFiniteLoss: return "NonFiniteLoss";
        case ErrorKind::DimensionMismatch: return "DimensionMismatch";
        case ErrorKind::SchemaError: return "SchemaError";
        case ErrorKind::ValidationError: return "ValidationError";
        case ErrorKind::SeedUnembedded: return "SeedUnembedded";
        case ErrorKind::UnknownJob: return "UnknownJob";
        case ErrorKind::NotReady: return "NotReady";
        case ErrorKind::UnsupportedFormat: return "UnsupportedFormat";
        case ErrorKind::Gone: return "Gone";
        case ErrorKind::PayloadTooLarge: return "PayloadTooLarge";
        case ErrorKind::JobFailed: return "JobFailed";
    }
    return "Unknown";
}

}  // namespace kgp
