#pragma once
// The two user-supplied input files: one QID per line and one (optionally "(-)") PID per line.

#include <cstddef>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kgprune/kg_store.hpp"

namespace kgp {

struct LineError {
    std::size_t line = 0;   // 1-based
    std::string text;
    std::string message;
};

template <typename T>
struct ParsedLines {
    std::vector<T> values;
    std::vector<LineError> errors;

    bool ok() const noexcept { return errors.empty(); }
};

// Blank lines are skipped; a UTF-8 byte order mark and CR line endings are tolerated.
ParsedLines<EntityId> parse_qid_lines(std::string_view text);
ParsedLines<PropertySpec> parse_pid_lines(std::string_view text);

// "<label> line N: message" per error, newline separated.
std::string describe(std::string_view label, std::span<const LineError> errors);

}  // namespace kgp
