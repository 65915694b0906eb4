#include "kgprune/task_input.hpp"

#include "kgprune/error.hpp"

namespace kgp {
namespace {

template <typename T, typename Parse>
ParsedLines<T> parse_lines(std::string_view text, Parse parse) {
    if (text.starts_with("\xEF\xBB\xBF")) text.remove_prefix(3);
    ParsedLines<T> out;
    std::size_t line_no = 0;
    while (!text.empty()) {
        const auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
        ++line_no;
        if (line.find_first_not_of(" \t\r") == std::string_view::npos) continue;
        try {
            out.values.push_back(parse(line));
        } catch (const Error& e) {
            if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
            out.errors.push_back({line_no, std::string(line), e.what()});
        }
    }
    return out;
}

}  // namespace

ParsedLines<EntityId> parse_qid_lines(std::string_view text) {
    return parse_lines<EntityId>(text, parse_entity_id);
}

ParsedLines<PropertySpec> parse_pid_lines(std::string_view text) {
    return parse_lines<PropertySpec>(text, parse_property_spec);
}

std::string describe(std::string_view label, std::span<const LineError> errors) {
    std::string out;
    for (const auto& e : errors) {
        if (!out.empty()) out += '\n';
        out += std::string(label) + " line " + std::to_string(e.line) + ": " + e.message;
    }
    return out;
}

}  // namespace kgp
