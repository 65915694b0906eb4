#include "kgprune/rdf.hpp"

#include <cctype>
#include <charconv>
#include <cstdio>

#include "kgprune/error.hpp"

namespace kgp::rdf {
namespace {

class LineParser {
public:
    explicit LineParser(std::string_view line) : s_(line) {}

    void skip_ws() {
        while (pos_ < s_.size() && (s_[pos_] == ' ' || s_[pos_] == '\t' || s_[pos_] == '\r')) ++pos_;
    }
    bool at_end() const { return pos_ >= s_.size(); }
    char peek() const { return at_end() ? '\0' : s_[pos_]; }

    [[noreturn]] void error(const std::string& what) const {
        fail(ErrorKind::ParseError, "N-Triples: " + what + " at column " + std::to_string(pos_ + 1));
    }

    Term term() {
        skip_ws();
        const char c = peek();
        if (c == '<') return Term{Term::Kind::Iri, iri(), {}, {}};
        if (c == '"') return literal();
        if (c == '_' ) return blank();
        error("expected term");
    }

    void expect_dot() {
        skip_ws();
        if (peek() != '.') error("expected '.'");
        ++pos_;
        skip_ws();
        if (!at_end() && peek() != '#') error("trailing characters");
    }

private:
    std::string iri() {
        ++pos_;  // '<'
        std::string out;
        while (!at_end() && peek() != '>') {
            const char c = s_[pos_];
            if (c == ' ' || c == '<' || c == '"' || c == '{' || c == '}' || c == '|' || c == '^' ||
                c == '`' || c == '\\' || static_cast<unsigned char>(c) <= 0x20)
                error("invalid character in IRI");
            out.push_back(c);
            ++pos_;
        }
        if (at_end()) error("unterminated IRI");
        ++pos_;  // '>'
        if (out.empty()) error("empty IRI");
        return out;
    }

    static void append_utf8(std::string& out, std::uint32_t cp) {
        if (cp < 0x80) {
            out.push_back(static_cast<char>(cp));
        } else if (cp < 0x800) {
            out.push_back(static_cast<char>(0xC0 | (cp >> 6)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else if (cp < 0x10000) {
            out.push_back(static_cast<char>(0xE0 | (cp >> 12)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        } else {
            out.push_back(static_cast<char>(0xF0 | (cp >> 18)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 12) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | ((cp >> 6) & 0x3F)));
            out.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
        }
    }

    std::uint32_t hex(std::size_t digits) {
        if (pos_ + digits > s_.size()) error("truncated unicode escape");
        std::uint32_t cp = 0;
        const auto [ptr, ec] = std::from_chars(s_.data() + pos_, s_.data() + pos_ + digits, cp, 16);
        if (ec != std::errc{} || ptr != s_.data() + pos_ + digits) error("bad unicode escape");
        pos_ += digits;
        if (cp > 0x10FFFF || (cp >= 0xD800 && cp <= 0xDFFF)) error("invalid code point");
        return cp;
    }

    Term literal() {
        ++pos_;  // '"'
        Term t{Term::Kind::Literal, {}, {}, {}};
        for (;;) {
            if (at_end()) error("unterminated literal");
            const char c = s_[pos_++];
            if (c == '"') break;
            if (c == '\n' || c == '\r') error("raw line break in literal");
            if (c != '\\') {
                t.value.push_back(c);
                continue;
            }
            if (at_end()) error("dangling escape");
            const char e = s_[pos_++];
            switch (e) {
                case 't': t.value.push_back('\t'); break;
                case 'b': t.value.push_back('\b'); break;
                case 'n': t.value.push_back('\n'); break;
                case 'r': t.value.push_back('\r'); break;
                case 'f': t.value.push_back('\f'); break;
                case '"': t.value.push_back('"'); break;
                case '\'': t.value.push_back('\''); break;
                case '\\': t.value.push_back('\\'); break;
                case 'u': append_utf8(t.value, hex(4)); break;
                case 'U': append_utf8(t.value, hex(8)); break;
                default: error("unknown escape");
            }
        }
        if (peek() == '@') {
            ++pos_;
            const std::size_t start = pos_;
            while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '-')) ++pos_;
            t.language = std::string(s_.substr(start, pos_ - start));
            if (t.language.empty() || !std::isalpha(static_cast<unsigned char>(t.language.front())))
                error("bad language tag");
        } else if (peek() == '^') {
            if (pos_ + 1 >= s_.size() || s_[pos_ + 1] != '^') error("expected '^^'");
            pos_ += 2;
            if (peek() != '<') error("expected datatype IRI");
            t.datatype = iri();
        }
        return t;
    }

    Term blank() {
        if (s_.substr(pos_, 2) != "_:") error("expected blank node");
        pos_ += 2;
        const std::size_t start = pos_;
        while (!at_end() && (std::isalnum(static_cast<unsigned char>(peek())) || peek() == '_' ||
                             peek() == '-' || peek() == '.'))
            ++pos_;
        // A trailing '.' belongs to the statement terminator.
        while (pos_ > start && s_[pos_ - 1] == '.') --pos_;
        if (pos_ == start) error("empty blank node label");
        return Term{Term::Kind::BlankNode, std::string(s_.substr(start, pos_ - start)), {}, {}};
    }

    std::string_view s_;
    std::size_t pos_ = 0;
};

std::optional<std::uint64_t> number_after(std::string_view iri, std::string_view prefix, char letter) {
    if (!iri.starts_with(prefix)) return std::nullopt;
    iri.remove_prefix(prefix.size());
    if (iri.size() < 2 || iri.front() != letter || iri[1] < '1' || iri[1] > '9') return std::nullopt;
    std::uint64_t value = 0;
    const auto [ptr, ec] = std::from_chars(iri.data() + 1, iri.data() + iri.size(), value);
    if (ec != std::errc{} || ptr != iri.data() + iri.size()) return std::nullopt;
    return value;
}

}  // namespace

std::optional<Statement> parse_line(std::string_view line) {
    LineParser p(line);
    p.skip_ws();
    if (p.at_end() || p.peek() == '#') return std::nullopt;
    Statement st;
    st.subject = p.term();
    if (st.subject.kind == Term::Kind::Literal) p.error("literal subject");
    st.predicate = p.term();
    if (st.predicate.kind != Term::Kind::Iri) p.error("predicate must be an IRI");
    st.object = p.term();
    p.expect_dot();
    return st;
}

std::string escape_literal(std::string_view text) {
    std::string out;
    out.reserve(text.size() + 2);
    for (char c : text) {
        switch (c) {
            case '\\': out += "\\\\"; break;
            case '"': out += "\\\""; break;
            case '\n': out += "\\n"; break;
            case '\r': out += "\\r"; break;
            case '\t': out += "\\t"; break;
            default:
                if (static_cast<unsigned char>(c) < 0x20) {
                    char buf[8];
                    std::snprintf(buf, sizeof buf, "\\u%04X", static_cast<unsigned>(c));
                    out += buf;
                } else {
                    out.push_back(c);
                }
        }
    }
    return out;
}

std::string entity_iri(EntityId id) {
    return std::string(kEntityPrefix) + to_string(id);
}

std::string property_iri(std::uint64_t property) {
    return std::string(kDirectPropertyPrefix) + property_text(property);
}

std::optional<EntityId> entity_from_iri(std::string_view iri) {
    if (auto n = number_after(iri, kEntityPrefix, 'Q')) return EntityId{*n};
    return std::nullopt;
}

std::optional<std::uint64_t> property_from_iri(std::string_view iri) {
    return number_after(iri, kDirectPropertyPrefix, 'P');
}

std::string triple_line(const Triple& t) {
    return "<" + entity_iri(t.subject) + "> <" + property_iri(t.property) + "> <" +
           entity_iri(t.object) + "> .";
}

namespace {
std::string literal_line(EntityId id, std::string_view predicate, std::string_view text,
                         std::string_view language) {
    std::string line = "<" + entity_iri(id) + "> <" + std::string(predicate) + "> \"" +
                       escape_literal(text) + "\"";
    if (!language.empty()) line += "@" + std::string(language);
    return line + " .";
}
}  // namespace

std::string label_line(EntityId id, const Label& label) {
    return literal_line(id, kRdfsLabel, label.text, label.language);
}

std::string description_line(EntityId id, const Label& label) {
    return literal_line(id, kSchemaDescription, label.description, label.language);
}

}  // namespace kgp::rdf
