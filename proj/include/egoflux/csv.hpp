#pragma once

#include <istream>
#include <optional>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace egoflux::csv {

using Record = std::vector<std::string>;

/// Streaming RFC 4180 reader. Quoted fields may contain separators, doubled
/// quotes, and line breaks. CRLF and LF line endings are both accepted.
class Reader {
public:
    explicit Reader(std::istream& in) : in_(in) {}

    /// Reads the next record. Returns nullopt at end of input. A record with an
    /// unterminated quote or stray characters after a closing quote sets
    /// `malformed()` for that record; the record is still returned so callers
    /// can skip and count it.
    std::optional<Record> next() {
        malformed_ = false;
        Record record;
        std::string field;
        bool in_quotes = false;
        bool after_quote = false;
        bool any = false;
        int c = 0;
        while ((c = in_.get()) != std::char_traits<char>::eof()) {
            any = true;
            const char ch = static_cast<char>(c);
            if (in_quotes) {
                if (ch == '"') {
                    if (in_.peek() == '"') {
                        in_.get();
                        field.push_back('"');
                    } else {
                        in_quotes = false;
                        after_quote = true;
                    }
                } else {
                    field.push_back(ch);
                }
                continue;
            }
            if (ch == ',') {
                record.push_back(std::move(field));
                field.clear();
                after_quote = false;
            } else if (ch == '\n' || ch == '\r') {
                if (ch == '\r' && in_.peek() == '\n') in_.get();
                record.push_back(std::move(field));
                ++line_;
                return record;
            } else if (ch == '"' && field.empty() && !after_quote) {
                in_quotes = true;
            } else {
                if (after_quote) malformed_ = true;
                field.push_back(ch);
            }
        }
        if (!any) return std::nullopt;
        if (in_quotes) malformed_ = true;
        record.push_back(std::move(field));
        ++line_;
        return record;
    }

    bool malformed() const { return malformed_; }
    std::size_t records_read() const { return line_; }

private:
    std::istream& in_;
    bool malformed_ = false;
    std::size_t line_ = 0;
};

inline std::string quote(std::string_view field) {
    const bool needs = field.find_first_of(",\"\r\n") != std::string_view::npos;
    if (!needs) return std::string(field);
    std::string out = "\"";
    for (char ch : field) {
        if (ch == '"') out.push_back('"');
        out.push_back(ch);
    }
    out.push_back('"');
    return out;
}

inline void write_record(std::ostream& out, const Record& record) {
    for (std::size_t i = 0; i < record.size(); ++i) {
        if (i) out << ',';
        out << quote(record[i]);
    }
    out << '\n';
}

}  // namespace egoflux::csv
