#pragma once

#include <cstdint>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

namespace banditlab {

// Shortest exact decimal form of a double: 17 significant digits round-trip
// to the same bits on any IEEE-754 platform.
inline std::string csv_double(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_int(std::int64_t v) { return std::to_string(v); }
inline std::string csv_uint(std::uint64_t v) { return std::to_string(v); }

// RFC-4180 field quoting: quote when the field contains a comma, a quote,
// or a line break; embedded quotes are doubled.
inline std::string csv_escape(const std::string& field) {
    bool needs = false;
    for (char c : field)
        if (c == ',' || c == '"' || c == '\n' || c == '\r') { needs = true; break; }
    if (!needs) return field;
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += "\"\"";
        else out += c;
    }
    out += '"';
    return out;
}

// Row-oriented writer with LF line endings. Callers open streams in binary
// mode so no platform rewrites the terminators.
class CsvWriter {
public:
    explicit CsvWriter(std::ostream& os) : os_(os) {}

    void write_row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) {
            if (i) os_ << ',';
            os_ << csv_escape(fields[i]);
        }
        os_ << '\n';
    }

private:
    std::ostream& os_;
};

} // namespace banditlab
