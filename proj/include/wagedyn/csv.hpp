#pragma once

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "wagedyn/core.hpp"

namespace wagedyn {

/// All reals are serialized with 12 significant digits.
inline std::string format_real(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

inline std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char ch : line) {
        if (ch == delim) {
            out.push_back(cur);
            cur.clear();
        } else if (ch != '\r') {
            cur.push_back(ch);
        }
    }
    out.push_back(cur);
    return out;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<long> line_numbers;  // 1-based source line per row

    int column(const std::string& name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name) return static_cast<int>(i);
        return -1;
    }
};

/// Reads a delimited file with a header row. Lines starting with '#' are
/// skipped (used for manifest references in exported tables).
inline CsvTable read_csv(std::istream& in, char delim = ',') {
    CsvTable t;
    std::string line;
    long lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line[0] == '#') continue;
        if (line.empty()) continue;
        auto fields = split_line(line, delim);
        if (!have_header) {
            t.header = std::move(fields);
            have_header = true;
        } else {
            t.rows.push_back(std::move(fields));
            t.line_numbers.push_back(lineno);
        }
    }
    if (!have_header) throw InputError("empty input: no header row");
    return t;
}

inline CsvTable read_csv_file(const std::string& path, char delim = ',') {
    std::ifstream in(path);
    if (!in) throw InputError("cannot open file: " + path);
    return read_csv(in, delim);
}

inline double parse_real(const std::string& s, long line, const std::string& col) {
    try {
        std::size_t pos = 0;
        double v = std::stod(s, &pos);
        if (pos != s.size()) throw std::invalid_argument("trailing");
        return v;
    } catch (const std::exception&) {
        throw InputError("malformed real '" + s + "' in column " + col + " (line " +
                         std::to_string(line) + ")");
    }
}

inline long parse_int(const std::string& s, long line, const std::string& col) {
    long v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || p != s.data() + s.size())
        throw InputError("malformed integer '" + s + "' in column " + col + " (line " +
                         std::to_string(line) + ")");
    return v;
}

}  // namespace wagedyn
