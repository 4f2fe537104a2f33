#include "qmig/csv.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace qmig::csv {

std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    // %.17g round-trips any finite double; shorter representations are kept
    // short by printf (e.g. 0.5 prints as "0.5", not "0.50000000000000000").
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_fixed(double v, int digits) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
    return buf;
}

std::vector<std::string> split_line(const std::string& line) {
    std::vector<std::string> fields;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            fields.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (!cur.empty() && cur.back() == '\r') cur.pop_back();
    fields.push_back(cur);
    return fields;
}

double parse_double(const std::string& field) {
    if (field.empty()) throw std::runtime_error("csv: empty numeric field");
    if (field == "nan") return std::nan("");
    std::size_t pos = 0;
    double v = std::stod(field, &pos);
    if (pos != field.size()) {
        throw std::runtime_error("csv: malformed number '" + field + "'");
    }
    return v;
}

long long parse_int(const std::string& field) {
    if (field.empty()) throw std::runtime_error("csv: empty integer field");
    std::size_t pos = 0;
    long long v = std::stoll(field, &pos);
    if (pos != field.size()) {
        throw std::runtime_error("csv: malformed integer '" + field + "'");
    }
    return v;
}

std::vector<std::string> read_lines(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (!line.empty()) lines.push_back(line);
    }
    return lines;
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open file for writing: " + path);
    out << content;
    if (!out) throw std::runtime_error("write failed: " + path);
}

std::uint64_t fnv1a64(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

} // namespace qmig::csv
