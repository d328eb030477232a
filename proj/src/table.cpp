#include "table.hpp"

#include <cerrno>
#include <cstdlib>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace ebal {

namespace {

std::vector<std::string> split_line(const std::string& line, char delim) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == delim) {
            out.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(cur);
    return out;
}

std::string strip(const std::string& s) {
    size_t b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return "";
    size_t e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

}  // namespace

TextTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open file: " + path);
    TextTable t;
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("empty file: " + path);
    t.delimiter = line.find('\t') != std::string::npos ? '\t' : ',';
    for (auto& cell : split_line(line, t.delimiter)) t.header.push_back(strip(cell));
    size_t ncol = t.header.size();
    size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (strip(line).empty()) continue;
        auto cells = split_line(line, t.delimiter);
        if (cells.size() != ncol)
            throw std::runtime_error(path + ": line " + std::to_string(lineno) + " has " +
                                     std::to_string(cells.size()) + " fields, expected " +
                                     std::to_string(ncol));
        for (auto& c : cells) c = strip(c);
        t.rows.push_back(std::move(cells));
    }
    if (t.rows.empty()) throw std::runtime_error("no data rows in " + path);
    return t;
}

void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, char delimiter) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write file: " + path);
    for (size_t j = 0; j < header.size(); ++j)
        out << header[j] << (j + 1 < header.size() ? delimiter : '\n');
    for (const auto& row : rows)
        for (size_t j = 0; j < row.size(); ++j)
            out << row[j] << (j + 1 < row.size() ? delimiter : '\n');
}

bool parse_double(const std::string& s, double& out) {
    if (s.empty()) return false;
    errno = 0;
    char* end = nullptr;
    out = std::strtod(s.c_str(), &end);
    return end == s.c_str() + s.size() && errno == 0;
}

std::string format_full(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::string format_short(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.6g", v);
    return buf;
}

}  // namespace ebal
