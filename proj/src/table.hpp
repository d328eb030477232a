#pragma once
#include <string>
#include <vector>

namespace ebal {

// a parsed delimited text table: header + string cells
struct TextTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    char delimiter = ',';
};

TextTable read_table(const std::string& path);
void write_table(const std::string& path, const std::vector<std::string>& header,
                 const std::vector<std::vector<std::string>>& rows, char delimiter = '\t');

bool parse_double(const std::string& s, double& out);
std::string format_full(double v);   // round-trip precision, for files
std::string format_short(double v);  // 6 significant digits, for console

}  // namespace ebal
