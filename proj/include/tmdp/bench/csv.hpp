#pragma once

#include "tmdp/error.hpp"

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace tmdp::bench {

/// Header plus rows of a plain comma-separated file (no quoting).
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    std::size_t column(std::string_view name) const {
        for (std::size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return i;
        throw Error("CSV has no column \"" + std::string(name) + "\"");
    }

    double number(std::size_t row, std::string_view name) const {
        const std::string& cell = rows.at(row).at(column(name));
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
        if (ec != std::errc{} || ptr != cell.data() + cell.size())
            throw Error("CSV cell \"" + cell + "\" in column \"" + std::string(name) +
                        "\" is not a number");
        return value;
    }

    const std::string& text(std::size_t row, std::string_view name) const {
        return rows.at(row).at(column(name));
    }

    std::vector<double> numbers(std::string_view name) const {
        std::vector<double> out;
        for (std::size_t r = 0; r < rows.size(); ++r)
            out.push_back(number(r, name));
        return out;
    }
};

inline std::vector<std::string> split(std::string_view line, char sep = ',') {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const std::size_t pos = line.find(sep, start);
        out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
        if (pos == std::string_view::npos)
            break;
        start = pos + 1;
    }
    return out;
}

inline CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw Error("cannot read " + path.string());
    CsvTable table;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        if (first) {
            table.header = split(line);
            first = false;
        } else {
            table.rows.push_back(split(line));
        }
    }
    return table;
}

/// Writes `content` to `path`, creating parent directories.
inline void write_text(const std::filesystem::path& path, const std::string& content) {
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw Error("cannot write " + path.string());
    out << content;
}

} // namespace tmdp::bench
