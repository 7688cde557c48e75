#include "ftarga/csv.hpp"

#include "ftarga/error.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace ftarga {

std::string format_number(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.10g", v);
    return buf;
}

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
        throw InvalidInput("CSV has no column '" + name + "'");
    }
    return static_cast<std::size_t>(it - header.begin());
}

namespace {

std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string field;
    while (std::getline(ss, field, ',')) {
        out.push_back(field);
    }
    return out;
}

}  // namespace

CsvTable read_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw InvalidInput("cannot read " + path.string());
    }
    CsvTable table;
    std::string line;
    if (!std::getline(in, line)) {
        throw InvalidInput(path.string() + " is empty");
    }
    table.header = split_fields(line);
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) {
            continue;
        }
        const auto fields = split_fields(line);
        if (fields.size() != table.header.size()) {
            throw InvalidInput(path.string() + ":" + std::to_string(line_no) +
                               ": wrong number of fields");
        }
        std::vector<double> row;
        row.reserve(fields.size());
        for (const auto& f : fields) {
            try {
                row.push_back(std::stod(f));
            } catch (const std::exception&) {
                throw InvalidInput(path.string() + ":" + std::to_string(line_no) +
                                   ": not a number: '" + f + "'");
            }
        }
        table.rows.push_back(std::move(row));
    }
    return table;
}

}  // namespace ftarga
