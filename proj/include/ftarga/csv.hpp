#pragma once

#include <filesystem>
#include <string>
#include <vector>

namespace ftarga {

/// printf "%.10g".
[[nodiscard]] std::string format_number(double v);

/// A parsed comma-separated file with a header row.
struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    /// Index of a header column; throws InvalidInput if absent.
    [[nodiscard]] std::size_t column(const std::string& name) const;
};

[[nodiscard]] CsvTable read_csv(const std::filesystem::path& path);

}  // namespace ftarga
