#pragma once

#include <string>
#include <vector>

namespace fdrmix {

enum class HeaderMode { automatic, present, absent };

/// Column-oriented numeric table from delimited text. All cells must parse as
/// finite numbers ("." decimal point, no locale); violations raise parse_error
/// with the 1-based line number.
struct InputTable {
    std::vector<std::string> column_names; // empty when the file had no header
    std::vector<std::vector<double>> columns;

    std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
    std::size_t cols() const { return columns.size(); }
};

InputTable read_table(const std::string& path, char delimiter = ',',
                      HeaderMode header = HeaderMode::automatic);

InputTable parse_table(const std::string& text, char delimiter = ',',
                       HeaderMode header = HeaderMode::automatic);

} // namespace fdrmix
