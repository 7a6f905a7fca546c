#include "fdrmix/table_io.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "fdrmix/errors.hpp"

namespace fdrmix {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

std::vector<std::string_view> split(std::string_view line, char delim) {
    std::vector<std::string_view> cells;
    std::size_t start = 0;
    for (std::size_t i = 0; i <= line.size(); ++i) {
        if (i == line.size() || line[i] == delim) {
            cells.push_back(trim(line.substr(start, i - start)));
            start = i + 1;
        }
    }
    return cells;
}

bool parse_cell(std::string_view cell, double& out) {
    if (cell.empty()) return false;
    const char* first = cell.data();
    const char* last = cell.data() + cell.size();
    const auto [ptr, ec] = std::from_chars(first, last, out);
    return ec == std::errc() && ptr == last && std::isfinite(out);
}

} // namespace

InputTable parse_table(const std::string& text, char delimiter, HeaderMode header) {
    InputTable t;
    std::istringstream in(text);
    std::string line;
    std::size_t lineno = 0;
    bool saw_first = false;

    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view lv = trim(line);
        if (lv.empty()) continue;
        const auto cells = split(lv, delimiter);

        if (!saw_first) {
            saw_first = true;
            bool all_numeric = true;
            std::vector<double> vals(cells.size());
            for (std::size_t c = 0; c < cells.size(); ++c) {
                if (!parse_cell(cells[c], vals[c])) {
                    all_numeric = false;
                    break;
                }
            }
            const bool treat_as_header =
                header == HeaderMode::present ||
                (header == HeaderMode::automatic && !all_numeric);
            t.columns.resize(cells.size());
            if (treat_as_header) {
                for (const auto& c : cells) t.column_names.emplace_back(c);
                continue;
            }
            if (!all_numeric) {
                for (std::size_t c = 0; c < cells.size(); ++c) {
                    double v;
                    if (!parse_cell(cells[c], v)) {
                        throw parse_error(lineno, "line " + std::to_string(lineno) +
                                                      ": cell '" + std::string(cells[c]) +
                                                      "' is not a finite number");
                    }
                }
            }
            for (std::size_t c = 0; c < cells.size(); ++c) t.columns[c].push_back(vals[c]);
            continue;
        }

        if (cells.size() != t.columns.size()) {
            throw parse_error(lineno, "line " + std::to_string(lineno) + ": expected " +
                                          std::to_string(t.columns.size()) + " columns, got " +
                                          std::to_string(cells.size()));
        }
        for (std::size_t c = 0; c < cells.size(); ++c) {
            double v;
            if (!parse_cell(cells[c], v)) {
                throw parse_error(lineno, "line " + std::to_string(lineno) + ": cell '" +
                                              std::string(cells[c]) +
                                              "' is not a finite number");
            }
            t.columns[c].push_back(v);
        }
    }
    if (!saw_first) throw parse_error(0, "empty input table");
    return t;
}

InputTable read_table(const std::string& path, char delimiter, HeaderMode header) {
    std::ifstream f(path);
    if (!f) throw io_error("cannot open: " + path);
    std::ostringstream ss;
    ss << f.rdbuf();
    return parse_table(ss.str(), delimiter, header);
}

} // namespace fdrmix
