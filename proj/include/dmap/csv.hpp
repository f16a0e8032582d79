#pragma once

#include <Eigen/Dense>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "dmap/data_matrix.hpp"
#include "dmap/error.hpp"

namespace dmap {

struct CsvOptions {
    bool has_header = false;
};

namespace detail {

inline double parse_cell(std::string_view cell, std::size_t line) {
    while (!cell.empty() && (cell.front() == ' ' || cell.front() == '\t')) {
        cell.remove_prefix(1);
    }
    while (!cell.empty() && (cell.back() == ' ' || cell.back() == '\t')) {
        cell.remove_suffix(1);
    }
    if (!cell.empty() && cell.front() == '+') {
        cell.remove_prefix(1);
    }
    double value = 0.0;
    const auto [end, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), value);
    if (cell.empty() || ec != std::errc() || end != cell.data() + cell.size()) {
        throw ParseError("non-numeric cell '" + std::string(cell) + "'", line);
    }
    if (!std::isfinite(value)) {
        throw ParseError("non-finite cell '" + std::string(cell) + "'", line);
    }
    return value;
}

}  // namespace detail

/// Parses comma-separated numbers. Accepts LF or CRLF; one optional header row.
inline DataMatrix parse_csv(std::istream& in, const CsvOptions& options = {}) {
    std::vector<double> cells;
    Index cols = -1;
    Index rows = 0;
    std::size_t line_no = 0;
    std::size_t blank_line = 0;
    std::string line;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') {
            line.pop_back();
        }
        if (line_no == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) {
            line.erase(0, 3);
        }
        if (line_no == 1 && options.has_header) {
            continue;
        }
        if (line.empty()) {
            if (blank_line == 0) {
                blank_line = line_no;
            }
            continue;
        }
        if (blank_line != 0) {
            throw ParseError("blank line inside data", blank_line);
        }
        Index count = 0;
        std::string_view rest(line);
        while (true) {
            const auto comma = rest.find(',');
            cells.push_back(detail::parse_cell(rest.substr(0, comma), line_no));
            ++count;
            if (comma == std::string_view::npos) {
                break;
            }
            rest.remove_prefix(comma + 1);
        }
        if (cols < 0) {
            cols = count;
        } else if (count != cols) {
            throw ParseError("expected " + std::to_string(cols) + " columns, found " +
                                 std::to_string(count),
                             line_no);
        }
        ++rows;
    }
    if (rows == 0) {
        throw ParseError("no data rows", line_no == 0 ? 1 : line_no);
    }
    if (rows < 2) {
        throw ParseError("need at least 2 data rows", line_no);
    }
    RowMatrix values = Eigen::Map<const RowMatrix>(cells.data(), rows, cols);
    return DataMatrix(std::move(values));
}

inline DataMatrix load_csv(const std::string& path, const CsvOptions& options = {}) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw ParseError("cannot open '" + path + "'", 0);
    }
    return parse_csv(in, options);
}

/// 17 significant digits, enough for an exact round trip.
inline std::string format_real(double value) {
    char buf[32];
    const int len = std::snprintf(buf, sizeof buf, "%.17g", value);
    return {buf, static_cast<std::size_t>(len)};
}

/// Writes rows with 17 significant digits and LF line endings.
template <typename Derived>
void write_csv(std::ostream& out, const Eigen::DenseBase<Derived>& m,
               const std::vector<std::string>& header = {}) {
    if (!header.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            out << (c ? "," : "") << header[c];
        }
        out << '\n';
    }
    for (Index i = 0; i < m.rows(); ++i) {
        for (Index j = 0; j < m.cols(); ++j) {
            out << (j ? "," : "") << format_real(m(i, j));
        }
        out << '\n';
    }
}

template <typename Derived>
void write_csv(const std::string& path, const Eigen::DenseBase<Derived>& m,
               const std::vector<std::string>& header = {}) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw Error("cannot open '" + path + "' for writing");
    }
    write_csv(out, m, header);
    if (!out) {
        throw Error("failed writing '" + path + "'");
    }
}

}  // namespace dmap
