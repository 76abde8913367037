#pragma once

#include <charconv>
#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "kerf/dataset.hpp"
#include "kerf/scaling.hpp"

namespace kerf {

// Plain numeric CSV: one header row naming the columns, then rows of decimal
// numbers ('.' separator, no quoting or locale handling).  Values are stored
// row-major.
struct RawTable {
    std::vector<std::string> names;
    std::vector<double> values;   // rows * names.size()
    std::size_t rows = 0;

    std::size_t cols() const { return names.size(); }
    double at(std::size_t r, std::size_t c) const { return values[r * cols() + c]; }

    // Column index by header name; DataError when absent.
    std::size_t column(std::string_view name) const {
        for (std::size_t c = 0; c < names.size(); ++c)
            if (names[c] == name) return c;
        throw DataError("column '" + std::string(name) + "' not found in header");
    }
};

namespace detail {

inline void split_fields(std::string_view line, std::vector<std::string_view>& out) {
    out.clear();
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
    return s;
}

}  // namespace detail

// Parse a CSV stream.  Errors carry 1-based row/column positions, counting
// the header as row 1.  Blank lines are skipped.
inline RawTable read_csv(std::istream& in) {
    RawTable table;
    std::string line;
    std::vector<std::string_view> fields;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const std::string_view stripped = detail::trim(line);
        if (stripped.empty()) continue;
        detail::split_fields(line, fields);
        if (table.names.empty()) {
            for (auto f : fields) {
                const auto name = detail::trim(f);
                if (name.empty())
                    throw DataError("row 1: empty column name in header");
                table.names.emplace_back(name);
            }
            continue;
        }
        if (fields.size() != table.cols())
            throw DataError("row " + std::to_string(lineno) + ": expected " +
                            std::to_string(table.cols()) + " fields, found " +
                            std::to_string(fields.size()));
        for (std::size_t c = 0; c < fields.size(); ++c) {
            const auto f = detail::trim(fields[c]);
            double v = 0.0;
            const auto* first = f.data();
            const auto* last = f.data() + f.size();
            const auto [ptr, ec] = std::from_chars(first, last, v);
            if (ec != std::errc{} || ptr != last)
                throw DataError("row " + std::to_string(lineno) + ", column " +
                                std::to_string(c + 1) + " ('" + table.names[c] +
                                "'): not a number: '" + std::string(f) + "'");
            table.values.push_back(v);
        }
        ++table.rows;
    }
    if (table.names.empty()) throw DataError("empty CSV: missing header row");
    if (table.rows == 0) throw DataError("CSV has a header but no data rows");
    return table;
}

inline RawTable read_csv_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open '" + path + "'");
    try {
        return read_csv(in);
    } catch (const DataError& e) {
        throw DataError(path + ": " + e.what());
    }
}

// Shortest round-trip decimal form; integral values keep a trailing ".0" so
// every cell stays recognisably floating point.
inline std::string format_double(double v) {
    char buf[32];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    std::string s(buf, ptr);
    if (s.find('.') == std::string::npos && s.find('e') == std::string::npos &&
        s.find("inf") == std::string::npos && s.find("nan") == std::string::npos)
        s += ".0";
    return s;
}

inline void write_csv(std::ostream& out, std::span<const std::string> names,
                      std::span<const double> values, std::size_t rows) {
    const std::size_t cols = names.size();
    for (std::size_t c = 0; c < cols; ++c) {
        if (c) out << ',';
        out << names[c];
    }
    out << '\n';
    for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c) out << ',';
            out << format_double(values[r * cols + c]);
        }
        out << '\n';
    }
}

// Assemble a Dataset from a table: the named column becomes the response,
// every other column a feature (in header order).  With scale=true features
// are minmax-mapped onto [0,1] and the fitted transform is returned;
// otherwise features must already lie in [0,1].
inline std::pair<Dataset, ScalingParams> make_dataset(const RawTable& table,
                                                      std::string_view response,
                                                      bool scale) {
    const std::size_t rcol = table.column(response);
    const std::size_t cols = table.cols();
    if (cols < 2)
        throw DataError("need at least one feature column besides the response");
    const std::size_t d = cols - 1;
    std::vector<double> xs;
    xs.reserve(table.rows * d);
    std::vector<double> ys;
    ys.reserve(table.rows);
    for (std::size_t r = 0; r < table.rows; ++r) {
        for (std::size_t c = 0; c < cols; ++c) {
            if (c == rcol) continue;
            xs.push_back(table.at(r, c));
        }
        ys.push_back(table.at(r, rcol));
    }
    ScalingParams params;
    if (scale) {
        auto [scaled, p] = minmax_scale(xs, table.rows, d);
        xs = std::move(scaled);
        params = std::move(p);
    }
    try {
        return {Dataset(std::move(xs), std::move(ys), static_cast<int>(d)),
                std::move(params)};
    } catch (const DataError& e) {
        throw DataError(std::string(e.what()) +
                        " (pass the scaling option to map features onto [0,1])");
    }
}

}  // namespace kerf
