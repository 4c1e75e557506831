#pragma once

#include "decongest/types.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

namespace decongest {

/// A CSV cell: empty, text, integer, or real.
using Cell = std::variant<std::monostate, std::string, long long, double>;
using Row = std::map<std::string, Cell>;

/// Shortest round-trip text for doubles; NaN becomes an empty cell.
inline std::string format_cell(const Cell& c)
{
    if (std::holds_alternative<std::monostate>(c)) return "";
    if (const auto* s = std::get_if<std::string>(&c)) return *s;
    if (const auto* i = std::get_if<long long>(&c)) return std::to_string(*i);
    const double d = std::get<double>(c);
    if (std::isnan(d)) return "";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, d);
    return std::string(buf, res.ptr);
}

inline double cell_number(const std::string& text)
{
    if (text.empty()) return std::nan("");
    double d = 0.0;
    const auto res = std::from_chars(text.data(), text.data() + text.size(), d);
    if (res.ec != std::errc() || res.ptr != text.data() + text.size()) throw Error("table: '" + text + "' is not a number");
    return d;
}

/// Long-format table with a fixed column order.
class Table {
public:
    Table() = default;
    explicit Table(std::vector<std::string> columns) : columns_(std::move(columns)) {}

    const std::vector<std::string>& columns() const { return columns_; }
    std::size_t size() const { return rows_.size(); }
    const std::vector<std::string>& row(std::size_t r) const { return rows_.at(r); }

    void add(const Row& row)
    {
        std::vector<std::string> cells(columns_.size());
        for (const auto& [name, value] : row) {
            const std::size_t c = index(name);
            cells[c] = format_cell(value);
        }
        rows_.push_back(std::move(cells));
    }

    std::size_t index(const std::string& column) const
    {
        for (std::size_t c = 0; c < columns_.size(); ++c)
            if (columns_[c] == column) return c;
        throw Error("table: unknown column '" + column + "'");
    }

    bool has_column(const std::string& column) const
    {
        for (const auto& c : columns_)
            if (c == column) return true;
        return false;
    }

    const std::string& at(std::size_t r, const std::string& column) const { return rows_.at(r).at(index(column)); }
    double number(std::size_t r, const std::string& column) const { return cell_number(at(r, column)); }

    void write_csv(std::ostream& out) const
    {
        write_line(out, columns_);
        for (const auto& r : rows_) write_line(out, r);
    }

    std::string to_csv() const
    {
        std::ostringstream os;
        write_csv(os);
        return os.str();
    }

    /// Reads the plain comma-separated format written by write_csv.
    static Table read_csv(std::istream& in)
    {
        std::string line;
        if (!std::getline(in, line)) throw Error("table: empty CSV");
        Table t(split(line));
        std::size_t line_no = 1;
        while (std::getline(in, line)) {
            ++line_no;
            if (line.empty()) continue;
            std::vector<std::string> cells = split(line);
            if (cells.size() != t.columns_.size())
                throw Error("table: line " + std::to_string(line_no) + " has " + std::to_string(cells.size()) +
                            " cells, expected " + std::to_string(t.columns_.size()));
            t.rows_.push_back(std::move(cells));
        }
        return t;
    }

private:
    static std::vector<std::string> split(const std::string& line)
    {
        std::vector<std::string> out;
        std::size_t start = 0;
        for (;;) {
            const std::size_t comma = line.find(',', start);
            out.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
            if (comma == std::string::npos) break;
            start = comma + 1;
        }
        return out;
    }

    static void write_line(std::ostream& out, const std::vector<std::string>& cells)
    {
        for (std::size_t c = 0; c < cells.size(); ++c) {
            if (c) out << ',';
            out << cells[c];
        }
        out << '\n';
    }

    std::vector<std::string> columns_;
    std::vector<std::vector<std::string>> rows_;
};

}  // namespace decongest
