#include "fqb/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <system_error>

#include <fmt/core.h>

#include "fqb/error.hpp"

namespace fqb::csv {

std::size_t Table::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
        if (header[i] == name) return i;
    }
    return npos;
}

Table read(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(fmt::format("cannot open '{}'", path.string()));
    return parse(in, path.string());
}

Table parse(std::istream& in, const std::string& source_name) {
    Table table;
    std::vector<std::string> row;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    bool header_done = false;
    std::size_t line = 1;
    std::size_t row_line = 1;

    auto finish_row = [&] {
        row.push_back(std::move(field));
        field.clear();
        field_started = false;
        const bool blank = row.size() == 1 && row.front().empty();
        if (!blank) {
            if (!header_done) {
                table.header = std::move(row);
                header_done = true;
            } else {
                if (row.size() != table.header.size()) {
                    throw DataError(fmt::format("{}:{}: expected {} fields, found {}", source_name,
                                                row_line, table.header.size(), row.size()));
                }
                table.rows.push_back(std::move(row));
                table.line_numbers.push_back(row_line);
            }
        }
        row.clear();
    };

    char c;
    while (in.get(c)) {
        if (in_quotes) {
            if (c == '"') {
                if (in.peek() == '"') {
                    in.get(c);
                    field.push_back('"');
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field.push_back(c);
            }
            continue;
        }
        switch (c) {
            case '"':
                if (field_started) {
                    throw DataError(fmt::format("{}:{}: stray quote inside field", source_name, line));
                }
                in_quotes = true;
                field_started = true;
                break;
            case ',':
                row.push_back(std::move(field));
                field.clear();
                field_started = false;
                break;
            case '\r':
                break;
            case '\n':
                finish_row();
                ++line;
                row_line = line;
                break;
            default:
                field.push_back(c);
                field_started = true;
        }
    }
    if (in_quotes) throw DataError(fmt::format("{}:{}: unterminated quoted field", source_name, line));
    if (!row.empty() || !field.empty()) finish_row();
    if (!header_done) throw DataError(fmt::format("{}: empty file, missing header", source_name));
    // Strip a UTF-8 byte-order mark from the first header cell.
    if (!table.header.empty() && table.header.front().starts_with("\xEF\xBB\xBF")) {
        table.header.front().erase(0, 3);
    }
    return table;
}

std::string escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out.push_back('"');
        out.push_back(c);
    }
    out.push_back('"');
    return out;
}

void write_row(std::ostream& out, const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out << ',';
        out << escape(fields[i]);
    }
    out << '\n';
}

std::string format_double(double value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

std::string format_float(float value) {
    std::array<char, 64> buf{};
    auto [end, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
    return std::string(buf.data(), end);
}

double parse_double(std::string_view field, std::string_view context) {
    while (!field.empty() && (field.front() == ' ' || field.front() == '\t')) field.remove_prefix(1);
    while (!field.empty() && (field.back() == ' ' || field.back() == '\t')) field.remove_suffix(1);
    if (!field.empty() && field.front() == '+') field.remove_prefix(1);
    double value = 0.0;
    auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), value);
    if (field.empty() || ec != std::errc{} || ptr != field.data() + field.size()) {
        throw DataError(fmt::format("{}: cannot parse '{}' as a number", context, field));
    }
    return value;
}

}  // namespace fqb::csv
