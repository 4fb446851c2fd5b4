#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fqb::csv {

/// A parsed CSV file: one header row plus data rows. Fields follow RFC 4180
/// quoting. `line_numbers[i]` is the 1-based source line where row i starts.
struct Table {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;
    std::vector<std::size_t> line_numbers;

    /// Column index of `name`, or npos.
    std::size_t column(std::string_view name) const;
    static constexpr std::size_t npos = static_cast<std::size_t>(-1);
};

/// Throws DataError on unreadable files, unterminated quotes, or rows whose
/// field count differs from the header.
Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source_name);

/// Quotes a field only when it contains a comma, quote, or line break.
std::string escape(std::string_view field);

void write_row(std::ostream& out, const std::vector<std::string>& fields);

/// Shortest decimal representation that round-trips to the same value.
std::string format_double(double value);
std::string format_float(float value);

/// Strict decimal parse of the whole field; throws DataError naming `context`.
double parse_double(std::string_view field, std::string_view context);

}  // namespace fqb::csv
