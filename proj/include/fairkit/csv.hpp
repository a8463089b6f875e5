#pragma once

#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace fairkit::csv {

struct Table {
  std::vector<std::string> header;
  // rows[i] holds the cells of data row i; its source line is i + 2 (header is line 1).
  std::vector<std::vector<std::string>> rows;

  // Throws DataError when the column is absent.
  std::size_t column(std::string_view name) const;
  std::optional<std::size_t> find_column(std::string_view name) const;
};

// Comma-delimited, header row required, RFC-4180 style double-quoted fields.
// Rows whose width differs from the header are rejected with their line number.
Table read(std::istream& in);
Table read_file(const std::string& path);

void write_row(std::ostream& out, const std::vector<std::string>& cells);

// "%.17g" rendering (round-trips every finite double); used for all emitted reals.
std::string format_double(double value);

// Strict numeric parse of an entire cell; std::nullopt on failure or empty text.
std::optional<double> parse_double(std::string_view text);

}  // namespace fairkit::csv
