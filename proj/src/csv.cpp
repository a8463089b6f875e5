#include "fairkit/csv.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

#include "fairkit/error.hpp"

namespace fairkit::csv {
namespace {

// Splits one logical record. Quoted fields may contain commas, doubled quotes
// and newlines; `in` is consumed further when a quoted field spans lines.
bool read_record(std::istream& in, std::vector<std::string>& cells, std::size_t& line) {
  cells.clear();
  std::string raw;
  if (!std::getline(in, raw)) return false;
  ++line;
  if (!raw.empty() && raw.back() == '\r') raw.pop_back();

  std::string cell;
  bool quoted = false;
  std::size_t i = 0;
  while (true) {
    if (i == raw.size()) {
      if (quoted) {
        std::string next;
        if (!std::getline(in, next)) {
          throw DataError("line " + std::to_string(line) + ": unterminated quoted field");
        }
        ++line;
        if (!next.empty() && next.back() == '\r') next.pop_back();
        cell.push_back('\n');
        raw = std::move(next);
        i = 0;
        continue;
      }
      cells.push_back(std::move(cell));
      return true;
    }
    const char c = raw[i++];
    if (quoted) {
      if (c == '"') {
        if (i < raw.size() && raw[i] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
    } else if (c == '"' && cell.empty()) {
      quoted = true;
    } else if (c == ',') {
      cells.push_back(std::move(cell));
      cell.clear();
    } else {
      cell.push_back(c);
    }
  }
}

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::optional<std::size_t> Table::find_column(std::string_view name) const {
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (header[j] == name) return j;
  }
  return std::nullopt;
}

std::size_t Table::column(std::string_view name) const {
  if (auto j = find_column(name)) return *j;
  throw DataError("missing column '" + std::string(name) + "'");
}

Table read(std::istream& in) {
  Table table;
  std::size_t line = 0;
  std::vector<std::string> cells;
  if (!read_record(in, cells, line)) throw DataError("empty CSV: no header row");
  for (auto& h : cells) table.header.push_back(trim(h));
  // Strip a UTF-8 byte-order mark from the first header cell.
  if (!table.header.empty() && table.header[0].rfind("\xEF\xBB\xBF", 0) == 0) {
    table.header[0].erase(0, 3);
  }

  while (true) {
    const std::size_t start_line = line + 1;
    if (!read_record(in, cells, line)) break;
    if (cells.size() == 1 && cells[0].empty()) continue;  // blank line
    if (cells.size() != table.header.size()) {
      throw DataError("row " + std::to_string(start_line) + ": expected " +
                      std::to_string(table.header.size()) + " cells, found " +
                      std::to_string(cells.size()));
    }
    for (auto& c : cells) c = trim(c);
    table.rows.push_back(cells);
  }
  return table;
}

Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open '" + path + "'");
  return read(in);
}

void write_row(std::ostream& out, const std::vector<std::string>& cells) {
  for (std::size_t j = 0; j < cells.size(); ++j) {
    if (j) out << ',';
    const std::string& c = cells[j];
    if (c.find_first_of(",\"\n") != std::string::npos) {
      out << '"';
      for (char ch : c) {
        if (ch == '"') out << '"';
        out << ch;
      }
      out << '"';
    } else {
      out << c;
    }
  }
  out << '\n';
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

std::optional<double> parse_double(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) return std::nullopt;
  return value;
}

}  // namespace fairkit::csv
