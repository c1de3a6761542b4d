#pragma once

#include <filesystem>
#include <functional>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace fedrate::csv {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

double parse_double(std::string_view text);
long long parse_int(std::string_view text);

std::vector<std::string> split_line(std::string_view line, char sep = ',');

// Reads a header line and rows; blank lines are skipped.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  // Index of a column; throws FormatError naming the column if absent.
  std::size_t column(std::string_view name) const;
};

Table read_table(std::istream& in);

// Writes through `body` into a sibling temp file, then renames it over
// `path`. Nothing is left at `path` if `body` throws.
void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& body);

}  // namespace fedrate::csv
