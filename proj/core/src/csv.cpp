#include "fedrate/csv.hpp"

#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <system_error>

#include "fedrate/error.hpp"

namespace fedrate::csv {

std::string format_double(double value) {
  std::array<char, 64> buf{};
  const auto result = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  return std::string(buf.data(), result.ptr);
}

double parse_double(std::string_view text) {
  double value = 0.0;
  const auto* first = text.data();
  const auto* last = text.data() + text.size();
  if (!text.empty() && text.front() == '+') ++first;
  const auto result = std::from_chars(first, last, value);
  if (result.ec != std::errc{} || result.ptr != last) {
    throw FormatError("not a number: '" + std::string(text) + "'");
  }
  return value;
}

long long parse_int(std::string_view text) {
  long long value = 0;
  const auto result = std::from_chars(text.data(), text.data() + text.size(), value);
  if (result.ec != std::errc{} || result.ptr != text.data() + text.size()) {
    throw FormatError("not an integer: '" + std::string(text) + "'");
  }
  return value;
}

std::vector<std::string> split_line(std::string_view line, char sep) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      fields.emplace_back(line.substr(start));
      break;
    }
    fields.emplace_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return fields;
}

std::size_t Table::column(std::string_view name) const {
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == name) return i;
  }
  throw FormatError("missing column '" + std::string(name) + "'");
}

Table read_table(std::istream& in) {
  Table table;
  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    auto fields = split_line(line);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw FormatError("row has " + std::to_string(fields.size()) + " fields, header has " +
                        std::to_string(table.header.size()));
    }
    table.rows.push_back(std::move(fields));
  }
  if (!have_header) throw FormatError("empty CSV");
  return table;
}

void write_atomically(const std::filesystem::path& path,
                      const std::function<void(std::ostream&)>& body) {
  auto tmp = path;
  tmp += ".tmp";
  try {
    {
      std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
      if (!out) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
      body(out);
      out.flush();
      if (!out) throw std::runtime_error("write to " + tmp.string() + " failed");
    }
    std::filesystem::rename(tmp, path);
  } catch (...) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw;
  }
}

}  // namespace fedrate::csv
