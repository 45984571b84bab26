#pragma once

#include <cstdint>
#include <initializer_list>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

namespace sqz {

/// Shortest round-trip decimal form, independent of locale and stream state.
std::string format_number(double value);
std::string format_number(std::int64_t value);
std::string format_number(std::uint64_t value);

/// Minimal comma-separated writer. Lines starting with '#' carry metadata (units, axes).
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void comment(std::string_view text);
  void header(std::initializer_list<std::string_view> columns);
  void row(const std::vector<double>& values);
  void row(std::initializer_list<double> values) { row(std::vector<double>(values)); }
  void raw_row(const std::vector<std::string>& cells);

 private:
  std::ostream& out_;
};

/// Splits one CSV line on commas (no quoting support; our files never need it).
std::vector<std::string> split_csv_line(std::string_view line);

}  // namespace sqz
