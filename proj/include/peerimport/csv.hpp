#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace peerimport::csv {

// Minimal comma-separated reader. Quoted fields are not supported; none of
// the formats in this project need them.
class Reader {
 public:
  explicit Reader(const std::filesystem::path& path);

  const std::vector<std::string>& header() const { return header_; }
  // Column index for `name`; throws if absent.
  std::size_t column(std::string_view name) const;
  // -1 when absent.
  long find_column(std::string_view name) const;

  // Reads the next data row into `fields`. Returns false at end of file.
  bool next(std::vector<std::string_view>& fields);
  // 1-based line number of the row last returned by next().
  std::size_t line() const { return line_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
  std::string buffer_;
  std::size_t pos_ = 0;
  std::size_t line_ = 1;
  std::vector<std::string> header_;
};

std::vector<std::string_view> split(std::string_view line, char sep = ',');

double parse_double(std::string_view s, const Reader& r, std::string_view what);
long long parse_int(std::string_view s, const Reader& r, std::string_view what);

// Shortest round-trip representation; stable across runs of the same binary.
std::string format_double(double v);

}  // namespace peerimport::csv
