#include "peerimport/csv.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "peerimport/types.hpp"

namespace peerimport {

std::string_view origin_name(Origin o) {
  switch (o) {
    case Origin::EU: return "EU";
    case Origin::NonEU: return "nonEU";
    case Origin::Any: return "any";
  }
  return "?";
}

Origin parse_origin(std::string_view s) {
  if (s == "EU" || s == "eu") return Origin::EU;
  if (s == "nonEU" || s == "noneu" || s == "NonEU") return Origin::NonEU;
  if (s == "any" || s == "Any") return Origin::Any;
  throw Error("panel", "unknown origin '" + std::string(s) + "'", "use EU, nonEU or any");
}

}  // namespace peerimport

namespace peerimport::csv {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.back() == '\r' || s.back() == ' ' || s.back() == '\t')) s.remove_suffix(1);
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  return s;
}

}  // namespace

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    auto p = line.find(sep, start);
    if (p == std::string_view::npos) {
      out.push_back(trim(line.substr(start)));
      break;
    }
    out.push_back(trim(line.substr(start, p - start)));
    start = p + 1;
  }
  return out;
}

Reader::Reader(const std::filesystem::path& path) : path_(path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("io", "cannot open " + path.string(), "check the input path");
  std::ostringstream ss;
  ss << in.rdbuf();
  buffer_ = ss.str();
  // UTF-8 byte order mark
  if (buffer_.size() >= 3 && buffer_.compare(0, 3, "\xEF\xBB\xBF") == 0) pos_ = 3;
  auto eol = buffer_.find('\n', pos_);
  std::string_view first(buffer_.data() + pos_, (eol == std::string::npos ? buffer_.size() : eol) - pos_);
  if (trim(first).empty()) throw Error("io", path.string() + ": missing header row", "CSV files need a header");
  for (auto f : split(first)) header_.emplace_back(f);
  pos_ = eol == std::string::npos ? buffer_.size() : eol + 1;
}

long Reader::find_column(std::string_view name) const {
  for (std::size_t i = 0; i < header_.size(); ++i)
    if (header_[i] == name) return static_cast<long>(i);
  return -1;
}

std::size_t Reader::column(std::string_view name) const {
  long c = find_column(name);
  if (c < 0)
    throw Error("io", path_.string() + ": missing column '" + std::string(name) + "'",
                "see README for the expected CSV layout");
  return static_cast<std::size_t>(c);
}

bool Reader::next(std::vector<std::string_view>& fields) {
  while (pos_ < buffer_.size()) {
    auto eol = buffer_.find('\n', pos_);
    std::size_t end = eol == std::string::npos ? buffer_.size() : eol;
    std::string_view row(buffer_.data() + pos_, end - pos_);
    pos_ = end + 1;
    ++line_;
    if (trim(row).empty()) continue;
    fields = split(row);
    if (fields.size() < header_.size())
      throw Error("io",
                  path_.string() + ":" + std::to_string(line_) + ": expected " + std::to_string(header_.size()) +
                      " fields, got " + std::to_string(fields.size()),
                  "fix the malformed record");
    return true;
  }
  return false;
}

double parse_double(std::string_view s, const Reader& r, std::string_view what) {
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error("io",
                r.path().string() + ":" + std::to_string(r.line()) + ": bad " + std::string(what) + " '" +
                    std::string(s) + "'",
                "fix the malformed record");
  return v;
}

long long parse_int(std::string_view s, const Reader& r, std::string_view what) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size())
    throw Error("io",
                r.path().string() + ":" + std::to_string(r.line()) + ": bad " + std::string(what) + " '" +
                    std::string(s) + "'",
                "fix the malformed record");
  return v;
}

std::string format_double(double v) {
  char buf[64];
  auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, p);
}

}  // namespace peerimport::csv
