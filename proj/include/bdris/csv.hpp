#pragma once

#include <charconv>
#include <cmath>
#include <locale>
#include <ostream>
#include <type_traits>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "bdris/error.hpp"

namespace bdris::csv {

// 17 significant digits, `%g` style: always round-trips.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  std::ostringstream os;
  os.imbue(std::locale::classic());
  os.precision(17);
  os << v;
  return os.str();
}

// Shortest decimal that round-trips (2.2 stays "2.2").
inline std::string shortest_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline std::vector<std::string> split_line(std::string_view line, char sep = ',') {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

inline double parse_double(const std::string& s) {
  std::istringstream is(s);
  is.imbue(std::locale::classic());
  double v = 0.0;
  is >> v;
  if (is.fail()) {
    if (s == "nan") return std::nan("");
    if (s == "inf") return INFINITY;
    if (s == "-inf") return -INFINITY;
    throw InvalidInput("csv: not a number: '" + s + "'");
  }
  return v;
}

// Joins already-formatted fields with commas and a trailing '\n'.
class RowWriter {
 public:
  explicit RowWriter(std::ostream& os) : os_(os) {}

  template <typename... Fields>
  void row(const Fields&... fields) {
    bool first = true;
    ((write_field(fields, first)), ...);
    os_ << '\n';
  }

 private:
  void sep(bool& first) {
    if (!first) os_ << ',';
    first = false;
  }
  void write_field(double v, bool& first) {
    sep(first);
    os_ << format_double(v);
  }
  void write_field(const std::string& v, bool& first) {
    sep(first);
    os_ << v;
  }
  void write_field(const char* v, bool& first) {
    sep(first);
    os_ << v;
  }
  void write_field(bool v, bool& first) {
    sep(first);
    os_ << (v ? "true" : "false");
  }
  template <typename Int>
    requires std::is_integral_v<Int>
  void write_field(Int v, bool& first) {
    sep(first);
    os_ << v;
  }

  std::ostream& os_;
};

}  // namespace bdris::csv
