#ifndef GPULET_SRC_CSV_UTIL_H_
#define GPULET_SRC_CSV_UTIL_H_

#include <charconv>
#include <string>
#include <string_view>
#include <vector>

#include "gpulet/errors.h"

namespace gpulet::csv {

inline std::string_view Trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) {
    s.remove_prefix(1);
  }
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' ||
                        s.back() == '\r' || s.back() == '\n')) {
    s.remove_suffix(1);
  }
  return s;
}

inline std::vector<std::string> SplitRow(std::string_view line) {
  std::vector<std::string> fields;
  size_t start = 0;
  while (true) {
    size_t comma = line.find(',', start);
    fields.emplace_back(
        Trim(line.substr(start, comma == std::string_view::npos
                                    ? std::string_view::npos
                                    : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return fields;
}

inline bool IsBlankOrComment(std::string_view line) {
  line = Trim(line);
  return line.empty() || line.front() == '#';
}

inline std::string Where(const std::string& source, int line_no) {
  return source + ":" + std::to_string(line_no);
}

inline double ParseDouble(const std::string& field, const std::string& source,
                          int line_no) {
  try {
    size_t used = 0;
    double v = std::stod(field, &used);
    if (used != field.size()) throw std::invalid_argument(field);
    return v;
  } catch (const std::exception&) {
    throw ParseError(Where(source, line_no) + ": expected a number, got '" +
                     field + "'");
  }
}

inline int ParseInt(const std::string& field, const std::string& source,
                    int line_no) {
  int v = 0;
  auto [ptr, ec] =
      std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size()) {
    throw ParseError(Where(source, line_no) + ": expected an integer, got '" +
                     field + "'");
  }
  return v;
}

}  // namespace gpulet::csv

#endif  // GPULET_SRC_CSV_UTIL_H_
