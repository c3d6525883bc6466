/*
Copyright 2026 The csfp Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS-IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

// Minimal CSV support: comma separated, no quoting. Fields produced by this
// library never contain commas or newlines.

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "csfp/error.hpp"

namespace csfp {

// Shortest decimal text that round-trips to the same double.
inline std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) v = 0.0;  // no "-0"
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw Error(Errc::kFormat, "not a number: '" + std::string(s) + "'");
  }
  return v;
}

inline std::string quote_field(std::string_view f) {
  if (f.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(f);
  std::string out = "\"";
  for (char c : f) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string join_row(const std::vector<std::string>& fields) {
  std::string line;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i != 0) line += ',';
    line += quote_field(fields[i]);
  }
  return line;
}

// Splits one line; double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false, was_quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c != '"') {
        cur += c;
      } else if (i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else {
        quoted = false;
      }
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
      was_quoted = false;
    } else if (c == '"' && cur.empty() && !was_quoted) {
      quoted = was_quoted = true;
    } else {
      cur += c;
    }
  }
  if (quoted) throw Error(Errc::kFormat, "unterminated quoted CSV field");
  fields.push_back(std::move(cur));
  return fields;
}

// A parsed CSV file with a header row.
class CsvTable {
 public:
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    throw Error(Errc::kFormat, "missing CSV column '" + std::string(name) + "'");
  }

  static CsvTable read(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(Errc::kIo, "cannot open " + path.string());
    CsvTable t;
    std::string line;
    bool first = true;
    while (std::getline(in, line)) {
      if (!line.empty() && line.back() == '\r') line.pop_back();
      if (line.empty()) continue;
      auto fields = split_row(line);
      if (first) {
        t.header = std::move(fields);
        first = false;
        continue;
      }
      if (fields.size() != t.header.size()) {
        throw Error(Errc::kFormat, path.string() + ": row has " +
                                       std::to_string(fields.size()) + " fields, header has " +
                                       std::to_string(t.header.size()));
      }
      t.rows.push_back(std::move(fields));
    }
    if (first) throw Error(Errc::kFormat, path.string() + ": empty CSV");
    return t;
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw Error(Errc::kIo, "cannot create " + path.string());
    out << to_string();
    if (!out) throw Error(Errc::kIo, "write failed for " + path.string());
  }

  std::string to_string() const {
    std::string s = join_row(header) + "\n";
    for (const auto& r : rows) s += join_row(r) + "\n";
    return s;
  }
};

}  // namespace csfp
