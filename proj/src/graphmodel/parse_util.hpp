/*
 * Copyright (c) 2026 The Sparseflow Authors
 *
 * Licensed under the Apache License, Version 2.0;
 * You may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an 'AS IS' BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#pragma once

#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "sparseflow/errors.hpp"
#include "sparseflow/numerics/tape.hpp"

namespace sparseflow::graphmodel::detail {

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError(path.string() + ": cannot open file");
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw DataError(path.string() + ": cannot open for writing");
  out << text;
  if (!out) throw DataError(path.string() + ": write failed");
}

/// Whitespace-tokenising line reader that decorates errors with source:line.
class LineReader {
 public:
  struct Line {
    std::size_t number = 0;
    std::vector<std::string> tokens;
  };

  LineReader(const std::string& text, std::string source) : in_(text), source_(std::move(source)) {}

  /// Next non-blank, non-comment line.
  std::optional<Line> next() {
    std::string raw;
    while (std::getline(in_, raw)) {
      ++number_;
      std::istringstream ls(raw);
      Line line{number_, {}};
      std::string tok;
      while (ls >> tok) line.tokens.push_back(tok);
      if (line.tokens.empty() || line.tokens[0][0] == '#') continue;
      return line;
    }
    return std::nullopt;
  }

  [[noreturn]] void fail(const std::string& message) const {
    throw DataError(source_ + ":" + std::to_string(number_) + ": " + message);
  }

  numerics::Index to_index(const std::string& tok, const std::string& field) const {
    long long v = 0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || ptr != end) fail("field '" + field + "': expected an integer, got '" + tok + "'");
    return static_cast<numerics::Index>(v);
  }

  double to_double(const std::string& tok, const std::string& field, bool allow_nan = false) const {
    if (tok == "NaN" || tok == "nan") {
      if (!allow_nan) fail("field '" + field + "': NaN not allowed");
      return std::numeric_limits<double>::quiet_NaN();
    }
    double v = 0.0;
    const auto* end = tok.data() + tok.size();
    auto [ptr, ec] = std::from_chars(tok.data(), end, v);
    if (ec != std::errc() || ptr != end || !std::isfinite(v)) {
      fail("field '" + field + "': expected a finite number, got '" + tok + "'");
    }
    return v;
  }

  std::size_t line_number() const { return number_; }
  const std::string& source() const { return source_; }

 private:
  std::istringstream in_;
  std::string source_;
  std::size_t number_ = 0;
};

}  // namespace sparseflow::graphmodel::detail
