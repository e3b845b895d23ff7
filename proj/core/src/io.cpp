// Copyright (c) 2026 The PointHR Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


#include "pointhr/io.hpp"

#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>

namespace pointhr {
namespace {

struct Token {
  std::string_view text;
  std::size_t column;  // 1-based
};

std::vector<Token> split_fields(std::string_view line) {
  std::vector<Token> tokens;
  std::size_t i = 0;
  while (i < line.size()) {
    while (i < line.size() && (line[i] == ' ' || line[i] == '\t' || line[i] == '\r')) ++i;
    if (i >= line.size()) break;
    const std::size_t start = i;
    while (i < line.size() && line[i] != ' ' && line[i] != '\t' && line[i] != '\r') ++i;
    tokens.push_back({line.substr(start, i - start), start + 1});
  }
  return tokens;
}

double parse_number(const Token& token, std::size_t line) {
  double value = 0.0;
  const char* begin = token.text.data();
  const char* end = begin + token.text.size();
  if (!token.text.empty() && *begin == '+') ++begin;
  const auto [ptr, ec] = std::from_chars(begin, end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, token.column,
                     "line " + std::to_string(line) + ", column " + std::to_string(token.column) +
                         ": not a number: '" + std::string(token.text) + "'");
  }
  return value;
}

}  // namespace

PointCloud parse_cloud(std::istream& in) {
  PointCloud cloud;
  std::vector<double> features;
  std::size_t fields = 0;
  std::size_t first_line = 0;
  std::string line;
  for (std::size_t number = 1; std::getline(in, line); ++number) {
    std::string_view view(line);
    if (const auto hash = view.find('#'); hash != std::string_view::npos) view = view.substr(0, hash);
    const auto tokens = split_fields(view);
    if (tokens.empty()) continue;
    if (tokens.size() < 3) {
      throw ParseError(number, 0, "line " + std::to_string(number) + ": expected ≥3 fields");
    }
    if (fields == 0) {
      fields = tokens.size();
      first_line = number;
    } else if (tokens.size() != fields) {
      throw ParseError(number, 0,
                       "line " + std::to_string(number) + ": expected " + std::to_string(fields) +
                           " fields like line " + std::to_string(first_line) + ", found " +
                           std::to_string(tokens.size()));
    }
    Point3 p{};
    for (std::size_t d = 0; d < 3; ++d) p[d] = parse_number(tokens[d], number);
    cloud.coords.push_back(p);
    for (std::size_t c = 3; c < tokens.size(); ++c) features.push_back(parse_number(tokens[c], number));
  }
  if (cloud.coords.empty()) throw ParseError(0, 0, "cloud has no points");
  if (fields > 3) {
    Matrix raw(cloud.coords.size(), fields - 3);
    std::copy(features.begin(), features.end(), raw.values().begin());
    cloud.raw_features = std::move(raw);
  }
  cloud.validate();
  return cloud;
}

PointCloud read_cloud(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open cloud file '" + path + "'");
  return parse_cloud(in);
}

std::string format_double(double value) {
  char buffer[32];
  const auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  POINTHR_CHECK(ec == std::errc());
  return std::string(buffer, ptr);
}

void write_cloud(std::ostream& out, const PointCloud& cloud) {
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    out << format_double(cloud.coords[i][0]) << ' ' << format_double(cloud.coords[i][1]) << ' '
        << format_double(cloud.coords[i][2]);
    for (std::size_t c = 0; c < cloud.feature_channels(); ++c) out << ' ' << format_double((*cloud.raw_features)(i, c));
    out << '\n';
  }
}

void save_cloud(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InvalidArgument("cannot open '" + path + "' for writing");
  write_cloud(out, cloud);
}

void write_labels(std::ostream& out, std::span<const std::uint32_t> labels) {
  for (auto label : labels) out << label << '\n';
}

void write_matrix(std::ostream& out, const Matrix& values) {
  for (std::size_t r = 0; r < values.rows(); ++r) {
    const auto row = values.row(r);
    for (std::size_t c = 0; c < row.size(); ++c) out << (c == 0 ? "" : " ") << format_double(row[c]);
    out << '\n';
  }
}

}  // namespace pointhr
