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


#include "pointhr/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <vector>

#include "pointhr/common.hpp"

namespace pointhr {
namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_commas(std::string_view value) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const auto comma = value.find(',', start);
    parts.push_back(trim(value.substr(start, comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return parts;
}

int parse_int(const std::string& token, std::size_t line, const std::string& key) {
  int value = 0;
  const auto* end = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(token.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw ParseError(line, 0, "line " + std::to_string(line) + ": key '" + key +
                                  "' expects integers, got '" + token + "'");
  }
  return value;
}

double parse_real(const std::string& token, std::size_t line, const std::string& key) {
  std::istringstream in(token);
  double value = 0.0;
  in >> value;
  if (in.fail() || !in.eof()) {
    throw ParseError(line, 0, "line " + std::to_string(line) + ": key '" + key +
                                  "' expects numbers, got '" + token + "'");
  }
  return value;
}

template <typename T, typename Parse>
std::array<T, 4> parse_tuple(const std::string& value, std::size_t line, const std::string& key,
                             Parse parse) {
  const auto parts = split_commas(value);
  std::array<T, 4> out{};
  if (parts.size() == 1) {
    out.fill(parse(parts[0], line, key));
    return out;
  }
  if (parts.size() != 4) {
    throw ParseError(line, 0, "line " + std::to_string(line) + ": key '" + key +
                                  "' expects 1 or 4 values");
  }
  for (std::size_t i = 0; i < 4; ++i) out[i] = parse(parts[i], line, key);
  return out;
}

bool parse_bool(const std::string& token, std::size_t line, const std::string& key) {
  if (token == "true" || token == "1" || token == "on") return true;
  if (token == "false" || token == "0" || token == "off") return false;
  throw ParseError(line, 0, "line " + std::to_string(line) + ": key '" + key +
                                "' expects true/false, got '" + token + "'");
}

}  // namespace

std::string_view to_string(OperatorKind kind) {
  switch (kind) {
    case OperatorKind::kVa: return "va";
    case OperatorKind::kGva: return "gva";
    case OperatorKind::kMlp: return "mlp";
  }
  return "?";
}

std::string_view to_string(DecoderKind kind) {
  switch (kind) {
    case DecoderKind::kSum: return "sum";
    case DecoderKind::kPg: return "pg";
    case DecoderKind::kPgr: return "pgr";
  }
  return "?";
}

OperatorKind parse_operator(std::string_view name) {
  if (name == "va") return OperatorKind::kVa;
  if (name == "gva") return OperatorKind::kGva;
  if (name == "mlp") return OperatorKind::kMlp;
  throw InvalidArgument("unknown operator '" + std::string(name) + "' (expected va, gva or mlp)");
}

DecoderKind parse_decoder(std::string_view name) {
  if (name == "sum") return DecoderKind::kSum;
  if (name == "pg") return DecoderKind::kPg;
  if (name == "pgr") return DecoderKind::kPgr;
  throw InvalidArgument("unknown decoder '" + std::string(name) + "' (expected sum, pg or pgr)");
}

int ModelConfig::branch_width(int stage, int branch) const {
  POINTHR_CHECK(stage >= 1 && stage <= 4 && branch >= 1 && branch <= stage);
  return channels[stage - 1] << (branch - 1);
}

int ModelConfig::scale_neighbors(int scale) const {
  POINTHR_CHECK(scale >= 0 && scale <= 4);
  return neighbors[scale == 0 ? 0 : scale - 1];
}

int ModelConfig::scale_groups(int scale) const {
  POINTHR_CHECK(scale >= 0 && scale <= 4);
  return groups[scale == 0 ? 0 : scale - 1];
}

void ModelConfig::validate() const {
  auto positive = [](const std::array<int, 4>& values, const char* key) {
    for (int v : values) {
      if (v <= 0) throw InvalidArgument(std::string(key) + " must be positive");
    }
  };
  positive(modules, "modules");
  positive(blocks, "blocks");
  positive(channels, "channels");
  positive(neighbors, "neighbors");
  positive(groups, "groups");
  if (stem_channels <= 0) throw InvalidArgument("stem_channels must be positive");
  if (num_classes <= 0) throw InvalidArgument("num_classes must be positive");
  if (in_channels < 3) throw InvalidArgument("in_channels must be at least 3 (xyz)");
  for (std::size_t s = 0; s < 4; ++s) {
    if (!(grid_sizes[s] > 0.0) || !std::isfinite(grid_sizes[s])) {
      throw InvalidArgument("grid_sizes must be positive and finite");
    }
    if (s > 0 && !(grid_sizes[s] > grid_sizes[s - 1])) {
      throw InvalidArgument("grid_sizes must be strictly increasing");
    }
  }
  for (int branch = 1; branch <= 4; ++branch) {
    const int g = groups[branch - 1];
    for (int stage = branch; stage <= 4; ++stage) {
      const int width = branch_width(stage, branch);
      if (width % g != 0) {
        throw InvalidArgument("groups[" + std::to_string(branch) + "]=" + std::to_string(g) +
                              " does not divide branch width " + std::to_string(width) +
                              " in stage " + std::to_string(stage));
      }
    }
  }
  if (stem_channels % groups[0] != 0) {
    throw InvalidArgument("groups[1]=" + std::to_string(groups[0]) +
                          " does not divide stem_channels " + std::to_string(stem_channels));
  }
}

bool is_preset_name(std::string_view name) {
  return name == "T" || name == "S" || name == "B" || name == "L";
}

ModelConfig preset(std::string_view name) {
  ModelConfig config;
  if (name == "T") {
    config.modules = {1, 1, 2, 1};
    config.channels = {64, 16, 16, 16};
  } else if (name == "S") {
    config.modules = {1, 1, 3, 2};
    config.channels = {64, 16, 16, 16};
  } else if (name == "B") {
    config.modules = {1, 1, 3, 2};
    config.channels = {64, 32, 32, 32};
  } else if (name == "L") {
    config.modules = {1, 1, 5, 4};
    config.channels = {64, 32, 32, 32};
  } else {
    throw InvalidArgument("unknown preset '" + std::string(name) + "' (expected T, S, B or L)");
  }
  return config;
}

ModelConfig parse_config(std::string_view text) {
  ModelConfig config;
  std::istringstream in{std::string(text)};
  std::string raw;
  std::size_t line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    if (const auto hash = raw.find('#'); hash != std::string::npos) raw.erase(hash);
    const std::string line = trim(raw);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ParseError(line_no, 0, "line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    try {
      if (key == "modules") {
        config.modules = parse_tuple<int>(value, line_no, key, parse_int);
      } else if (key == "blocks") {
        config.blocks = parse_tuple<int>(value, line_no, key, parse_int);
      } else if (key == "channels") {
        config.channels = parse_tuple<int>(value, line_no, key, parse_int);
      } else if (key == "stem_channels") {
        config.stem_channels = parse_int(value, line_no, key);
      } else if (key == "neighbors") {
        config.neighbors = parse_tuple<int>(value, line_no, key, parse_int);
      } else if (key == "groups") {
        config.groups = parse_tuple<int>(value, line_no, key, parse_int);
      } else if (key == "grid_sizes") {
        config.grid_sizes = parse_tuple<double>(value, line_no, key, parse_real);
      } else if (key == "operator") {
        config.op = parse_operator(value);
      } else if (key == "num_classes") {
        config.num_classes = parse_int(value, line_no, key);
      } else if (key == "decoder") {
        config.decoder = parse_decoder(value);
      } else if (key == "pos_encoding") {
        config.pos_encoding = parse_bool(value, line_no, key);
      } else if (key == "in_channels") {
        config.in_channels = parse_int(value, line_no, key);
      } else {
        throw ParseError(line_no, 0, "line " + std::to_string(line_no) + ": unknown key '" + key + "'");
      }
    } catch (const InvalidArgument& e) {
      throw ParseError(line_no, 0, "line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  config.validate();
  return config;
}

ModelConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot open config file '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config(buffer.str());
}

std::string format_config(const ModelConfig& config) {
  std::ostringstream out;
  auto tuple = [&out](const auto& values) {
    for (std::size_t i = 0; i < values.size(); ++i) {
      char buf[32];
      const auto res = std::to_chars(buf, buf + sizeof(buf), values[i]);
      out << (i ? "," : "") << std::string_view(buf, static_cast<std::size_t>(res.ptr - buf));
    }
  };
  out << "modules = ";
  tuple(config.modules);
  out << "\nblocks = ";
  tuple(config.blocks);
  out << "\nchannels = ";
  tuple(config.channels);
  out << "\nstem_channels = " << config.stem_channels << "\nneighbors = ";
  tuple(config.neighbors);
  out << "\ngroups = ";
  tuple(config.groups);
  out << "\ngrid_sizes = ";
  tuple(config.grid_sizes);
  out << "\noperator = " << to_string(config.op) << "\nnum_classes = " << config.num_classes
      << "\ndecoder = " << to_string(config.decoder)
      << "\npos_encoding = " << (config.pos_encoding ? "true" : "false")
      << "\nin_channels = " << config.in_channels << "\n";
  return out.str();
}

}  // namespace pointhr
