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


#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "pointhr/types.hpp"

namespace pointhr {

// Text cloud: one point per line, `x y z [f1 f2 ...]`, whitespace separated,
// '#' starts a comment. Every data line has the same field count.
PointCloud parse_cloud(std::istream& in);
PointCloud read_cloud(const std::string& path);

void write_cloud(std::ostream& out, const PointCloud& cloud);
void save_cloud(const PointCloud& cloud, const std::string& path);

// One label per line.
void write_labels(std::ostream& out, std::span<const std::uint32_t> labels);
// One row per line, shortest round-trip decimal form.
void write_matrix(std::ostream& out, const Matrix& values);

std::string format_double(double value);

}  // namespace pointhr
