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

#include <string>
#include <string_view>
#include <vector>

#include "pointhr/config.hpp"
#include "pointhr/types.hpp"
#include "pointhr/weights.hpp"

namespace pointhr {

enum class IndexMode { kCached, kOnTheFly };

std::string_view to_string(IndexMode mode);

struct BenchReport {
  IndexMode mode = IndexMode::kCached;
  std::vector<double> samples_ms;  // one per timed forward pass
  double median_ms = 0.0;
  double index_ms = 0.0;   // median per pass
  double kernel_ms = 0.0;  // median per pass
  double build_ms = 0.0;   // cached mode: one-time cache build
  LabelOutput output;      // from the last timed pass
};

// One untimed warm-up pass, then `repeats` timed passes. Cached mode builds
// the cache once and charges build_ms / repeats to every pass.
BenchReport bench_index(const PointCloud& cloud, const ModelConfig& config, const WeightStore& weights,
                        std::size_t repeats, IndexMode mode);

double median(std::vector<double> values);

// Text table followed by key=value lines per report.
std::string format_bench(const std::vector<BenchReport>& reports);

}  // namespace pointhr
