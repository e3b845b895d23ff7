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


#include "pointhr/bench.hpp"

#include <algorithm>
#include <chrono>
#include <iomanip>
#include <optional>
#include <sstream>

#include "pointhr/index_cache.hpp"
#include "pointhr/model.hpp"

namespace pointhr {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

struct Pass {
  double total_ms;
  double index_ms;
  LabelOutput output;
};

}  // namespace

std::string_view to_string(IndexMode mode) { return mode == IndexMode::kCached ? "cached" : "on_the_fly"; }

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  return values.size() % 2 == 1 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
}

BenchReport bench_index(const PointCloud& cloud, const ModelConfig& config, const WeightStore& weights,
                        std::size_t repeats, IndexMode mode) {
  if (repeats < 3) throw InvalidArgument("bench needs at least 3 repeats");
  const Network net = Network::from_weights(weights, config);
  BenchReport report;
  report.mode = mode;

  std::optional<IndexCache> cache;
  if (mode == IndexMode::kCached) {
    const auto start = Clock::now();
    cache = build_cache(cloud, config);
    report.build_ms = elapsed_ms(start);
  }
  const double amortized = report.build_ms / static_cast<double>(repeats);

  auto run = [&]() -> Pass {
    const auto start = Clock::now();
    if (cache) {
      CachedIndex index(*cache);
      LabelOutput out = model_forward(cloud, index, net);
      return {elapsed_ms(start) + amortized, amortized, std::move(out)};
    }
    OnTheFlyIndex index(cloud, config);
    LabelOutput out = model_forward(cloud, index, net);
    return {elapsed_ms(start), index.index_ms(), std::move(out)};
  };

  run();
  std::vector<double> index_samples;
  std::vector<double> kernel_samples;
  for (std::size_t r = 0; r < repeats; ++r) {
    Pass pass = run();
    report.samples_ms.push_back(pass.total_ms);
    index_samples.push_back(pass.index_ms);
    kernel_samples.push_back(pass.total_ms - pass.index_ms);
    if (r + 1 == repeats) report.output = std::move(pass.output);
  }
  report.median_ms = median(report.samples_ms);
  report.index_ms = median(index_samples);
  report.kernel_ms = median(kernel_samples);
  return report;
}

std::string format_bench(const std::vector<BenchReport>& reports) {
  std::ostringstream out;
  out << std::fixed << std::setprecision(2);
  out << std::left << std::setw(12) << "mode" << std::right << std::setw(12) << "median_ms" << std::setw(12)
      << "index_ms" << std::setw(12) << "kernel_ms" << std::setw(12) << "build_ms" << "  samples\n";
  for (const auto& r : reports) {
    out << std::left << std::setw(12) << to_string(r.mode) << std::right << std::setw(12) << r.median_ms
        << std::setw(12) << r.index_ms << std::setw(12) << r.kernel_ms << std::setw(12) << r.build_ms << " ";
    for (double s : r.samples_ms) out << ' ' << s;
    out << '\n';
  }
  for (const auto& r : reports) {
    out << "mode=" << to_string(r.mode) << " median_ms=" << r.median_ms << " index_ms=" << r.index_ms
        << " kernel_ms=" << r.kernel_ms << " repeats=" << r.samples_ms.size() << '\n';
  }
  return out.str();
}

}  // namespace pointhr
