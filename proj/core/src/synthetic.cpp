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


#include "pointhr/synthetic.hpp"

#include <array>

#include "pointhr/weights.hpp"

namespace pointhr {
namespace {

struct Patch {
  Point3 origin;
  Point3 u;
  Point3 v;
  double area;
};

}  // namespace

PointCloud uniform_cloud(std::size_t n, std::uint64_t seed, double extent) {
  const CounterRng rng(seed, stream_id("synthetic.uniform"));
  PointCloud cloud;
  cloud.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t d = 0; d < 3; ++d) cloud.coords[i][d] = extent * rng.uniform(3 * i + d);
  }
  return cloud;
}

PointCloud room_cloud(std::size_t n, std::uint64_t seed) {
  constexpr double kWidth = 4.0;
  constexpr double kDepth = 3.0;
  constexpr double kHeight = 2.5;
  constexpr double kJitter = 0.002;
  const std::array<Patch, 6> patches{{
      {{0, 0, 0}, {kWidth, 0, 0}, {0, kDepth, 0}, kWidth * kDepth},
      {{0, 0, 0}, {kWidth, 0, 0}, {0, 0, kHeight}, kWidth * kHeight},
      {{0, kDepth, 0}, {kWidth, 0, 0}, {0, 0, kHeight}, kWidth * kHeight},
      {{0, 0, 0}, {0, kDepth, 0}, {0, 0, kHeight}, kDepth * kHeight},
      {{kWidth, 0, 0}, {0, kDepth, 0}, {0, 0, kHeight}, kDepth * kHeight},
      {{1.2, 1.0, 0.75}, {1.4, 0, 0}, {0, 0.8, 0}, 1.4 * 0.8},
  }};
  double total = 0.0;
  for (const auto& p : patches) total += p.area;

  const CounterRng rng(seed, stream_id("synthetic.room"));
  PointCloud cloud;
  cloud.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint64_t base = 6 * static_cast<std::uint64_t>(i);
    double pick = rng.uniform(base) * total;
    std::size_t which = 0;
    while (which + 1 < patches.size() && pick >= patches[which].area) {
      pick -= patches[which].area;
      ++which;
    }
    const auto& patch = patches[which];
    const double a = rng.uniform(base + 1);
    const double b = rng.uniform(base + 2);
    for (std::size_t d = 0; d < 3; ++d) {
      const double jitter = rng.uniform(base + 3 + d, -kJitter, kJitter);
      cloud.coords[i][d] = patch.origin[d] + a * patch.u[d] + b * patch.v[d] + jitter;
    }
  }
  return cloud;
}

}  // namespace pointhr
