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


#include <benchmark/benchmark.h>

#include "pointhr/index_cache.hpp"
#include "pointhr/model.hpp"
#include "pointhr/synthetic.hpp"

namespace pointhr {
namespace {

void BM_BuildCache(benchmark::State& state) {
  const auto cloud = room_cloud(static_cast<std::size_t>(state.range(0)), 6);
  const auto config = preset("T");
  for (auto _ : state) benchmark::DoNotOptimize(build_cache(cloud, config));
}
BENCHMARK(BM_BuildCache)->Arg(8192)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state, bool cached) {
  const auto cloud = room_cloud(static_cast<std::size_t>(state.range(0)), 7);
  const auto config = preset("T");
  const auto net = Network::from_weights(init_weights(config, 1), config);
  const auto cache = build_cache(cloud, config);
  for (auto _ : state) {
    if (cached) {
      CachedIndex index(cache);
      benchmark::DoNotOptimize(model_forward(cloud, index, net));
    } else {
      OnTheFlyIndex index(cloud, config);
      benchmark::DoNotOptimize(model_forward(cloud, index, net));
    }
  }
}
BENCHMARK_CAPTURE(BM_Forward, cached, true)->Arg(8192)->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Forward, on_the_fly, false)->Arg(8192)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace pointhr
