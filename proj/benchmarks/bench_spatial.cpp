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

#include "pointhr/spatial.hpp"
#include "pointhr/synthetic.hpp"

namespace pointhr {
namespace {

void BM_KnnGrid(benchmark::State& state) {
  const auto cloud = room_cloud(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(knn_query(cloud.coords, cloud.coords, 16, KnnBackend::kGrid));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KnnGrid)->Arg(4096)->Arg(32768)->Unit(benchmark::kMillisecond);

void BM_KnnBrute(benchmark::State& state) {
  const auto cloud = room_cloud(static_cast<std::size_t>(state.range(0)), 1);
  for (auto _ : state) benchmark::DoNotOptimize(knn_query(cloud.coords, cloud.coords, 16, KnnBackend::kBrute));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_KnnBrute)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_Fps(benchmark::State& state) {
  const auto cloud = room_cloud(static_cast<std::size_t>(state.range(0)), 2);
  for (auto _ : state) benchmark::DoNotOptimize(fps_select(cloud.coords, cloud.coords.size() / 4));
}
BENCHMARK(BM_Fps)->Arg(4096)->Unit(benchmark::kMillisecond);

void BM_GridPoolMap(benchmark::State& state) {
  const auto cloud = room_cloud(static_cast<std::size_t>(state.range(0)), 3);
  for (auto _ : state) benchmark::DoNotOptimize(grid_pool_map(cloud.coords, 0.06));
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_GridPoolMap)->Arg(32768)->Arg(100000)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace pointhr
