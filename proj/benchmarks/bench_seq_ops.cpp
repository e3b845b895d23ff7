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

#include <random>

#include "pointhr/seq_ops.hpp"
#include "pointhr/spatial.hpp"
#include "pointhr/synthetic.hpp"

namespace pointhr {
namespace {

struct Case {
  PointCloud cloud;
  NeighborTable table;
  Matrix features;
};

Case make_case(std::size_t n, std::size_t c) {
  Case out{room_cloud(n, 4), {}, Matrix(n, c)};
  out.table = knn_query(out.cloud.coords, out.cloud.coords, 16, KnnBackend::kGrid);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (double& v : out.features.values()) v = u(rng);
  return out;
}

void BM_Block(benchmark::State& state, OperatorKind kind) {
  const std::size_t c = static_cast<std::size_t>(state.range(1));
  const auto data = make_case(static_cast<std::size_t>(state.range(0)), c);
  const auto params = SequenceBlockParams::zeros(kind, c, c / 4, false);
  for (auto _ : state) {
    benchmark::DoNotOptimize(sequence_block_forward(data.features, data.cloud.coords, data.table, params));
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK_CAPTURE(BM_Block, va, OperatorKind::kVa)->Args({4096, 32})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Block, gva, OperatorKind::kGva)->Args({4096, 32})->Unit(benchmark::kMillisecond);
BENCHMARK_CAPTURE(BM_Block, mlp, OperatorKind::kMlp)->Args({4096, 32})->Unit(benchmark::kMillisecond);

void BM_Gather(benchmark::State& state) {
  const auto data = make_case(static_cast<std::size_t>(state.range(0)), 32);
  for (auto _ : state) benchmark::DoNotOptimize(gather_neighbors(data.features, data.table));
}
BENCHMARK(BM_Gather)->Arg(4096)->Unit(benchmark::kMillisecond);

}  // namespace
}  // namespace pointhr
