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


#include "pointhr/index_cache.hpp"

#include <algorithm>
#include <chrono>

namespace pointhr {
namespace {

using Clock = std::chrono::steady_clock;

double elapsed_ms(Clock::time_point start) {
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

template <typename T>
std::shared_ptr<const T> borrow(const T& value) {
  return std::shared_ptr<const T>(std::shared_ptr<const T>(), &value);
}

NeighborTable scale_knn(std::span<const Point3> coords, const ModelConfig& config, int scale) {
  NeighborTable table = knn_query(coords, coords, effective_neighbors(config, scale, coords.size()));
  table.source_scale = scale;
  table.query_scale = scale;
  return table;
}

}  // namespace

void check_scale(int scale) {
  if (scale < 0 || scale >= kNumScales) {
    throw InvalidArgument("scale " + std::to_string(scale) + " is outside 0.." + std::to_string(kNumScales - 1));
  }
}

std::size_t effective_neighbors(const ModelConfig& config, int scale, std::size_t points) {
  return std::min(static_cast<std::size_t>(config.scale_neighbors(scale)), points);
}

std::span<const Point3> IndexCache::coords(int scale) const {
  check_scale(scale);
  return coords_[static_cast<std::size_t>(scale)];
}

const NeighborTable& IndexCache::knn(int scale) const {
  check_scale(scale);
  return knn_[static_cast<std::size_t>(scale)];
}

const ResampleMap& IndexCache::down_map(int scale) const {
  if (scale < 0 || scale >= kNumScales - 1) {
    throw InvalidArgument("no resample map leaves scale " + std::to_string(scale));
  }
  return down_[static_cast<std::size_t>(scale)];
}

IndexCache build_cache(const PointCloud& cloud, const ModelConfig& config) {
  cloud.validate();
  config.validate();
  const auto start = Clock::now();
  IndexCache cache;
  cache.coords_[0] = cloud.coords;
  for (int s = 0; s + 1 < kNumScales; ++s) {
    const auto i = static_cast<std::size_t>(s);
    cache.down_[i] = grid_pool_map(cache.coords_[i], config.grid_sizes[i]);
    cache.coords_[i + 1] = cache.down_[i].coarse_coords;
    if (cache.coords_[i + 1].empty()) {
      throw DegenerateInput("scale " + std::to_string(s + 1) + " has no points");
    }
  }
  for (int s = 0; s < kNumScales; ++s) {
    const auto i = static_cast<std::size_t>(s);
    cache.knn_[i] = scale_knn(cache.coords_[i], config, s);
    cache.stats_.points[i] = cache.coords_[i].size();
    cache.stats_.knn_entries[i] = cache.knn_[i].indices.size();
  }
  cache.stats_.build_ms = elapsed_ms(start);
  return cache;
}

const NeighborTable& lookup_knn(const IndexCache& cache, int scale) { return cache.knn(scale); }

std::vector<const ResampleMap*> lookup_down(const IndexCache& cache, int from_scale, int to_scale) {
  check_scale(from_scale);
  check_scale(to_scale);
  if (from_scale >= to_scale) throw InvalidArgument("lookup_down needs from_scale < to_scale");
  std::vector<const ResampleMap*> chain;
  for (int s = from_scale; s < to_scale; ++s) chain.push_back(&cache.down_map(s));
  return chain;
}

std::vector<const ResampleMap*> lookup_up(const IndexCache& cache, int from_scale, int to_scale) {
  check_scale(from_scale);
  check_scale(to_scale);
  if (from_scale <= to_scale) throw InvalidArgument("lookup_up needs from_scale > to_scale");
  std::vector<const ResampleMap*> chain;
  for (int s = from_scale; s > to_scale; --s) chain.push_back(&cache.down_map(s - 1));
  return chain;
}

std::shared_ptr<const NeighborTable> CachedIndex::knn(int scale) { return borrow(cache_.knn(scale)); }

std::shared_ptr<const ResampleMap> CachedIndex::resample(int scale) { return borrow(cache_.down_map(scale)); }

OnTheFlyIndex::OnTheFlyIndex(const PointCloud& cloud, const ModelConfig& config) : config_(config) {
  cloud.validate();
  config_.validate();
  const auto start = Clock::now();
  coords_[0] = cloud.coords;
  for (std::size_t i = 0; i + 1 < coords_.size(); ++i) {
    coords_[i + 1] = grid_pool_map(coords_[i], config_.grid_sizes[i]).coarse_coords;
  }
  index_ms_ += elapsed_ms(start);
}

std::span<const Point3> OnTheFlyIndex::coords(int scale) const {
  check_scale(scale);
  return coords_[static_cast<std::size_t>(scale)];
}

std::shared_ptr<const NeighborTable> OnTheFlyIndex::knn(int scale) {
  check_scale(scale);
  const auto start = Clock::now();
  auto table = std::make_shared<const NeighborTable>(scale_knn(coords(scale), config_, scale));
  index_ms_ += elapsed_ms(start);
  return table;
}

std::shared_ptr<const ResampleMap> OnTheFlyIndex::resample(int scale) {
  if (scale < 0 || scale >= kNumScales - 1) {
    throw InvalidArgument("no resample map leaves scale " + std::to_string(scale));
  }
  const auto start = Clock::now();
  auto map = std::make_shared<const ResampleMap>(
      grid_pool_map(coords(scale), config_.grid_sizes[static_cast<std::size_t>(scale)]));
  index_ms_ += elapsed_ms(start);
  return map;
}

}  // namespace pointhr
