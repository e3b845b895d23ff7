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

#include <array>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "pointhr/config.hpp"
#include "pointhr/spatial.hpp"
#include "pointhr/types.hpp"

namespace pointhr {

struct IndexCacheStats {
  double build_ms = 0.0;
  std::array<std::size_t, kNumScales> points{};
  std::array<std::size_t, kNumScales> knn_entries{};
};

// Coordinate pyramid, per-scale neighbor tables and adjacent resample maps
// for one cloud. Immutable once built.
class IndexCache {
 public:
  std::span<const Point3> coords(int scale) const;
  std::size_t point_count(int scale) const { return coords(scale).size(); }
  const NeighborTable& knn(int scale) const;
  // Map from `scale` to `scale + 1`.
  const ResampleMap& down_map(int scale) const;
  const IndexCacheStats& stats() const { return stats_; }

  bool operator==(const IndexCache& other) const {
    return coords_ == other.coords_ && knn_ == other.knn_ && down_ == other.down_;
  }

 private:
  friend IndexCache build_cache(const PointCloud& cloud, const ModelConfig& config);

  std::array<std::vector<Point3>, kNumScales> coords_;
  std::array<NeighborTable, kNumScales> knn_;
  std::array<ResampleMap, kNumScales - 1> down_;
  IndexCacheStats stats_;
};

IndexCache build_cache(const PointCloud& cloud, const ModelConfig& config);

const NeighborTable& lookup_knn(const IndexCache& cache, int scale);
// Adjacent maps to pool through, in application order (from < to).
std::vector<const ResampleMap*> lookup_down(const IndexCache& cache, int from_scale, int to_scale);
// Adjacent maps to unpool through, in application order (from > to).
std::vector<const ResampleMap*> lookup_up(const IndexCache& cache, int from_scale, int to_scale);

// Neighbor k used at `scale`, clamped to the scale's point count.
std::size_t effective_neighbors(const ModelConfig& config, int scale, std::size_t points);

// Where the network gets its indices during a forward pass.
class IndexSource {
 public:
  virtual ~IndexSource() = default;
  virtual std::span<const Point3> coords(int scale) const = 0;
  std::size_t point_count(int scale) const { return coords(scale).size(); }
  virtual std::shared_ptr<const NeighborTable> knn(int scale) = 0;
  // Map from `scale` to `scale + 1`.
  virtual std::shared_ptr<const ResampleMap> resample(int scale) = 0;
  // Milliseconds spent computing indices inside knn()/resample().
  virtual double index_ms() const { return 0.0; }
};

// Serves every lookup from a prebuilt cache; the returned pointers alias the
// cache and never own it.
class CachedIndex final : public IndexSource {
 public:
  explicit CachedIndex(const IndexCache& cache) : cache_(cache) {}
  std::span<const Point3> coords(int scale) const override { return cache_.coords(scale); }
  std::shared_ptr<const NeighborTable> knn(int scale) override;
  std::shared_ptr<const ResampleMap> resample(int scale) override;

 private:
  const IndexCache& cache_;
};

// Rebuilds every table and map at its point of use. Only the coordinate
// pyramid is kept between calls.
class OnTheFlyIndex final : public IndexSource {
 public:
  OnTheFlyIndex(const PointCloud& cloud, const ModelConfig& config);
  std::span<const Point3> coords(int scale) const override;
  std::shared_ptr<const NeighborTable> knn(int scale) override;
  std::shared_ptr<const ResampleMap> resample(int scale) override;
  double index_ms() const override { return index_ms_; }

 private:
  ModelConfig config_;
  std::array<std::vector<Point3>, kNumScales> coords_;
  double index_ms_ = 0.0;
};

void check_scale(int scale);

}  // namespace pointhr
