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
#include <span>
#include <vector>

#include "pointhr/common.hpp"
#include "pointhr/tensor.hpp"
#include "pointhr/types.hpp"

namespace pointhr {

enum class KnnBackend { kBrute, kGrid };

// For every query point, the indices of its k nearest source points. Rows are
// sorted by ascending squared distance, ties by ascending source index.
struct NeighborTable {
  std::size_t query_count = 0;
  std::size_t k = 0;
  std::vector<std::uint32_t> indices;
  int source_scale = 0;
  int query_scale = 0;

  std::span<const std::uint32_t> row(std::size_t i) const { return {indices.data() + i * k, k}; }

  bool operator==(const NeighborTable&) const = default;
};

enum class ResampleKind { kGrid, kFpsKnn };

// Transport between a fine point set and its coarse counterpart.
struct ResampleMap {
  ResampleKind kind = ResampleKind::kGrid;
  std::vector<std::uint32_t> down_assign;  // fine point -> coarse parent
  std::vector<Point3> coarse_coords;
  std::size_t up_k = 1;                    // entries per fine point below
  std::vector<std::uint32_t> up_neighbors;  // fine_count x up_k coarse indices
  std::vector<double> up_weights;          // fine_count x up_k, rows sum to 1

  std::size_t fine_count() const { return down_assign.size(); }
  std::size_t coarse_count() const { return coarse_coords.size(); }

  bool operator==(const ResampleMap&) const = default;
};

enum class PoolReduce { kMax, kMean };

// Exact k nearest neighbors. Both backends produce identical tables.
NeighborTable knn_query(std::span<const Point3> source, std::span<const Point3> query, std::size_t k,
                        KnnBackend backend = KnnBackend::kGrid);

// Greedy farthest point sampling seeded at the lexicographically smallest
// coordinate. Ties pick the lowest index.
std::vector<std::uint32_t> fps_select(std::span<const Point3> coords, std::size_t m);

// Partition into half-open cells [k*s, (k+1)*s) anchored at the origin. Coarse
// points are cell centroids ordered by ascending cell key.
ResampleMap grid_pool_map(std::span<const Point3> coords, double cell_size);

// FPS coarse set with nearest-parent assignment and inverse-squared-distance
// interpolation over the interp_k nearest coarse points.
ResampleMap fps_knn_map(std::span<const Point3> fine_coords, std::size_t m, std::size_t interp_k = 3);

Matrix pool_rows(const Matrix& fine, const ResampleMap& map, PoolReduce reduce = PoolReduce::kMax);
Matrix unpool_rows(const Matrix& coarse, const ResampleMap& map);

FeatureMatrix pool_features(const FeatureMatrix& fine, const ResampleMap& map,
                            PoolReduce reduce = PoolReduce::kMax);
FeatureMatrix unpool_features(const FeatureMatrix& coarse, const ResampleMap& map);

// Integer cell key of a coordinate for a given cell edge.
std::array<std::int64_t, 3> cell_key(const Point3& p, double cell_size);

// Process-wide construction counters, used to prove that cached execution
// never builds an index on the fly.
struct IndexBuildCounts {
  std::uint64_t knn_tables = 0;
  std::uint64_t resample_maps = 0;
  bool operator==(const IndexBuildCounts&) const = default;
};
IndexBuildCounts index_build_counts();

}  // namespace pointhr
