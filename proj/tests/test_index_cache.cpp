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


#include <gtest/gtest.h>

#include <random>
#include <set>

#include "pointhr/bench.hpp"
#include "pointhr/index_cache.hpp"
#include "pointhr/model.hpp"
#include "pointhr/synthetic.hpp"
#include "support.hpp"

namespace pointhr {
namespace {

PointCloud cloud_of(std::vector<Point3> pts) { return {std::move(pts), std::nullopt}; }

TEST(IndexCache, SingleCellCollapsesEveryScale) {
  const auto cache = build_cache(cloud_of({{0.01, 0.01, 0.01}, {0.02, 0.01, 0.01}, {0.01, 0.03, 0.02}}), preset("T"));
  EXPECT_EQ(cache.point_count(0), 3u);
  for (int s = 1; s < kNumScales; ++s) EXPECT_EQ(cache.point_count(s), 1u);
  EXPECT_EQ(cache.knn(0).k, 3u);
  EXPECT_EQ(cache.knn(1).k, 1u);
}

TEST(IndexCache, BuildIsDeterministic) {
  const auto cloud = uniform_cloud(2000, 3, 2.0);
  EXPECT_EQ(build_cache(cloud, preset("T")), build_cache(cloud, preset("T")));
}

TEST(IndexCache, ScalesComposeFromThePreviousScale) {
  const auto cloud = room_cloud(4096, 1);
  const auto config = preset("T");
  const auto cache = build_cache(cloud, config);
  for (int s = 0; s + 1 < kNumScales; ++s) {
    const auto coords = cache.coords(s);
    const auto part = testing::partition_cells(coords, config.grid_sizes[static_cast<std::size_t>(s)]);
    ASSERT_EQ(cache.point_count(s + 1), part.members.size());
    EXPECT_EQ(cache.down_map(s).down_assign.size(), coords.size());
    const auto next = cache.coords(s + 1);
    EXPECT_EQ(std::vector<Point3>(next.begin(), next.end()), cache.down_map(s).coarse_coords);
  }
}

TEST(IndexCache, TablesMatchOnTheFlyRecompute) {
  const auto cloud = uniform_cloud(4096, 17, 3.0);
  const auto config = preset("T");
  const auto cache = build_cache(cloud, config);
  OnTheFlyIndex fly(cloud, config);
  for (int s = 0; s < kNumScales; ++s) {
    const auto a = cache.coords(s);
    const auto b = fly.coords(s);
    ASSERT_TRUE(std::equal(a.begin(), a.end(), b.begin(), b.end()));
    ASSERT_EQ(*fly.knn(s), cache.knn(s));
    const auto table = cache.knn(s);
    ASSERT_EQ(table.k, std::min<std::size_t>(16, a.size()));
    for (std::size_t i = 0; i < table.query_count; ++i) {
      const auto want = testing::brute_knn(a, std::span(&a[i], 1), table.k)[0];
      ASSERT_TRUE(std::equal(want.begin(), want.end(), table.row(i).begin()));
    }
    if (s + 1 < kNumScales) ASSERT_EQ(*fly.resample(s), cache.down_map(s));
  }
}

TEST(IndexCache, LookupChains) {
  const auto cache = build_cache(uniform_cloud(3000, 2, 3.0), preset("T"));
  const auto one = lookup_down(cache, 1, 2);
  ASSERT_EQ(one.size(), 1u);
  EXPECT_EQ(one[0], &cache.down_map(1));
  const auto two = lookup_down(cache, 1, 3);
  ASSERT_EQ(two.size(), 2u);
  EXPECT_EQ(two[0], &cache.down_map(1));
  EXPECT_EQ(two[1], &cache.down_map(2));
  const auto up = lookup_up(cache, 3, 1);
  ASSERT_EQ(up.size(), 2u);
  EXPECT_EQ(up[0], &cache.down_map(2));
  EXPECT_EQ(up[1], &cache.down_map(1));
  EXPECT_EQ(&lookup_knn(cache, 2), &cache.knn(2));
}

TEST(IndexCache, UpChainRestoresShape) {
  const auto cache = build_cache(uniform_cloud(3000, 2, 3.0), preset("T"));
  Matrix x(cache.point_count(3), 2, 1.5);
  for (const auto* map : lookup_up(cache, 3, 1)) x = unpool_rows(x, *map);
  EXPECT_EQ(x.rows(), cache.point_count(1));
  for (double v : x.values()) EXPECT_EQ(v, 1.5);
}

TEST(IndexCache, OutOfRangeScalesThrow) {
  const auto cache = build_cache(uniform_cloud(500, 2), preset("T"));
  EXPECT_THROW(lookup_knn(cache, 5), InvalidArgument);
  EXPECT_THROW(lookup_knn(cache, -1), InvalidArgument);
  EXPECT_THROW(lookup_down(cache, 2, 2), InvalidArgument);
  EXPECT_THROW(lookup_down(cache, 3, 1), InvalidArgument);
  EXPECT_THROW(lookup_up(cache, 1, 3), InvalidArgument);
  EXPECT_THROW(cache.down_map(4), InvalidArgument);
}

TEST(IndexCache, InvalidCloudThrows) {
  EXPECT_THROW(build_cache(PointCloud{}, preset("T")), InvalidArgument);
}

TEST(IndexCache, CachedForwardBuildsNothing) {
  const auto cloud = room_cloud(2048, 4);
  const auto config = preset("T");
  const auto cache = build_cache(cloud, config);
  const auto weights = init_weights(config, 1);
  const auto before = index_build_counts();
  model_forward(cloud, cache, weights, config);
  classification_forward(cloud, cache, weights, config);
  EXPECT_EQ(index_build_counts(), before);
}

// Every stage reads the same table object for a given branch.
class RecordingIndex final : public IndexSource {
 public:
  explicit RecordingIndex(const IndexCache& cache) : inner_(cache) {}
  std::span<const Point3> coords(int scale) const override { return inner_.coords(scale); }
  std::shared_ptr<const NeighborTable> knn(int scale) override {
    auto t = inner_.knn(scale);
    seen[static_cast<std::size_t>(scale)].insert(t.get());
    return t;
  }
  std::shared_ptr<const ResampleMap> resample(int scale) override { return inner_.resample(scale); }
  std::array<std::set<const NeighborTable*>, kNumScales> seen;

 private:
  CachedIndex inner_;
};

TEST(IndexCache, BranchTablesAreShared) {
  const auto cloud = room_cloud(2048, 5);
  const auto config = preset("T");
  const auto cache = build_cache(cloud, config);
  RecordingIndex index(cache);
  model_forward(cloud, index, Network::from_weights(init_weights(config, 2), config));
  for (int s = 0; s < kNumScales; ++s) {
    ASSERT_EQ(index.seen[static_cast<std::size_t>(s)].size(), 1u) << "scale " << s;
    EXPECT_EQ(*index.seen[static_cast<std::size_t>(s)].begin(), &cache.knn(s));
  }
}

TEST(IndexCache, OnTheFlyReportsIndexTime) {
  const auto cloud = room_cloud(2048, 6);
  const auto config = preset("T");
  OnTheFlyIndex fly(cloud, config);
  const auto before = index_build_counts();
  model_forward(cloud, fly, Network::from_weights(init_weights(config, 2), config));
  EXPECT_GT(index_build_counts().knn_tables, before.knn_tables);
  EXPECT_GT(fly.index_ms(), 0.0);
}

TEST(BenchIndex, ReportShapeAndEquality) {
  const auto cloud = room_cloud(1500, 7);
  const auto config = preset("T");
  const auto weights = init_weights(config, 3);
  const auto cached = bench_index(cloud, config, weights, 5, IndexMode::kCached);
  const auto fly = bench_index(cloud, config, weights, 5, IndexMode::kOnTheFly);
  EXPECT_EQ(cached.samples_ms.size(), 5u);
  EXPECT_EQ(cached.median_ms, median(cached.samples_ms));
  EXPECT_GT(cached.build_ms, 0.0);
  EXPECT_EQ(cached.output.logits.data, fly.output.logits.data);
  const auto text = format_bench({cached, fly});
  for (const char* key : {"mode=cached", "mode=on_the_fly", "median_ms=", "index_ms=", "kernel_ms="}) {
    EXPECT_NE(text.find(key), std::string::npos) << key;
  }
  EXPECT_THROW(bench_index(cloud, config, weights, 2, IndexMode::kCached), InvalidArgument);
}

TEST(Median, OddAndEven) {
  EXPECT_EQ(median({3, 1, 2}), 2.0);
  EXPECT_EQ(median({4, 1, 3, 2}), 2.5);
}

}  // namespace
}  // namespace pointhr
