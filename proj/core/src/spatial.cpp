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


#include "pointhr/spatial.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace pointhr {
namespace {

std::atomic<std::uint64_t> g_knn_tables{0};
std::atomic<std::uint64_t> g_resample_maps{0};

struct Candidate {
  double d2;
  std::uint32_t index;
};

inline bool closer(const Candidate& a, const Candidate& b) {
  return a.d2 < b.d2 || (a.d2 == b.d2 && a.index < b.index);
}

void require_finite(std::span<const Point3> coords, const char* what) {
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (double v : coords[i]) {
      if (!std::isfinite(v)) {
        throw InvalidArgument(std::string(what) + " point " + std::to_string(i) + " is not finite");
      }
    }
  }
}

void brute_row(std::span<const Point3> source, const Point3& q, std::size_t k,
               std::vector<Candidate>& scratch, std::span<std::uint32_t> out) {
  scratch.resize(source.size());
  for (std::size_t j = 0; j < source.size(); ++j) {
    scratch[j] = {squared_distance(q, source[j]), static_cast<std::uint32_t>(j)};
  }
  std::partial_sort(scratch.begin(), scratch.begin() + static_cast<std::ptrdiff_t>(k), scratch.end(), closer);
  for (std::size_t n = 0; n < k; ++n) out[n] = scratch[n].index;
}

// Uniform spatial hash over the source points. Queries expand Chebyshev rings
// of cells until the k-th candidate is provably closer than anything unscanned.
class UniformGrid {
 public:
  UniformGrid(std::span<const Point3> source, std::size_t k) : source_(source) {
    Point3 lo = source[0];
    Point3 hi = source[0];
    double magnitude = 0.0;
    for (const auto& p : source) {
      for (int d = 0; d < 3; ++d) {
        lo[d] = std::min(lo[d], p[d]);
        hi[d] = std::max(hi[d], p[d]);
        magnitude = std::max(magnitude, std::abs(p[d]));
      }
    }
    slop_ = 1e-9 * (1.0 + magnitude);
    const double longest = std::max({hi[0] - lo[0], hi[1] - lo[1], hi[2] - lo[2]});
    cell_ = choose_cell(lo, hi, longest, k);
    build();
  }

  void query(const Point3& q, std::size_t k, std::vector<Candidate>& candidates,
             std::span<std::uint32_t> out) const {
    candidates.clear();
    std::array<std::int64_t, 3> c{};
    for (int d = 0; d < 3; ++d) c[d] = static_cast<std::int64_t>(std::floor(q[d] / cell_));

    // Rings closer than the occupied key box are empty; start at the box.
    std::int64_t r = 0;
    for (int d = 0; d < 3; ++d) {
      if (c[d] < lo_[d]) r = std::max(r, lo_[d] - c[d]);
      if (c[d] > hi_[d]) r = std::max(r, c[d] - hi_[d]);
    }
    for (;; ++r) {
      scan_shell(q, c, r, candidates);
      bool covered = true;
      for (int d = 0; d < 3; ++d) covered = covered && c[d] - r <= lo_[d] && c[d] + r >= hi_[d];
      if (candidates.size() >= k) {
        std::nth_element(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k - 1),
                         candidates.end(), closer);
        if (covered) break;
        double bound = std::numeric_limits<double>::infinity();
        for (int d = 0; d < 3; ++d) {
          bound = std::min(bound, q[d] - static_cast<double>(c[d] - r) * cell_);
          bound = std::min(bound, static_cast<double>(c[d] + r + 1) * cell_ - q[d]);
        }
        bound -= slop_;
        if (bound > 0.0 && candidates[k - 1].d2 < bound * bound) break;
      } else if (covered) {
        break;
      }
    }
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(k),
                      candidates.end(), closer);
    for (std::size_t n = 0; n < k; ++n) out[n] = candidates[n].index;
  }

 private:
  static constexpr std::int64_t kAxisSpan = std::int64_t{1} << 21;

  std::size_t occupied_cells(double cell) const {
    std::unordered_set<std::uint64_t> keys;
    keys.reserve(source_.size());
    for (const auto& p : source_) {
      std::uint64_t h = 1469598103934665603ull;
      for (int d = 0; d < 3; ++d) {
        h ^= static_cast<std::uint64_t>(static_cast<std::int64_t>(std::floor(p[d] / cell)));
        h *= 1099511628211ull;
      }
      keys.insert(h);
    }
    return keys.size();
  }

  double choose_cell(const Point3& lo, const Point3& hi, double longest, std::size_t k) const {
    if (!(longest > 0.0)) return 1.0;
    const double floor_extent = longest * 1e-3;
    double volume = 1.0;
    for (int d = 0; d < 3; ++d) volume *= std::max(hi[d] - lo[d], floor_extent);
    const double target = std::max(2.0, static_cast<double>(k) / 2.0);
    const double n = static_cast<double>(source_.size());
    const double min_cell = longest / static_cast<double>(kAxisSpan / 2);
    double cell = std::max(min_cell, std::cbrt(volume * target / n));
    for (int iter = 0; iter < 10; ++iter) {
      const double occupancy = n / static_cast<double>(occupied_cells(cell));
      if (occupancy > 2.0 * target) {
        cell *= 0.7;
      } else if (occupancy < target / 3.0 && cell < longest) {
        cell *= 1.4;
      } else {
        break;
      }
      cell = std::max(cell, min_cell);
    }
    return cell;
  }

  std::uint64_t pack(std::int64_t x, std::int64_t y, std::int64_t z) const {
    return static_cast<std::uint64_t>(x - lo_[0]) | (static_cast<std::uint64_t>(y - lo_[1]) << 21) |
           (static_cast<std::uint64_t>(z - lo_[2]) << 42);
  }

  void build() {
    const std::size_t n = source_.size();
    std::vector<std::array<std::int64_t, 3>> keys(n);
    lo_.fill(std::numeric_limits<std::int64_t>::max());
    hi_.fill(std::numeric_limits<std::int64_t>::min());
    for (std::size_t i = 0; i < n; ++i) {
      keys[i] = cell_key(source_[i], cell_);
      for (int d = 0; d < 3; ++d) {
        lo_[d] = std::min(lo_[d], keys[i][d]);
        hi_[d] = std::max(hi_[d], keys[i][d]);
      }
    }
    std::vector<std::uint64_t> packed(n);
    for (std::size_t i = 0; i < n; ++i) packed[i] = pack(keys[i][0], keys[i][1], keys[i][2]);
    order_.resize(n);
    std::iota(order_.begin(), order_.end(), 0u);
    std::sort(order_.begin(), order_.end(), [&packed](std::uint32_t a, std::uint32_t b) {
      return packed[a] < packed[b] || (packed[a] == packed[b] && a < b);
    });
    cells_.reserve(n);
    for (std::size_t s = 0; s < n;) {
      std::size_t e = s;
      while (e < n && packed[order_[e]] == packed[order_[s]]) ++e;
      cells_.emplace(packed[order_[s]], std::pair<std::uint32_t, std::uint32_t>(
                                            static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(e - s)));
      s = e;
    }
  }

  void scan_cell(const Point3& q, std::int64_t x, std::int64_t y, std::int64_t z,
                 std::vector<Candidate>& candidates) const {
    const auto it = cells_.find(pack(x, y, z));
    if (it == cells_.end()) return;
    const auto [start, count] = it->second;
    for (std::uint32_t s = start; s < start + count; ++s) {
      const std::uint32_t j = order_[s];
      candidates.push_back({squared_distance(q, source_[j]), j});
    }
  }

  void scan_shell(const Point3& q, const std::array<std::int64_t, 3>& c, std::int64_t r,
                  std::vector<Candidate>& candidates) const {
    std::array<std::int64_t, 3> from{};
    std::array<std::int64_t, 3> to{};
    for (int d = 0; d < 3; ++d) {
      from[d] = std::max(c[d] - r, lo_[d]);
      to[d] = std::min(c[d] + r, hi_[d]);
      if (from[d] > to[d]) return;
    }
    for (std::int64_t x = from[0]; x <= to[0]; ++x) {
      const bool x_edge = x == c[0] - r || x == c[0] + r;
      for (std::int64_t y = from[1]; y <= to[1]; ++y) {
        const bool y_edge = y == c[1] - r || y == c[1] + r;
        if (x_edge || y_edge) {
          for (std::int64_t z = from[2]; z <= to[2]; ++z) scan_cell(q, x, y, z, candidates);
        } else {
          const std::int64_t z0 = c[2] - r;
          const std::int64_t z1 = c[2] + r;
          if (z0 >= from[2] && z0 <= to[2]) scan_cell(q, x, y, z0, candidates);
          if (z1 != z0 && z1 >= from[2] && z1 <= to[2]) scan_cell(q, x, y, z1, candidates);
        }
      }
    }
  }

  std::span<const Point3> source_;
  double cell_ = 1.0;
  double slop_ = 0.0;
  std::array<std::int64_t, 3> lo_{};
  std::array<std::int64_t, 3> hi_{};
  std::unordered_map<std::uint64_t, std::pair<std::uint32_t, std::uint32_t>> cells_;
  std::vector<std::uint32_t> order_;
};

bool lexicographically_before(const Point3& a, std::uint32_t ia, const Point3& b, std::uint32_t ib) {
  if (a[0] != b[0]) return a[0] < b[0];
  if (a[1] != b[1]) return a[1] < b[1];
  if (a[2] != b[2]) return a[2] < b[2];
  return ia < ib;
}

}  // namespace

std::array<std::int64_t, 3> cell_key(const Point3& p, double cell_size) {
  return {static_cast<std::int64_t>(std::floor(p[0] / cell_size)),
          static_cast<std::int64_t>(std::floor(p[1] / cell_size)),
          static_cast<std::int64_t>(std::floor(p[2] / cell_size))};
}

NeighborTable knn_query(std::span<const Point3> source, std::span<const Point3> query, std::size_t k,
                        KnnBackend backend) {
  if (k == 0) throw InvalidArgument("knn_query: k must be at least 1");
  if (k > source.size()) {
    throw InvalidArgument("knn_query: k=" + std::to_string(k) + " exceeds source point count " +
                          std::to_string(source.size()));
  }
  require_finite(source, "source");
  require_finite(query, "query");
  g_knn_tables.fetch_add(1, std::memory_order_relaxed);

  NeighborTable table;
  table.query_count = query.size();
  table.k = k;
  table.indices.resize(query.size() * k);
  auto out_row = [&table, k](std::size_t i) {
    return std::span<std::uint32_t>(table.indices.data() + i * k, k);
  };

  if (backend == KnnBackend::kBrute) {
    parallel_for(query.size(), [&](std::size_t begin, std::size_t end) {
      std::vector<Candidate> scratch;
      for (std::size_t i = begin; i < end; ++i) brute_row(source, query[i], k, scratch, out_row(i));
    });
    return table;
  }

  const UniformGrid grid(source, k);
  parallel_for(query.size(), [&](std::size_t begin, std::size_t end) {
    std::vector<Candidate> scratch;
    for (std::size_t i = begin; i < end; ++i) grid.query(query[i], k, scratch, out_row(i));
  });
  return table;
}

std::vector<std::uint32_t> fps_select(std::span<const Point3> coords, std::size_t m) {
  if (m == 0 || m > coords.size()) {
    throw InvalidArgument("fps_select: m=" + std::to_string(m) + " must lie in [1, " +
                          std::to_string(coords.size()) + "]");
  }
  require_finite(coords, "fps");
  const std::size_t n = coords.size();
  std::uint32_t seed = 0;
  for (std::uint32_t i = 1; i < n; ++i) {
    if (lexicographically_before(coords[i], i, coords[seed], seed)) seed = i;
  }
  std::vector<std::uint32_t> selected;
  selected.reserve(m);
  selected.push_back(seed);
  std::vector<char> taken(n, 0);
  taken[seed] = 1;
  std::vector<double> min_d2(n);
  for (std::size_t i = 0; i < n; ++i) min_d2[i] = squared_distance(coords[i], coords[seed]);
  while (selected.size() < m) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || min_d2[i] > min_d2[best]) best = i;
    }
    selected.push_back(static_cast<std::uint32_t>(best));
    taken[best] = 1;
    for (std::size_t i = 0; i < n; ++i) {
      min_d2[i] = std::min(min_d2[i], squared_distance(coords[i], coords[best]));
    }
  }
  return selected;
}

ResampleMap grid_pool_map(std::span<const Point3> coords, double cell_size) {
  if (!(cell_size > 0.0) || !std::isfinite(cell_size)) {
    throw InvalidArgument("grid_pool_map: cell_size must be positive");
  }
  if (coords.empty()) throw InvalidArgument("grid_pool_map: empty point set");
  require_finite(coords, "grid");
  g_resample_maps.fetch_add(1, std::memory_order_relaxed);

  const std::size_t n = coords.size();
  std::vector<std::array<std::int64_t, 3>> keys(n);
  for (std::size_t i = 0; i < n; ++i) keys[i] = cell_key(coords[i], cell_size);
  // Members of a cell end up contiguous and in coordinate order, which makes
  // the centroid independent of input order.
  std::vector<std::uint32_t> order(n);
  std::iota(order.begin(), order.end(), 0u);
  std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (keys[a] != keys[b]) return keys[a] < keys[b];
    return lexicographically_before(coords[a], a, coords[b], b);
  });

  ResampleMap map;
  map.kind = ResampleKind::kGrid;
  map.down_assign.resize(n);
  for (std::size_t s = 0; s < n;) {
    std::size_t e = s;
    Point3 sum{0.0, 0.0, 0.0};
    const auto coarse = static_cast<std::uint32_t>(map.coarse_coords.size());
    while (e < n && keys[order[e]] == keys[order[s]]) {
      const auto& p = coords[order[e]];
      sum[0] += p[0];
      sum[1] += p[1];
      sum[2] += p[2];
      map.down_assign[order[e]] = coarse;
      ++e;
    }
    const double count = static_cast<double>(e - s);
    map.coarse_coords.push_back({sum[0] / count, sum[1] / count, sum[2] / count});
    s = e;
  }
  map.up_k = 1;
  map.up_neighbors = map.down_assign;
  map.up_weights.assign(n, 1.0);
  return map;
}

ResampleMap fps_knn_map(std::span<const Point3> fine_coords, std::size_t m, std::size_t interp_k) {
  const auto selected = fps_select(fine_coords, m);
  if (interp_k == 0 || interp_k > m) {
    throw InvalidArgument("fps_knn_map: interp_k=" + std::to_string(interp_k) + " must lie in [1, " +
                          std::to_string(m) + "]");
  }
  g_resample_maps.fetch_add(1, std::memory_order_relaxed);
  ResampleMap map;
  map.kind = ResampleKind::kFpsKnn;
  map.coarse_coords.reserve(m);
  for (auto idx : selected) map.coarse_coords.push_back(fine_coords[idx]);

  const auto table = knn_query(map.coarse_coords, fine_coords, interp_k, KnnBackend::kGrid);
  const std::size_t n = fine_coords.size();
  map.up_k = interp_k;
  map.up_neighbors = table.indices;
  map.up_weights.assign(n * interp_k, 0.0);
  map.down_assign.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = table.row(i);
    map.down_assign[i] = row[0];
    auto* weights = map.up_weights.data() + i * interp_k;
    const double nearest = squared_distance(fine_coords[i], map.coarse_coords[row[0]]);
    if (nearest == 0.0) {
      weights[0] = 1.0;
      continue;
    }
    double total = 0.0;
    for (std::size_t n_idx = 0; n_idx < interp_k; ++n_idx) {
      weights[n_idx] = 1.0 / squared_distance(fine_coords[i], map.coarse_coords[row[n_idx]]);
      total += weights[n_idx];
    }
    for (std::size_t n_idx = 0; n_idx < interp_k; ++n_idx) weights[n_idx] /= total;
  }
  return map;
}

Matrix pool_rows(const Matrix& fine, const ResampleMap& map, PoolReduce reduce) {
  if (fine.rows() != map.fine_count()) {
    throw InvalidArgument("pool: feature rows " + std::to_string(fine.rows()) +
                          " != map fine count " + std::to_string(map.fine_count()));
  }
  const std::size_t channels = fine.cols();
  Matrix out(map.coarse_count(), channels);
  std::vector<std::uint32_t> count(map.coarse_count(), 0);
  // Mean accumulates offsets from the first member so constant cells are exact.
  Matrix offsets(reduce == PoolReduce::kMean ? map.coarse_count() : 0, channels);
  for (std::size_t i = 0; i < fine.rows(); ++i) {
    const std::uint32_t c = map.down_assign[i];
    auto src = fine.row(i);
    auto dst = out.row(c);
    if (count[c] == 0) {
      std::copy(src.begin(), src.end(), dst.begin());
    } else if (reduce == PoolReduce::kMax) {
      for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] = std::max(dst[ch], src[ch]);
    } else {
      auto acc = offsets.row(c);
      for (std::size_t ch = 0; ch < channels; ++ch) acc[ch] += src[ch] - dst[ch];
    }
    ++count[c];
  }
  for (std::size_t c = 0; c < map.coarse_count(); ++c) {
    POINTHR_CHECK(count[c] > 0);
    if (reduce == PoolReduce::kMean) {
      auto dst = out.row(c);
      auto acc = offsets.row(c);
      const double n = static_cast<double>(count[c]);
      for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] += acc[ch] / n;
    }
  }
  return out;
}

Matrix unpool_rows(const Matrix& coarse, const ResampleMap& map) {
  if (coarse.rows() != map.coarse_count()) {
    throw InvalidArgument("unpool: feature rows " + std::to_string(coarse.rows()) +
                          " != map coarse count " + std::to_string(map.coarse_count()));
  }
  const std::size_t channels = coarse.cols();
  Matrix out(map.fine_count(), channels);
  parallel_for(map.fine_count(), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      auto dst = out.row(i);
      if (map.kind == ResampleKind::kGrid) {
        auto src = coarse.row(map.down_assign[i]);
        std::copy(src.begin(), src.end(), dst.begin());
        continue;
      }
      for (std::size_t n = 0; n < map.up_k; ++n) {
        const double w = map.up_weights[i * map.up_k + n];
        auto src = coarse.row(map.up_neighbors[i * map.up_k + n]);
        for (std::size_t ch = 0; ch < channels; ++ch) dst[ch] += w * src[ch];
      }
    }
  });
  return out;
}

FeatureMatrix pool_features(const FeatureMatrix& fine, const ResampleMap& map, PoolReduce reduce) {
  return {pool_rows(fine.data, map, reduce), fine.scale_id + 1};
}

FeatureMatrix unpool_features(const FeatureMatrix& coarse, const ResampleMap& map) {
  return {unpool_rows(coarse.data, map), coarse.scale_id - 1};
}

IndexBuildCounts index_build_counts() {
  return {g_knn_tables.load(std::memory_order_relaxed), g_resample_maps.load(std::memory_order_relaxed)};
}

}  // namespace pointhr
