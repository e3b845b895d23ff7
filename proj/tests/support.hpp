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

// Test-side oracles. Each one re-derives a result with plain loops and shares
// no code with the library paths it checks.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <random>
#include <span>
#include <utility>
#include <vector>

#include "pointhr/seq_ops.hpp"
#include "pointhr/spatial.hpp"
#include "pointhr/types.hpp"

namespace pointhr::testing {

inline std::vector<Point3> random_points(std::mt19937_64& rng, std::size_t n, double extent = 1.0) {
  std::uniform_real_distribution<double> u(0.0, extent);
  std::vector<Point3> pts(n);
  for (auto& p : pts) p = {u(rng), u(rng), u(rng)};
  return pts;
}

// Random points where roughly a quarter repeat an earlier point exactly.
inline std::vector<Point3> points_with_duplicates(std::mt19937_64& rng, std::size_t n) {
  auto pts = random_points(rng, n);
  std::uniform_int_distribution<int> coin(0, 3);
  for (std::size_t i = 1; i < n; ++i) {
    if (coin(rng) == 0) pts[i] = pts[std::uniform_int_distribution<std::size_t>(0, i - 1)(rng)];
  }
  return pts;
}

inline Matrix random_matrix(std::mt19937_64& rng, std::size_t rows, std::size_t cols, double lo = -1.0,
                            double hi = 1.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.values()) v = u(rng);
  return m;
}

inline Linear random_linear(std::mt19937_64& rng, std::size_t in, std::size_t out) {
  Linear layer{random_matrix(rng, out, in), std::vector<double>(out)};
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (double& b : layer.bias) b = u(rng);
  return layer;
}

inline Mlp2 random_mlp(std::mt19937_64& rng, std::size_t in, std::size_t hidden, std::size_t out) {
  return {random_linear(rng, in, hidden), random_linear(rng, hidden, out)};
}

inline SequenceBlockParams random_block(std::mt19937_64& rng, OperatorKind kind, std::size_t channels,
                                        std::size_t groups, bool position) {
  auto p = SequenceBlockParams::zeros(kind, channels, groups, position);
  std::uniform_real_distribution<double> scale(0.5, 1.5);
  std::uniform_real_distribution<double> shift(-0.5, 0.5);
  for (double& g : p.norm_in.gamma) g = scale(rng);
  for (double& g : p.norm_out.gamma) g = scale(rng);
  for (double& b : p.norm_in.beta) b = shift(rng);
  for (double& b : p.norm_out.beta) b = shift(rng);
  p.embed = random_linear(rng, channels, channels);
  if (kind != OperatorKind::kMlp) {
    p.query = random_linear(rng, channels, channels);
    p.key = random_linear(rng, channels, channels);
    p.value = random_linear(rng, channels, channels);
  }
  p.phi = random_mlp(rng, channels, channels, phi_output_width(kind, channels, p.groups));
  if (p.has_position) p.position = random_mlp(rng, 3, channels, channels);
  p.update = random_linear(rng, channels, channels);
  return p;
}

inline NeighborTable random_table(std::mt19937_64& rng, std::size_t queries, std::size_t sources, std::size_t k) {
  NeighborTable t;
  t.query_count = queries;
  t.k = k;
  t.indices.resize(queries * k);
  std::uniform_int_distribution<std::uint32_t> pick(0, static_cast<std::uint32_t>(sources - 1));
  for (auto& idx : t.indices) idx = pick(rng);
  return t;
}

// Sort every candidate by (squared distance, index) and keep the first k.
inline std::vector<std::vector<std::uint32_t>> brute_knn(std::span<const Point3> source,
                                                         std::span<const Point3> query, std::size_t k) {
  std::vector<std::vector<std::uint32_t>> rows;
  for (const auto& q : query) {
    std::vector<std::pair<double, std::uint32_t>> all;
    for (std::uint32_t j = 0; j < source.size(); ++j) {
      const double dx = q[0] - source[j][0];
      const double dy = q[1] - source[j][1];
      const double dz = q[2] - source[j][2];
      all.push_back({dx * dx + dy * dy + dz * dz, j});
    }
    std::sort(all.begin(), all.end());
    std::vector<std::uint32_t> row;
    for (std::size_t n = 0; n < k; ++n) row.push_back(all[n].second);
    rows.push_back(row);
  }
  return rows;
}

inline double dist2(const Point3& a, const Point3& b) {
  return (a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]);
}

// Step t must attain the max over unselected points of the min distance to
// selected[0..t). Returns the first failing step, or 0 when all hold.
inline std::size_t first_fps_violation(std::span<const Point3> pts, const std::vector<std::uint32_t>& sel) {
  std::vector<char> taken(pts.size(), 0);
  taken[sel[0]] = 1;
  for (std::size_t t = 1; t < sel.size(); ++t) {
    auto min_to_selected = [&](std::size_t c) {
      double best = INFINITY;
      for (std::size_t s = 0; s < t; ++s) best = std::min(best, dist2(pts[c], pts[sel[s]]));
      return best;
    };
    const double picked = min_to_selected(sel[t]);
    for (std::size_t c = 0; c < pts.size(); ++c) {
      if (!taken[c] && min_to_selected(c) > picked) return t;
    }
    if (taken[sel[t]]) return t;
    taken[sel[t]] = 1;
  }
  return 0;
}

struct CellPartition {
  std::vector<std::array<std::int64_t, 3>> keys;        // ascending
  std::vector<std::vector<std::uint32_t>> members;      // ascending fine index
};

inline CellPartition partition_cells(std::span<const Point3> pts, double cell) {
  std::map<std::array<std::int64_t, 3>, std::vector<std::uint32_t>> cells;
  for (std::uint32_t i = 0; i < pts.size(); ++i) {
    std::array<std::int64_t, 3> key{};
    for (int d = 0; d < 3; ++d) key[d] = static_cast<std::int64_t>(std::floor(pts[i][d] / cell));
    cells[key].push_back(i);
  }
  CellPartition p;
  for (auto& [key, idx] : cells) {
    p.keys.push_back(key);
    p.members.push_back(idx);
  }
  return p;
}

// Per-cell reduce; mean is first + sum(x - first) / n over members in fine
// index order.
inline Matrix pool_oracle(const Matrix& fine, const std::vector<std::vector<std::uint32_t>>& members, bool mean) {
  Matrix out(members.size(), fine.cols());
  for (std::size_t c = 0; c < members.size(); ++c) {
    for (std::size_t ch = 0; ch < fine.cols(); ++ch) {
      const double first = fine(members[c][0], ch);
      double acc = mean ? 0.0 : first;
      for (std::size_t m = 1; m < members[c].size(); ++m) {
        const double v = fine(members[c][m], ch);
        if (mean) {
          acc += v - first;
        } else {
          acc = std::max(acc, v);
        }
      }
      out(c, ch) = mean ? first + acc / static_cast<double>(members[c].size()) : acc;
    }
  }
  return out;
}

// bias first, then inputs in ascending order.
inline std::vector<double> dense(const Linear& layer, const std::vector<double>& x) {
  std::vector<double> y(layer.out());
  for (std::size_t o = 0; o < layer.out(); ++o) {
    double acc = layer.bias[o];
    for (std::size_t c = 0; c < layer.in(); ++c) acc += layer.weight(o, c) * x[c];
    y[o] = acc;
  }
  return y;
}

inline std::vector<double> mlp(const Mlp2& m, const std::vector<double>& x) {
  auto h = dense(m.first, x);
  for (double& v : h) v = v > 0.0 ? v : 0.0;
  return dense(m.second, h);
}

inline std::vector<double> row_of(const Matrix& m, std::size_t r) { return {m.row(r).begin(), m.row(r).end()}; }

// out_i[l*(C/g)+m] = sum_j softmax_j(phi(q_i - k_j + pos_ij))[l] * (v_j + pos_ij)[l*(C/g)+m]
inline Matrix attention_oracle(const Matrix& q, const Matrix& k, const Matrix& v, const NeighborTable& table,
                               const Mlp2& phi, std::size_t groups, const NeighborTensor* pos = nullptr) {
  const std::size_t channels = q.cols();
  const std::size_t per_group = channels / groups;
  Matrix out(q.rows(), channels);
  for (std::size_t i = 0; i < q.rows(); ++i) {
    std::vector<std::vector<double>> logits(table.k);
    for (std::size_t j = 0; j < table.k; ++j) {
      std::vector<double> rel(channels);
      for (std::size_t c = 0; c < channels; ++c) {
        rel[c] = q(i, c) - k(table.indices[i * table.k + j], c);
        if (pos) rel[c] += (*pos)(i, j, c);
      }
      logits[j] = mlp(phi, rel);
    }
    std::vector<std::vector<double>> weight(table.k, std::vector<double>(groups));
    for (std::size_t l = 0; l < groups; ++l) {
      double peak = logits[0][l];
      for (std::size_t j = 1; j < table.k; ++j) peak = std::max(peak, logits[j][l]);
      double z = 0.0;
      for (std::size_t j = 0; j < table.k; ++j) {
        weight[j][l] = std::exp(logits[j][l] - peak);
        z += weight[j][l];
      }
      for (std::size_t j = 0; j < table.k; ++j) weight[j][l] /= z;
    }
    for (std::size_t l = 0; l < groups; ++l) {
      for (std::size_t m = 0; m < per_group; ++m) {
        const std::size_t c = l * per_group + m;
        double acc = 0.0;
        for (std::size_t j = 0; j < table.k; ++j) {
          double value = v(table.indices[i * table.k + j], c);
          if (pos) value += (*pos)(i, j, c);
          acc += weight[j][l] * value;
        }
        out(i, c) = acc;
      }
    }
  }
  return out;
}

inline Matrix mlp_extract_oracle(const Matrix& values, const NeighborTable& table, const Mlp2& phi) {
  Matrix out(table.query_count, values.cols());
  for (std::size_t i = 0; i < table.query_count; ++i) {
    for (std::size_t j = 0; j < table.k; ++j) {
      const auto e = mlp(phi, row_of(values, table.indices[i * table.k + j]));
      for (std::size_t c = 0; c < values.cols(); ++c) out(i, c) = j == 0 ? e[c] : std::max(out(i, c), e[c]);
    }
  }
  return out;
}

inline std::vector<double> norm_row(const Norm& n, const std::vector<double>& x) {
  const double w = static_cast<double>(x.size());
  double mean = 0.0;
  for (double v : x) mean += v;
  mean /= w;
  double var = 0.0;
  for (double v : x) var += (v - mean) * (v - mean);
  var /= w;
  const double inv = 1.0 / std::sqrt(var + kNormEpsilon);
  std::vector<double> y(x.size());
  for (std::size_t c = 0; c < x.size(); ++c) y[c] = (x[c] - mean) * inv * n.gamma[c] + n.beta[c];
  return y;
}

inline Matrix map_rows(const Matrix& x, const std::function<std::vector<double>(const std::vector<double>&)>& f) {
  Matrix out;
  for (std::size_t r = 0; r < x.rows(); ++r) {
    const auto y = f(row_of(x, r));
    if (r == 0) out = Matrix(x.rows(), y.size());
    std::copy(y.begin(), y.end(), out.row(r).begin());
  }
  return out;
}

// Norm -> embed -> extract -> norm -> update, plus the residual.
inline Matrix block_oracle(const Matrix& x, std::span<const Point3> coords, const NeighborTable& table,
                           const SequenceBlockParams& p) {
  const Matrix e = map_rows(x, [&](const auto& r) { return dense(p.embed, norm_row(p.norm_in, r)); });
  Matrix agg;
  if (p.kind == OperatorKind::kMlp) {
    agg = mlp_extract_oracle(e, table, p.phi);
  } else {
    const Matrix q = map_rows(e, [&](const auto& r) { return dense(p.query, r); });
    const Matrix k = map_rows(e, [&](const auto& r) { return dense(p.key, r); });
    const Matrix v = map_rows(e, [&](const auto& r) { return dense(p.value, r); });
    NeighborTensor pos;
    if (p.has_position) {
      pos = NeighborTensor(table.query_count, table.k, p.channels);
      for (std::size_t i = 0; i < table.query_count; ++i) {
        for (std::size_t j = 0; j < table.k; ++j) {
          const auto& a = coords[i];
          const auto& b = coords[table.indices[i * table.k + j]];
          const auto y = mlp(p.position, {a[0] - b[0], a[1] - b[1], a[2] - b[2]});
          std::copy(y.begin(), y.end(), pos.slot(i, j).begin());
        }
      }
    }
    agg = attention_oracle(q, k, v, table, p.phi, p.groups, p.has_position ? &pos : nullptr);
  }
  Matrix out = map_rows(agg, [&](const auto& r) { return dense(p.update, norm_row(p.norm_out, r)); });
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += x.values()[i];
  return out;
}

}  // namespace pointhr::testing
