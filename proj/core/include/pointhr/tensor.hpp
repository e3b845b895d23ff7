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

#include <cstddef>
#include <span>
#include <vector>

#include "pointhr/common.hpp"

namespace pointhr {

// Dense row-major matrix of doubles.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const { return {data_.data() + r * cols_, cols_}; }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool all_finite() const;

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

// Per-point, per-neighbor tensor laid out as [point][neighbor][channel].
class NeighborTensor {
 public:
  NeighborTensor() = default;
  NeighborTensor(std::size_t points, std::size_t neighbors, std::size_t channels, double fill = 0.0)
      : points_(points), neighbors_(neighbors), channels_(channels),
        data_(points * neighbors * channels, fill) {}

  std::size_t points() const { return points_; }
  std::size_t neighbors() const { return neighbors_; }
  std::size_t channels() const { return channels_; }

  double& operator()(std::size_t i, std::size_t n, std::size_t c) {
    return data_[(i * neighbors_ + n) * channels_ + c];
  }
  double operator()(std::size_t i, std::size_t n, std::size_t c) const {
    return data_[(i * neighbors_ + n) * channels_ + c];
  }

  std::span<double> slot(std::size_t i, std::size_t n) {
    return {data_.data() + (i * neighbors_ + n) * channels_, channels_};
  }
  std::span<const double> slot(std::size_t i, std::size_t n) const {
    return {data_.data() + (i * neighbors_ + n) * channels_, channels_};
  }

  std::span<double> values() { return data_; }
  std::span<const double> values() const { return data_; }

  bool operator==(const NeighborTensor&) const = default;

 private:
  std::size_t points_ = 0;
  std::size_t neighbors_ = 0;
  std::size_t channels_ = 0;
  std::vector<double> data_;
};

}  // namespace pointhr
