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
#include <optional>
#include <vector>

#include "pointhr/common.hpp"
#include "pointhr/tensor.hpp"

namespace pointhr {

// Scale 0 is the input resolution; scales 1..4 are the branch resolutions.
inline constexpr int kNumScales = 5;
inline constexpr int kNumBranches = 4;

struct PointCloud {
  std::vector<Point3> coords;
  // N x C_raw extra per-point channels; empty when the cloud is xyz only.
  std::optional<Matrix> raw_features;

  std::size_t size() const { return coords.size(); }
  std::size_t feature_channels() const { return raw_features ? raw_features->cols() : 0; }

  // Throws InvalidArgument when empty, non-finite, or row counts disagree.
  void validate() const;

  // Network input: xyz followed by the raw feature channels.
  Matrix input_features() const;
};

struct FeatureMatrix {
  Matrix data;
  int scale_id = 0;

  std::size_t rows() const { return data.rows(); }
  std::size_t cols() const { return data.cols(); }
};

struct LabelOutput {
  FeatureMatrix logits;
  std::vector<std::uint32_t> labels;
};

// Row-wise argmax; ties resolve to the lowest class id.
std::vector<std::uint32_t> argmax_labels(const Matrix& logits);

}  // namespace pointhr
