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


#include "pointhr/types.hpp"

#include <cmath>
#include <string>

namespace pointhr {

bool Matrix::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void PointCloud::validate() const {
  if (coords.empty()) throw InvalidArgument("point cloud is empty");
  for (std::size_t i = 0; i < coords.size(); ++i) {
    for (double v : coords[i]) {
      if (!std::isfinite(v)) {
        throw InvalidArgument("point " + std::to_string(i) + " has a non-finite coordinate");
      }
    }
  }
  if (raw_features && raw_features->rows() != coords.size()) {
    throw InvalidArgument("raw feature rows (" + std::to_string(raw_features->rows()) +
                          ") do not match point count (" + std::to_string(coords.size()) + ")");
  }
}

Matrix PointCloud::input_features() const {
  const std::size_t extra = feature_channels();
  Matrix out(coords.size(), 3 + extra);
  for (std::size_t i = 0; i < coords.size(); ++i) {
    auto row = out.row(i);
    row[0] = coords[i][0];
    row[1] = coords[i][1];
    row[2] = coords[i][2];
    for (std::size_t c = 0; c < extra; ++c) row[3 + c] = (*raw_features)(i, c);
  }
  return out;
}

std::vector<std::uint32_t> argmax_labels(const Matrix& logits) {
  std::vector<std::uint32_t> labels(logits.rows(), 0);
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    auto row = logits.row(i);
    std::size_t best = 0;
    for (std::size_t c = 1; c < row.size(); ++c) {
      if (row[c] > row[best]) best = c;
    }
    labels[i] = static_cast<std::uint32_t>(best);
  }
  return labels;
}

}  // namespace pointhr
