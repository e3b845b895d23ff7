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
#include <string>
#include <string_view>

namespace pointhr {

enum class OperatorKind { kVa, kGva, kMlp };
enum class DecoderKind { kSum, kPg, kPgr };

std::string_view to_string(OperatorKind kind);
std::string_view to_string(DecoderKind kind);
OperatorKind parse_operator(std::string_view name);
DecoderKind parse_decoder(std::string_view name);

// Architecture hyperparameters. Stage i (1-based) holds i branches and
// branch j of stage i carries 2^(j-1) * channels[i-1] features.
struct ModelConfig {
  std::array<int, 4> modules{1, 1, 5, 4};
  std::array<int, 4> blocks{2, 2, 2, 2};
  std::array<int, 4> channels{64, 32, 32, 32};
  int stem_channels = 32;
  std::array<int, 4> neighbors{16, 16, 16, 16};
  // Attention groups per branch; groups[0] also serves the scale-0 blocks.
  std::array<int, 4> groups{4, 8, 16, 32};
  // Grid cell edge (meters) used to pool scale s into scale s + 1.
  std::array<double, 4> grid_sizes{0.06, 0.15, 0.375, 0.9375};
  OperatorKind op = OperatorKind::kGva;
  int num_classes = 20;
  DecoderKind decoder = DecoderKind::kPgr;
  bool pos_encoding = false;
  // Raw input width: xyz plus any extra per-point channels.
  int in_channels = 3;

  // Width of branch `branch` (1..4) inside stage `stage` (1..4).
  int branch_width(int stage, int branch) const;
  // Width of every branch after the last stage.
  int final_width(int branch) const { return branch_width(4, branch); }
  // K used by the neighbor table at `scale`; scale 0 reuses K_1.
  int scale_neighbors(int scale) const;
  // Groups used by attention blocks at `scale`; scale 0 reuses groups[0].
  int scale_groups(int scale) const;

  // Throws InvalidArgument on any violated invariant.
  void validate() const;

  bool operator==(const ModelConfig&) const = default;
};

// Presets T, S, B, L. Unknown names throw InvalidArgument.
ModelConfig preset(std::string_view name);
bool is_preset_name(std::string_view name);

// Line-oriented `key = value` text; '#' starts a comment. Tuples are
// comma-separated. Keys absent from the text keep the L preset values.
ModelConfig parse_config(std::string_view text);
ModelConfig load_config_file(const std::string& path);
std::string format_config(const ModelConfig& config);

}  // namespace pointhr
