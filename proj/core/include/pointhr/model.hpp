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
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "pointhr/config.hpp"
#include "pointhr/index_cache.hpp"
#include "pointhr/seq_ops.hpp"
#include "pointhr/types.hpp"
#include "pointhr/weights.hpp"

namespace pointhr {

struct LayerInfo {
  std::string name;
  std::string kind;  // "linear" or "block"
  int scale = 0;
  std::size_t in = 0;
  std::size_t out = 0;
  std::size_t params = 0;
};

// Static description of the network for one config: every layer, every
// tensor, in a fixed order.
struct ModelGraph {
  ModelConfig config;
  std::vector<LayerInfo> layers;
  std::vector<TensorSpec> tensors;

  int branch_count(int stage) const { return stage; }
  int blocks_per_branch(int stage) const;
  std::vector<int> branch_widths(int stage) const;
  std::vector<std::string> tensor_names() const;
  // Layers that open each new, coarser branch: stem.down, stage2.new, ...
  std::vector<std::string> transition_chain() const;
};

ModelGraph build_model(const ModelConfig& config);
// Attention groups of a block of `width` channels at `scale`.
std::size_t block_groups(const ModelConfig& config, int scale, std::size_t width);
WeightStore init_weights(const ModelConfig& config, std::uint64_t seed);
std::size_t count_params(const ModelConfig& config);

struct FlopsEstimate {
  double macs = 0.0;
  std::array<double, kNumScales> points{};
  std::string assumption;
};
// Multiply-accumulates of one forward pass for a uniform reference cloud in
// which each grid level keeps 1/6 of the previous level's points.
FlopsEstimate estimate_flops(const ModelConfig& config, std::size_t n_points);
inline constexpr double kReferenceDownsample = 6.0;

// Parameter count, per-stage breakdown, every layer and the FLOPs estimate.
std::string params_report(const ModelConfig& config, std::size_t n_points);

// Channel-matching paths into each target branch, keyed (source, target).
// Each path holds one linear per resampling step.
struct FusionUnit {
  int branches = 1;
  std::map<std::pair<int, int>, std::vector<Linear>> paths;
};

struct ModuleParams {
  std::vector<std::vector<SequenceBlockParams>> blocks;  // [branch][block]
  FusionUnit fusion;
};

struct StageParams {
  std::vector<std::optional<Linear>> adapt;  // per inherited branch
  std::optional<Linear> new_branch;
  std::vector<ModuleParams> modules;
};

struct DecoderParams {
  std::array<Linear, 4> up;                      // up[j]: branch j+1 width -> branch j width (j = 0 is the stem)
  std::array<std::optional<Linear>, 4> sum;      // sum[j]: branch j+1 width -> branch 1 width, j >= 1
  std::array<std::optional<SequenceBlockParams>, 4> refine;  // at scales 0..3
};

// Parameters of a ModelGraph, read out of a WeightStore. Extra tensors are
// ignored; missing ones throw.
struct Network {
  ModelConfig config;
  Linear stem_embed;
  SequenceBlockParams stem_block;
  Linear stem_down;
  std::array<StageParams, 4> stages;
  DecoderParams decoder;
  Linear head0;
  Linear head1;
  std::array<Linear, 3> cls_down;
  Linear cls_head0;
  Linear cls_head1;

  static Network from_weights(const WeightStore& store, const ModelConfig& config);
};

struct StemOutput {
  Matrix scale0;
  Matrix scale1;
};

struct EncoderOutput {
  Matrix stem;                     // scale 0, stem width
  std::array<Matrix, 4> branches;  // branch j at scale j
};

StemOutput stem_forward(const PointCloud& cloud, IndexSource& index, const Network& net);
// Sum of the target branch and every other branch resampled onto it.
Matrix fuse_branches(std::span<const Matrix> states, int target_branch, IndexSource& index, const FusionUnit& unit);
EncoderOutput encoder_forward(const PointCloud& cloud, IndexSource& index, const Network& net);
// Scale-0 features, stem width.
Matrix decoder_forward(const EncoderOutput& encoded, DecoderKind variant, IndexSource& index, const Network& net);

LabelOutput model_forward(const PointCloud& cloud, IndexSource& index, const Network& net);
LabelOutput model_forward(const PointCloud& cloud, const IndexCache& cache, const WeightStore& weights,
                          const ModelConfig& config);

std::vector<double> classification_forward(const PointCloud& cloud, IndexSource& index, const Network& net);
std::vector<double> classification_forward(const PointCloud& cloud, const IndexCache& cache,
                                           const WeightStore& weights, const ModelConfig& config);

}  // namespace pointhr
