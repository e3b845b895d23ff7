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

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "pointhr/config.hpp"
#include "pointhr/spatial.hpp"
#include "pointhr/tensor.hpp"
#include "pointhr/weights.hpp"

namespace pointhr {

struct Linear {
  Matrix weight;             // out x in
  std::vector<double> bias;  // out

  std::size_t in() const { return weight.cols(); }
  std::size_t out() const { return weight.rows(); }

  static Linear zeros(std::size_t in, std::size_t out);
  static Linear identity(std::size_t width);
};

// Per-point normalization across channels followed by a learned scale/shift.
struct Norm {
  std::vector<double> gamma;
  std::vector<double> beta;

  std::size_t width() const { return gamma.size(); }
  static Norm identity(std::size_t width);
  static Norm zeros(std::size_t width);
};

// second(max(0, first(x))).
struct Mlp2 {
  Linear first;
  Linear second;

  static Mlp2 zeros(std::size_t in, std::size_t hidden, std::size_t out);
};

inline constexpr double kNormEpsilon = 1e-5;

Matrix linear_forward(const Linear& layer, const Matrix& x);
// Adds parameter gradients into `grad` and returns d loss / d x.
Matrix linear_backward(const Linear& layer, const Matrix& x, const Matrix& dy, Linear& grad);
Matrix norm_forward(const Norm& norm, const Matrix& x);
Matrix norm_backward(const Norm& norm, const Matrix& x, const Matrix& dy, Norm& grad);
Matrix mlp_forward(const Mlp2& mlp, const Matrix& x);
Matrix mlp_backward(const Mlp2& mlp, const Matrix& x, const Matrix& dy, Mlp2& grad);
Matrix relu(const Matrix& x);

NeighborTensor gather_neighbors(const Matrix& features, const NeighborTable& table);

// Softmax over the neighbor axis, independently per point and channel.
NeighborTensor neighbor_softmax(const NeighborTensor& scores);

struct LocalExtractInputs {
  const Matrix& queries;
  const Matrix& keys;
  const Matrix& values;
  const NeighborTable& table;
  // Optional relative-position term added to the query-key relation and to
  // the gathered values; M x K x C.
  const NeighborTensor* position = nullptr;
};

// w_ij = phi(q_i - k_j); out_i = sum_j softmax_j(w_i) * v_j channelwise.
Matrix va_extract(const LocalExtractInputs& inputs, const Mlp2& phi);
// Same with phi producing one logit per channel group.
Matrix gva_extract(const LocalExtractInputs& inputs, const Mlp2& phi, std::size_t groups);
// out_i = channelwise max over neighbors of phi(v_j).
Matrix mlp_extract(const Matrix& values, const NeighborTable& table, const Mlp2& phi);

struct AttentionGrads {
  Matrix queries;
  Matrix keys;
  Matrix values;
  NeighborTensor position;  // empty unless inputs.position was set
  Mlp2 phi;
};
AttentionGrads attention_backward(const LocalExtractInputs& inputs, const Mlp2& phi, std::size_t groups,
                                  const Matrix& dout);

struct MlpExtractGrads {
  Matrix values;
  Mlp2 phi;
};
MlpExtractGrads mlp_extract_backward(const Matrix& values, const NeighborTable& table, const Mlp2& phi,
                                     const Matrix& dout);

struct SequenceBlockParams {
  OperatorKind kind = OperatorKind::kGva;
  std::size_t channels = 0;
  std::size_t groups = 1;
  bool has_position = false;

  Norm norm_in;
  Linear embed;
  Linear query;  // query/key/value are empty for the mlp extractor
  Linear key;
  Linear value;
  Mlp2 phi;
  Mlp2 position;  // 3 -> C -> C, only when has_position
  Norm norm_out;
  Linear update;

  // Shapes for the given layout, every value zero (gamma included).
  static SequenceBlockParams zeros(OperatorKind kind, std::size_t channels, std::size_t groups,
                                   bool position);
};

// Logit width of the extractor's phi for a block layout.
std::size_t phi_output_width(OperatorKind kind, std::size_t channels, std::size_t groups);

std::vector<TensorSpec> block_tensor_specs(const std::string& prefix, OperatorKind kind, std::size_t channels,
                                           std::size_t groups, bool position);
SequenceBlockParams read_block(const WeightStore& store, const std::string& prefix, OperatorKind kind,
                               std::size_t channels, std::size_t groups, bool position);

// Every parameter buffer with its tensor-name suffix, in a fixed order.
void for_each_param(SequenceBlockParams& params,
                    const std::function<void(const std::string&, std::span<double>)>& visit);

// Relative-position embedding for every (point, neighbor) slot.
NeighborTensor position_term(const Mlp2& position, std::span<const Point3> coords, const NeighborTable& table);

// Embed -> gather -> extract -> update, with a residual on the block input.
Matrix sequence_block_forward(const Matrix& features, std::span<const Point3> coords, const NeighborTable& table,
                              const SequenceBlockParams& params);

struct SequenceBlockGrads {
  Matrix features;
  SequenceBlockParams params;
};
SequenceBlockGrads sequence_block_backward(const Matrix& features, std::span<const Point3> coords,
                                           const NeighborTable& table, const SequenceBlockParams& params,
                                           const Matrix& dout);

// Linear tensor specs/readers shared with the network builder.
void append_linear_specs(std::vector<TensorSpec>& specs, const std::string& name, std::size_t in,
                         std::size_t out);
Linear read_linear(const WeightStore& store, const std::string& name, std::size_t in, std::size_t out);

}  // namespace pointhr
